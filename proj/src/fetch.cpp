#include "portopt/fetch.hpp"

#include <chrono>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "portopt/errors.hpp"
#include "portopt/hash.hpp"

namespace portopt {

namespace {

// Split "http://host:port/path" into (scheme://host:port, /path).
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InputError("unsupported url (expected http://): " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

FetchResult fetch_to_cache(const std::string& url, const std::filesystem::path& cache_dir) {
    std::filesystem::create_directories(cache_dir);
    const std::string key = sha256_hex(url).substr(0, 16);
    const std::filesystem::path body_path = cache_dir / (key + ".csv");
    const std::filesystem::path meta_path = cache_dir / (key + ".meta.json");

    if (std::filesystem::exists(body_path) && std::filesystem::exists(meta_path)) {
        FetchResult r;
        r.cached_path = body_path;
        r.sha256 = sha256_file_hex(body_path.string());
        r.from_cache = true;
        return r;
    }

    const auto [host, path] = split_url(url);
    httplib::Client client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    auto res = client.Get(path);
    if (!res) throw InputError("fetch failed for " + url + ": no response");
    if (res->status != 200)
        throw InputError("fetch failed for " + url + ": HTTP " + std::to_string(res->status));

    {
        std::ofstream out(body_path, std::ios::binary);
        if (!out) throw InputError("cannot write cache file: " + body_path.string());
        out << res->body;
    }

    FetchResult r;
    r.cached_path = body_path;
    r.sha256 = sha256_hex(res->body);
    r.from_cache = false;

    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    nlohmann::json meta = {
        {"url", url},
        {"retrieved_unix_seconds", secs},
        {"sha256", r.sha256},
    };
    std::ofstream meta_out(meta_path);
    if (!meta_out) throw InputError("cannot write cache sidecar: " + meta_path.string());
    meta_out << meta.dump(2) << '\n';
    return r;
}

}  // namespace portopt
