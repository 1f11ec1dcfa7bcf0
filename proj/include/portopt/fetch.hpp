#pragma once

#include <filesystem>
#include <string>

namespace portopt {

struct FetchResult {
    std::filesystem::path cached_path;
    std::string sha256;
    bool from_cache = false;
};

// GET `url` (plain http) and cache the body under `cache_dir`, keyed by the
// URL hash. A provenance sidecar (<file>.meta.json: url, retrieval time,
// content hash) is written next to it. Subsequent calls reuse the cached copy.
FetchResult fetch_to_cache(const std::string& url, const std::filesystem::path& cache_dir);

}  // namespace portopt
