#include "portopt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "portopt/errors.hpp"

namespace portopt {

namespace {

std::string loc(const std::filesystem::path& file, std::size_t line) {
    return file.string() + ":" + std::to_string(line);
}

}  // namespace

// Locale-independent double parse of an entire field.
bool parse_double_field(std::string_view text, double& out) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (text.empty()) return false;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

void PriceTable::validate() const {
    if (assets.empty()) throw InputError("price table has no assets");
    if (timestamps.size() < 2) throw InputError("price table needs at least 2 rows");
    if (prices.rows != timestamps.size() || prices.cols != assets.size())
        throw InputError("price table shape mismatch");
    if (!asset_classes.empty() && asset_classes.size() != assets.size())
        throw InputError("asset class list length mismatch");
    for (std::size_t t = 1; t < timestamps.size(); ++t)
        if (!(timestamps[t - 1] < timestamps[t]))
            throw InputError("timestamps not strictly increasing at row " + std::to_string(t));
    for (double p : prices.data)
        if (!(p > 0.0) || !std::isfinite(p)) throw InputError("non-positive or non-finite price");
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("manifest parse error in " + path.string() + ": " + e.what());
    }
    if (!j.contains("assets") || !j["assets"].is_array() || j["assets"].empty())
        throw InputError("manifest " + path.string() + " has no assets");
    Manifest m;
    for (const auto& a : j["assets"]) {
        ManifestEntry e;
        e.id = a.value("id", "");
        e.path = a.value("path", "");
        e.asset_class = a.value("class", "");
        e.url = a.value("url", "");
        if (e.id.empty()) throw InputError("manifest entry without id in " + path.string());
        if (e.path.empty() && e.url.empty())
            throw InputError("manifest entry '" + e.id + "' has neither path nor url");
        m.assets.push_back(std::move(e));
    }
    return m;
}

PriceSeries read_price_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open price file: " + path.string());
    PriceSeries s;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            std::string h = line;
            if (h.size() >= 3 && static_cast<unsigned char>(h[0]) == 0xEF) h.erase(0, 3);  // UTF-8 BOM
            std::erase_if(h, [](char c) { return c == ' ' || c == '\t'; });
            if (h != "date,close")
                throw InputError("expected header 'date,close' at " + loc(path, lineno) + ", got '" + line + "'");
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw InputError("missing comma at " + loc(path, lineno));
        Date d;
        try {
            d = Date::parse(line.substr(0, comma));
        } catch (const InputError& e) {
            throw InputError(std::string(e.what()) + " at " + loc(path, lineno));
        }
        double close;
        if (!parse_double_field(std::string_view(line).substr(comma + 1), close))
            throw InputError("bad close value at " + loc(path, lineno));
        if (!std::isfinite(close) || close <= 0.0)
            throw InputError("non-positive close at " + loc(path, lineno));
        if (!s.dates.empty() && !(s.dates.back() < d))
            throw InputError("dates not strictly increasing at " + loc(path, lineno));
        s.dates.push_back(d);
        s.closes.push_back(close);
    }
    if (!header_seen) throw InputError("empty price file: " + path.string());
    if (s.dates.empty()) throw InputError("price file has no observations: " + path.string());
    return s;
}

PriceTable ingest_prices(const Manifest& manifest, CalendarPolicy policy,
                         const std::filesystem::path& base_dir) {
    if (manifest.assets.empty()) throw InputError("manifest has no assets");

    std::vector<PriceSeries> series;
    series.reserve(manifest.assets.size());
    PriceTable table;
    for (const auto& entry : manifest.assets) {
        std::filesystem::path p = entry.path;
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        series.push_back(read_price_csv(p));
        table.assets.push_back(entry.id);
        table.asset_classes.push_back(entry.asset_class);
    }

    // Build the shared calendar.
    std::vector<Date> calendar;
    if (policy == CalendarPolicy::union_ffill) {
        for (const auto& s : series) calendar.insert(calendar.end(), s.dates.begin(), s.dates.end());
        std::sort(calendar.begin(), calendar.end());
        calendar.erase(std::unique(calendar.begin(), calendar.end()), calendar.end());
        // Latest common start: every asset must have a real observation at or before each kept date.
        Date common_start = series.front().dates.front();
        for (const auto& s : series) common_start = std::max(common_start, s.dates.front());
        std::erase_if(calendar, [&](const Date& d) { return d < common_start; });
    } else {
        calendar = series.front().dates;
        for (std::size_t i = 1; i < series.size(); ++i) {
            std::vector<Date> merged;
            std::set_intersection(calendar.begin(), calendar.end(), series[i].dates.begin(),
                                  series[i].dates.end(), std::back_inserter(merged));
            calendar = std::move(merged);
        }
    }
    if (calendar.size() < 2) throw InputError("fewer than 2 common dates after alignment");

    table.timestamps = calendar;
    table.prices = Matrix(calendar.size(), series.size());
    for (std::size_t a = 0; a < series.size(); ++a) {
        const auto& s = series[a];
        std::size_t k = 0;  // index of next observation
        double last = 0.0;
        for (std::size_t t = 0; t < calendar.size(); ++t) {
            while (k < s.dates.size() && s.dates[k] <= calendar[t]) last = s.closes[k++];
            table.prices.at(t, a) = last;  // truncation guarantees k > 0 here
        }
    }
    table.validate();
    return table;
}

PriceTable resample_weekly(const PriceTable& daily, int anchor_weekday) {
    if (daily.timestamps.empty()) throw InputError("cannot resample an empty price table");
    if (anchor_weekday < 0 || anchor_weekday > 6) throw InputError("anchor weekday out of range");

    const auto anchor_of = [&](const Date& d) {
        return d + ((anchor_weekday - d.weekday() + 7) % 7);
    };
    const Date first_anchor = anchor_of(daily.timestamps.front());
    const Date last_date = daily.timestamps.back();
    if (first_anchor > last_date)
        throw InputError("series too short to cover one week at the requested anchor");

    std::vector<Date> anchors;
    for (Date a = first_anchor; a <= last_date; a = a + 7) anchors.push_back(a);

    PriceTable weekly;
    weekly.assets = daily.assets;
    weekly.asset_classes = daily.asset_classes;
    weekly.timestamps = anchors;
    weekly.prices = Matrix(anchors.size(), daily.assets.size());
    std::size_t k = 0;  // rows consumed from the daily table
    std::vector<double> last(daily.assets.size(), 0.0);
    for (std::size_t w = 0; w < anchors.size(); ++w) {
        while (k < daily.timestamps.size() && daily.timestamps[k] <= anchors[w]) {
            for (std::size_t a = 0; a < last.size(); ++a) last[a] = daily.prices.at(k, a);
            ++k;
        }
        for (std::size_t a = 0; a < last.size(); ++a) weekly.prices.at(w, a) = last[a];
    }
    weekly.validate();
    return weekly;
}

ReturnMatrix log_returns(const PriceTable& prices) {
    prices.validate();
    const std::size_t t_out = prices.timestamps.size() - 1;
    ReturnMatrix rm;
    rm.timestamps.assign(prices.timestamps.begin() + 1, prices.timestamps.end());
    rm.returns = Matrix(t_out, prices.assets.size());
    for (std::size_t t = 0; t < t_out; ++t)
        for (std::size_t a = 0; a < prices.assets.size(); ++a)
            rm.returns.at(t, a) = std::log(prices.prices.at(t + 1, a) / prices.prices.at(t, a));
    return rm;
}

Scaler fit_scaler(const ReturnMatrix& train) {
    const std::size_t t = train.returns.rows;
    const std::size_t n = train.returns.cols;
    if (t < 2) throw InputError("need at least 2 rows to fit a scaler");
    Scaler s;
    s.mu.resize(n);
    s.sigma.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        double mean = 0.0;
        for (std::size_t r = 0; r < t; ++r) mean += train.returns.at(r, a);
        mean /= static_cast<double>(t);
        double ss = 0.0;
        for (std::size_t r = 0; r < t; ++r) {
            const double d = train.returns.at(r, a) - mean;
            ss += d * d;
        }
        const double sigma = std::sqrt(ss / static_cast<double>(t - 1));
        if (!(sigma > 1e-12))
            throw InputError("degenerate series (zero variance) in column " + std::to_string(a));
        s.mu[a] = mean;
        s.sigma[a] = sigma;
    }
    return s;
}

ReturnMatrix apply_scaler(const Scaler& scaler, const ReturnMatrix& data) {
    if (scaler.mu.size() != data.returns.cols)
        throw InputError("scaler dimension mismatch: " + std::to_string(scaler.mu.size()) + " vs " +
                         std::to_string(data.returns.cols));
    ReturnMatrix out;
    out.timestamps = data.timestamps;
    out.returns = Matrix(data.returns.rows, data.returns.cols);
    for (std::size_t t = 0; t < data.returns.rows; ++t)
        for (std::size_t a = 0; a < data.returns.cols; ++a)
            out.returns.at(t, a) = (data.returns.at(t, a) - scaler.mu[a]) / scaler.sigma[a];
    return out;
}

SplitPlan chronological_split(std::size_t row_count, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("split ratio must lie in (0,1)");
    if (row_count < 4) throw InputError("too few rows to split: " + std::to_string(row_count));
    const auto train_len = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(row_count)));
    if (train_len < 1 || row_count - train_len < 1)
        throw InputError("split leaves an empty range");
    SplitPlan plan;
    plan.train = {0, train_len};
    plan.test = {train_len, row_count};
    plan.ratio = ratio;
    return plan;
}

ReturnMatrix slice_rows(const ReturnMatrix& m, IndexRange range) {
    ReturnMatrix out;
    out.timestamps.assign(m.timestamps.begin() + static_cast<std::ptrdiff_t>(range.begin),
                          m.timestamps.begin() + static_cast<std::ptrdiff_t>(range.end));
    out.returns = m.returns.slice_rows(range.begin, range.end);
    return out;
}

}  // namespace portopt
