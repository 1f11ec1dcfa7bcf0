#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "portopt/dates.hpp"
#include "portopt/matrix.hpp"

namespace portopt {

// Aligned close prices: one row per timestamp, one column per asset.
// Invariants: prices > 0, timestamps strictly increasing, no missing cells.
struct PriceTable {
    std::vector<std::string> assets;
    std::vector<std::string> asset_classes;  // parallel to assets; may be empty
    std::vector<Date> timestamps;
    Matrix prices;

    void validate() const;  // throws InputError on violated invariants
};

// T x N weekly log-returns; one fewer row than the price table it came from.
struct ReturnMatrix {
    std::vector<Date> timestamps;
    Matrix returns;
};

// Per-asset z-score parameters fitted on training data only.
struct Scaler {
    std::vector<double> mu;
    std::vector<double> sigma;
};

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

struct SplitPlan {
    IndexRange train;
    IndexRange test;
    double ratio = 0.0;
};

enum class CalendarPolicy {
    union_ffill,   // union calendar, gaps forward-filled, truncated to latest common start
    intersection,  // keep only dates present in every series
};

struct ManifestEntry {
    std::string id;
    std::string path;         // CSV with header date,close; relative paths resolve against the manifest
    std::string asset_class;  // free-form tag (e.g. us_equity, crypto); used by the composite baseline
    std::string url;          // optional; fetched to a cache and then treated as a local file
};

struct Manifest {
    std::vector<ManifestEntry> assets;
};

Manifest load_manifest(const std::filesystem::path& path);

// Locale-independent full-field double parse (surrounding blanks allowed).
bool parse_double_field(std::string_view text, double& out);

// One (date, close) series as read from a per-asset CSV.
struct PriceSeries {
    std::vector<Date> dates;
    std::vector<double> closes;
};

PriceSeries read_price_csv(const std::filesystem::path& path);

PriceTable ingest_prices(const Manifest& manifest, CalendarPolicy policy,
                         const std::filesystem::path& base_dir = {});

// One row per calendar week anchored at `anchor_weekday`; value = last close at or
// before the anchor date, forward-filled across empty weeks. Trailing weeks whose
// anchor falls after the last observation are dropped.
PriceTable resample_weekly(const PriceTable& daily, int anchor_weekday = kFriday);

ReturnMatrix log_returns(const PriceTable& prices);

// Column means and sample standard deviations (divisor T-1).
// Throws InputError for degenerate (zero variance) columns.
Scaler fit_scaler(const ReturnMatrix& train);

ReturnMatrix apply_scaler(const Scaler& scaler, const ReturnMatrix& data);

// floor(ratio*T) train rows, remainder test, no shuffling.
SplitPlan chronological_split(std::size_t row_count, double ratio);

ReturnMatrix slice_rows(const ReturnMatrix& m, IndexRange range);

}  // namespace portopt
