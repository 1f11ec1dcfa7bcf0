#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "portopt/data.hpp"
#include "portopt/env.hpp"
#include "portopt/lstm.hpp"
#include "portopt/matrix.hpp"
#include "portopt/ppo.hpp"

namespace portopt {

struct EquityCurve {
    std::vector<Date> timestamps;
    std::vector<double> equity;     // E_t, compounded from 1.0
    std::vector<double> peaks;      // running max of E_1..E_t
    std::vector<double> drawdowns;  // E_t / peak_t - 1
    double max_drawdown = 0.0;
};

struct MetricsReport {
    double ann_return = 0.0;
    double volatility = 0.0;
    std::optional<double> sharpe;  // empty when volatility is degenerate
    double max_drawdown = 0.0;
    double risk_free_weekly = 0.0;
    double periods_per_year = 52.0;
};

enum class StrategyKind {
    hybrid,
    policy_only,
    signal_only,
    equal_weight,
    static_composite,
    single_index,
};

struct StrategySpec {
    StrategyKind kind = StrategyKind::equal_weight;
    std::size_t top_k = 0;                        // hybrid / policy-only / signal-only
    std::map<std::string, double> class_weights;  // static-composite
    std::size_t index_column = 0;                 // single-index
    std::string index_id;                         // single-index display name

    std::string name() const;
    static StrategySpec parse(const std::string& text, std::span<const std::string> asset_ids);
};

// Per-period portfolio return r_t . w_t over the rows of `range`.
std::vector<double> gross_returns(const ReturnMatrix& returns, IndexRange range,
                                  const Matrix& weights_history);

// net_t = gross_t - tc * |w_t - w_{t-1}|_1, with uniform initial previous weights.
std::vector<double> apply_costs(std::span<const double> gross, const Matrix& weights_history,
                                double tc);

EquityCurve equity_curve(std::span<const double> net_returns, std::span<const Date> timestamps);

// Annualized mean/vol/Sharpe (sample std, divisor T-1) and max drawdown of the
// compounded curve. Degenerate variance yields an empty Sharpe.
MetricsReport compute_metrics(std::span<const double> net_returns, double risk_free_weekly,
                              double periods_per_year);

struct BacktestInputs {
    const ReturnMatrix* returns = nullptr;
    SplitPlan split;
    std::vector<std::string> asset_ids;
    std::vector<std::string> asset_classes;
    const ForecastMatrix* test_scores = nullptr;                       // walk-forward, test range
    const std::map<std::size_t, TrainedPolicy>* policies = nullptr;   // per K, for hybrid
    const std::map<std::size_t, TrainedPolicy>* policies_no_signal = nullptr;  // per K, policy-only
};

// Weights history over the test range (one row per test week).
Matrix run_strategy(const StrategySpec& spec, const BacktestInputs& in);

struct StrategyResult {
    std::string name;
    Matrix weights;             // test_len x N
    std::vector<double> gross;
    std::vector<double> net;
    EquityCurve curve;
    MetricsReport metrics;
    std::vector<double> mean_weights;
    std::vector<StepRecord> ledger;  // evaluation-time records (tc only, no sparsity penalty)
};

// Evaluates every strategy on the identical test range and transaction cost.
std::vector<StrategyResult> compare(std::span<const StrategySpec> specs, const BacktestInputs& in,
                                    double tc, double risk_free_weekly, double periods_per_year);

// Published reference results for the same strategy/benchmark set (weekly
// data, Jan-Dec 2024 test period), reproduced as constants. Benchmark rows are
// consumed as-is; strategy rows back the Sharpe self-consistency check.
struct ReportedRow {
    std::string name;
    double ann_return = 0.0;
    double volatility = 0.0;
    double sharpe = 0.0;
    double max_drawdown = 0.0;
    bool benchmark = false;
};

std::span<const ReportedRow> reported_reference_rows();

}  // namespace portopt
