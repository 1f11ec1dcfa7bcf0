#include "portopt/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "portopt/errors.hpp"
#include "portopt/kernels.hpp"

namespace portopt {

std::string StrategySpec::name() const {
    switch (kind) {
        case StrategyKind::hybrid: return "hybrid:" + std::to_string(top_k);
        case StrategyKind::policy_only: return "policy-only:" + std::to_string(top_k);
        case StrategyKind::signal_only: return "signal-only:" + std::to_string(top_k);
        case StrategyKind::equal_weight: return "equal-weight";
        case StrategyKind::static_composite: return "static-composite";
        case StrategyKind::single_index:
            return "single-index:" + (index_id.empty() ? std::to_string(index_column) : index_id);
    }
    return "?";
}

StrategySpec StrategySpec::parse(const std::string& text, std::span<const std::string> asset_ids) {
    StrategySpec spec;
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);

    const auto need_k = [&]() {
        if (arg.empty()) throw InputError("strategy '" + text + "' needs a Top-K argument");
        try {
            std::size_t used = 0;
            spec.top_k = std::stoul(arg, &used);
            if (used != arg.size() || spec.top_k == 0) throw std::invalid_argument(arg);
        } catch (const std::exception&) {
            throw InputError("strategy '" + text + "' has a bad Top-K argument");
        }
    };
    if (head == "hybrid") {
        spec.kind = StrategyKind::hybrid;
        need_k();
    } else if (head == "policy-only") {
        spec.kind = StrategyKind::policy_only;
        need_k();
    } else if (head == "signal-only") {
        spec.kind = StrategyKind::signal_only;
        need_k();
    } else if (head == "equal-weight") {
        spec.kind = StrategyKind::equal_weight;
    } else if (head == "static-composite") {
        spec.kind = StrategyKind::static_composite;
    } else if (head == "single-index") {
        spec.kind = StrategyKind::single_index;
        if (arg.empty()) throw InputError("strategy '" + text + "' needs an asset id");
        const auto it = std::find(asset_ids.begin(), asset_ids.end(), arg);
        if (it == asset_ids.end()) throw InputError("single-index asset '" + arg + "' not in universe");
        spec.index_column = static_cast<std::size_t>(it - asset_ids.begin());
        spec.index_id = arg;
    } else {
        throw InputError("unknown strategy '" + text + "'");
    }
    return spec;
}

std::vector<double> gross_returns(const ReturnMatrix& returns, IndexRange range,
                                  const Matrix& weights_history) {
    if (weights_history.rows != range.size() || weights_history.cols != returns.returns.cols)
        throw InputError("weights history shape mismatch");
    std::vector<double> gross(range.size());
    for (std::size_t t = 0; t < range.size(); ++t)
        gross[t] = kern::dot(returns.returns.row(range.begin + t).data(),
                             weights_history.row(t).data(), weights_history.cols);
    return gross;
}

std::vector<double> apply_costs(std::span<const double> gross, const Matrix& weights_history,
                                double tc) {
    if (gross.size() != weights_history.rows) throw InputError("returns/weights length mismatch");
    const std::size_t n = weights_history.cols;
    std::vector<double> prev(n, 1.0 / static_cast<double>(n));
    std::vector<double> net(gross.size());
    for (std::size_t t = 0; t < gross.size(); ++t) {
        const double turnover = kern::l1_diff(weights_history.row(t).data(), prev.data(), n);
        net[t] = gross[t] - tc * turnover;
        std::copy(weights_history.row(t).begin(), weights_history.row(t).end(), prev.begin());
    }
    return net;
}

EquityCurve equity_curve(std::span<const double> net_returns, std::span<const Date> timestamps) {
    if (!timestamps.empty() && timestamps.size() != net_returns.size())
        throw InputError("equity curve timestamp length mismatch");
    EquityCurve c;
    c.timestamps.assign(timestamps.begin(), timestamps.end());
    c.equity.reserve(net_returns.size());
    c.peaks.reserve(net_returns.size());
    c.drawdowns.reserve(net_returns.size());
    double equity = 1.0;
    double peak = 0.0;
    for (double r : net_returns) {
        if (!(r > -1.0)) throw InputError("net return <= -1 cannot be compounded");
        equity *= 1.0 + r;
        peak = std::max(peak, equity);
        c.equity.push_back(equity);
        c.peaks.push_back(peak);
        c.drawdowns.push_back(equity / peak - 1.0);
        c.max_drawdown = std::min(c.max_drawdown, c.drawdowns.back());
    }
    return c;
}

MetricsReport compute_metrics(std::span<const double> net_returns, double risk_free_weekly,
                              double periods_per_year) {
    if (net_returns.size() < 2) throw InputError("need at least 2 periods for metrics");
    MetricsReport m;
    m.risk_free_weekly = risk_free_weekly;
    m.periods_per_year = periods_per_year;

    const auto t = static_cast<double>(net_returns.size());
    const double mean = kern::sum(net_returns.data(), net_returns.size()) / t;
    double ss = 0.0;
    for (double r : net_returns) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / (t - 1.0));

    m.ann_return = periods_per_year * mean;
    // Float noise on a constant series leaves sd around 1e-18; treat as zero.
    m.volatility = sd < 1e-12 ? 0.0 : std::sqrt(periods_per_year) * sd;
    if (m.volatility > 0.0)
        m.sharpe = (m.ann_return - periods_per_year * risk_free_weekly) / m.volatility;

    m.max_drawdown = equity_curve(net_returns, {}).max_drawdown;
    return m;
}

namespace {

Matrix constant_weights(std::size_t rows, const std::vector<double>& w) {
    Matrix m(rows, w.size());
    for (std::size_t t = 0; t < rows; ++t) std::copy(w.begin(), w.end(), m.row(t).begin());
    return m;
}

Matrix run_policy_strategy(const StrategySpec& spec, const BacktestInputs& in, bool with_scores) {
    const auto* policies = with_scores ? in.policies : (in.policies_no_signal != nullptr
                                                            ? in.policies_no_signal
                                                            : in.policies);
    if (policies == nullptr || policies->find(spec.top_k) == policies->end())
        throw PrereqError("no trained policy for top_k=" + std::to_string(spec.top_k));
    const TrainedPolicy& tp = policies->at(spec.top_k);

    const std::size_t l = tp.env_config.window;
    const std::size_t n = in.returns->returns.cols;
    const IndexRange test = in.split.test;
    if (test.begin < l)
        throw InputError("test range starts before " + std::to_string(l) + " rows of history");
    if (tp.env_config.n_assets != n) throw InputError("policy asset count mismatch");

    Matrix r_slice = in.returns->returns.slice_rows(test.begin - l, in.returns->returns.rows);
    Matrix s_slice(r_slice.rows, n);
    if (with_scores) {
        if (in.test_scores == nullptr) throw PrereqError("hybrid strategy needs forecast scores");
        if (in.test_scores->scores.rows != test.size() || in.test_scores->scores.cols != n)
            throw InputError("forecast matrix shape mismatch");
        for (std::size_t t = 0; t < test.size(); ++t)
            std::copy(in.test_scores->scores.row(t).begin(), in.test_scores->scores.row(t).end(),
                      s_slice.row(l + t).begin());
    }

    PortfolioEnv env(std::move(r_slice), std::move(s_slice), tp.env_config);
    ObsNormalizer frozen = tp.normalizer;  // stats stay fixed during evaluation
    const PolicyCallback policy = [&](const EnvState& s) {
        const std::vector<double> obs = frozen.normalize(s.v, false);
        PolicyEval ev = policy_eval(tp.params, obs);
        PolicyDecision d;
        d.value = ev.value;
        d.log_prob = gaussian_log_prob(ev.mean, ev.mean, ev.log_std);
        d.action = std::move(ev.mean);
        return d;
    };
    return run_episode(env, policy).weights_history;
}

}  // namespace

Matrix run_strategy(const StrategySpec& spec, const BacktestInputs& in) {
    if (in.returns == nullptr) throw InputError("backtest inputs missing returns");
    const std::size_t n = in.returns->returns.cols;
    const std::size_t rows = in.split.test.size();
    if (rows == 0) throw InputError("empty test range");

    switch (spec.kind) {
        case StrategyKind::equal_weight: {
            return constant_weights(rows, std::vector<double>(n, 1.0 / static_cast<double>(n)));
        }
        case StrategyKind::single_index: {
            if (spec.index_column >= n) throw InputError("index column out of range");
            std::vector<double> w(n, 0.0);
            w[spec.index_column] = 1.0;
            return constant_weights(rows, w);
        }
        case StrategyKind::static_composite: {
            if (spec.class_weights.empty()) throw InputError("static-composite needs class weights");
            if (in.asset_classes.size() != n) throw InputError("asset classes required for composite");
            std::map<std::string, std::size_t> class_count;
            for (const auto& c : in.asset_classes) ++class_count[c];
            double total = 0.0;
            for (const auto& [cls, cw] : spec.class_weights) {
                if (class_count.find(cls) == class_count.end())
                    throw InputError("composite class '" + cls + "' has no assets");
                total += cw;
            }
            if (!(total > 0.0)) throw InputError("composite class weights must sum to > 0");
            std::vector<double> w(n, 0.0);
            for (std::size_t a = 0; a < n; ++a) {
                const auto it = spec.class_weights.find(in.asset_classes[a]);
                if (it == spec.class_weights.end()) continue;
                w[a] = it->second / total / static_cast<double>(class_count[in.asset_classes[a]]);
            }
            return constant_weights(rows, w);
        }
        case StrategyKind::signal_only: {
            if (in.test_scores == nullptr) throw PrereqError("signal-only strategy needs forecast scores");
            if (in.test_scores->scores.rows != rows || in.test_scores->scores.cols != n)
                throw InputError("forecast matrix shape mismatch");
            if (spec.top_k < 1 || spec.top_k > n) throw InputError("top_k out of range");
            Matrix m(rows, n);
            std::vector<std::size_t> idx(n);
            for (std::size_t t = 0; t < rows; ++t) {
                const auto scores = in.test_scores->scores.row(t);
                std::iota(idx.begin(), idx.end(), 0);
                std::stable_sort(idx.begin(), idx.end(),
                                 [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
                for (std::size_t r = 0; r < spec.top_k; ++r)
                    m.at(t, idx[r]) = 1.0 / static_cast<double>(spec.top_k);
            }
            return m;
        }
        case StrategyKind::policy_only:
            return run_policy_strategy(spec, in, /*with_scores=*/false);
        case StrategyKind::hybrid:
            return run_policy_strategy(spec, in, /*with_scores=*/true);
    }
    throw InputError("unknown strategy kind");
}

std::vector<StrategyResult> compare(std::span<const StrategySpec> specs, const BacktestInputs& in,
                                    double tc, double risk_free_weekly, double periods_per_year) {
    if (in.returns == nullptr) throw InputError("backtest inputs missing returns");
    std::vector<StrategyResult> out;
    out.reserve(specs.size());
    const IndexRange test = in.split.test;
    const std::vector<Date> stamps(in.returns->timestamps.begin() + static_cast<std::ptrdiff_t>(test.begin),
                                   in.returns->timestamps.begin() + static_cast<std::ptrdiff_t>(test.end));
    for (const auto& spec : specs) {
        StrategyResult r;
        r.name = spec.name();
        r.weights = run_strategy(spec, in);
        r.gross = gross_returns(*in.returns, test, r.weights);
        r.net = apply_costs(r.gross, r.weights, tc);
        r.curve = equity_curve(r.net, stamps);
        r.metrics = compute_metrics(r.net, risk_free_weekly, periods_per_year);

        const std::size_t n = r.weights.cols;
        r.mean_weights.assign(n, 0.0);
        for (std::size_t t = 0; t < r.weights.rows; ++t)
            kern::axpy(1.0 / static_cast<double>(r.weights.rows), r.weights.row(t).data(),
                       r.mean_weights.data(), n);

        std::vector<double> prev(n, 1.0 / static_cast<double>(n));
        for (std::size_t t = 0; t < r.weights.rows; ++t) {
            StepRecord rec;
            rec.gross = r.gross[t];
            rec.turnover = kern::l1_diff(r.weights.row(t).data(), prev.data(), n);
            rec.active = static_cast<std::size_t>(
                std::count_if(r.weights.row(t).begin(), r.weights.row(t).end(),
                              [](double x) { return x > 0.0; }));
            rec.net = r.net[t];
            rec.reward = std::log1p(std::max(rec.net, -0.999));
            rec.clamped = rec.net < -0.999;
            rec.weights.assign(r.weights.row(t).begin(), r.weights.row(t).end());
            r.ledger.push_back(std::move(rec));
            std::copy(r.weights.row(t).begin(), r.weights.row(t).end(), prev.begin());
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::span<const ReportedRow> reported_reference_rows() {
    // Published weekly-data reference results (Jan-Dec 2024 test period).
    static const std::vector<ReportedRow> rows = {
        {"LSTM (Signal-only, Top-5)", -0.0303, 0.5278, -0.0575, -0.3500, false},
        {"LSTM (Signal-only, Top-10)", -0.0087, 0.4363, -0.0199, -0.3189, false},
        {"LSTM (Signal-only, Top-30)", 0.1575, 0.3268, 0.4821, -0.1991, false},
        {"PPO (Policy-only, Top-5)", 0.0575, 0.1559, 0.3686, -0.0719, false},
        {"PPO (Policy-only, Top-10)", 0.2020, 0.1977, 1.0219, -0.0787, false},
        {"PPO (Policy-only, Top-30)", 0.0803, 0.1736, 0.4627, -0.0978, false},
        {"Hybrid LSTM+PPO (Top-5)", 0.2538, 0.2653, 0.9565, -0.1369, false},
        {"Hybrid LSTM+PPO (Top-10)", 0.0983, 0.2168, 0.4535, -0.1197, false},
        {"Hybrid LSTM+PPO (Top-30)", 0.1025, 0.1780, 0.5756, -0.1060, false},
        {"S&P 500", 0.0679, 0.2000, 0.0034, -0.0787, true},
        {"Allianz Income & Growth", -0.0327, 0.1595, -0.0020, -0.0650, true},
        {"Composite (25/25/25/25)", 0.0401, 0.1968, 0.0020, -0.0634, true},
        {"Equal-Weight (EW)", 0.0042, 0.1402, 0.0003, -0.0719, true},
    };
    return rows;
}

}  // namespace portopt
