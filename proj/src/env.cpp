#include "portopt/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "portopt/errors.hpp"
#include "portopt/kernels.hpp"

namespace portopt {

void EnvConfig::validate() const {
    if (n_assets < 1) throw InputError("environment needs at least one asset");
    if (window < 1) throw InputError("window must be >= 1");
    if (tc < 0.0) throw InputError("transaction cost must be >= 0");
    if (!(tau >= 0.0 && tau < 1.0)) throw InputError("threshold must lie in [0,1)");
    if (lambda_sparse < 0.0) throw InputError("sparsity coefficient must be >= 0");
    if (top_k < 1 || top_k > n_assets) throw InputError("top_k must lie in [1, n_assets]");
}

WeightVector action_to_weights(std::span<const double> logits, std::size_t top_k, double tau) {
    const std::size_t n = logits.size();
    for (double a : logits)
        if (!std::isfinite(a)) throw InputError("non-finite action logit");

    // Top-K selection; stable sort keeps the lower index on equal logits.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    const std::size_t k = std::min(top_k, n);

    // Softmax over the survivors, max-shifted. Shifting makes the projection
    // exactly invariant to adding a constant to all logits.
    double max_logit = logits[idx[0]];
    std::vector<double> w(n, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        const double e = std::exp(logits[idx[r]] - max_logit);
        w[idx[r]] = e;
        total += e;
    }
    for (std::size_t r = 0; r < k; ++r) w[idx[r]] /= total;

    // Weight floor.
    double kept = 0.0;
    for (double& x : w) {
        if (x > 0.0 && x < tau) x = 0.0;
        kept += x;
    }

    WeightVector out;
    out.weights.assign(n, 0.0);
    if (kept <= 0.0) {
        // Everything thresholded out: full weight on the argmax logit.
        out.weights[idx[0]] = 1.0;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) out.weights[i] = w[i] / kept;
    return out;
}

EnvState build_state(const Matrix& window, std::span<const double> w_prev,
                     std::span<const double> scores) {
    const std::size_t n = w_prev.size();
    if (window.cols != n || scores.size() != n) throw InputError("state segment shape mismatch");
    EnvState s;
    s.v.reserve(window.rows * n + 2 * n);
    s.v.insert(s.v.end(), window.data.begin(), window.data.end());
    s.v.insert(s.v.end(), w_prev.begin(), w_prev.end());
    s.v.insert(s.v.end(), scores.begin(), scores.end());
    return s;
}

PortfolioEnv::PortfolioEnv(Matrix returns, Matrix scores, EnvConfig config)
    : returns_(std::move(returns)), scores_(std::move(scores)), config_(config) {
    config_.validate();
    if (returns_.cols != config_.n_assets) throw InputError("returns column count != n_assets");
    if (scores_.rows != returns_.rows || scores_.cols != returns_.cols)
        throw InputError("scores shape must match returns");
    if (returns_.rows < config_.window + 1)
        throw InputError("environment needs at least window+1 rows of returns");
    for (double r : returns_.data)
        if (!std::isfinite(r)) throw InputError("non-finite return fed to the environment");
    for (double s : scores_.data)
        if (!std::isfinite(s)) throw InputError("non-finite score fed to the environment");
    cursor_ = returns_.rows;  // not started
}

EnvState PortfolioEnv::state_at_cursor() const {
    const std::size_t l = config_.window;
    const Matrix win = returns_.slice_rows(cursor_ - l, cursor_);
    return build_state(win, w_prev_, scores_.row(cursor_));
}

EnvState PortfolioEnv::reset() {
    cursor_ = config_.window;
    w_prev_.assign(config_.n_assets, 1.0 / static_cast<double>(config_.n_assets));
    started_ = true;
    return state_at_cursor();
}

PortfolioEnv::StepResult PortfolioEnv::step(std::span<const double> action_logits) {
    if (!started_) throw std::logic_error("step() before reset()");
    if (done()) throw std::logic_error("step() after episode end");
    if (action_logits.size() != config_.n_assets) throw InputError("action dimension mismatch");

    StepResult res;
    WeightVector wv = action_to_weights(action_logits, config_.top_k, config_.tau);
    const auto& w = wv.weights;

    res.record.gross = kern::dot(returns_.row(cursor_).data(), w.data(), w.size());
    res.record.turnover = kern::l1_diff(w.data(), w_prev_.data(), w.size());
    res.record.active = static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](double x) { return x > 0.0; }));

    double net = res.record.gross - config_.tc * res.record.turnover -
                 config_.lambda_sparse * static_cast<double>(res.record.active) /
                     static_cast<double>(config_.n_assets);
    if (net < -0.999) {  // log(1+net) undefined at net <= -1
        net = -0.999;
        res.record.clamped = true;
    }
    res.record.net = net;
    res.record.reward = std::log1p(net);
    res.record.weights = w;
    res.reward = res.record.reward;

    w_prev_ = w;
    ++cursor_;
    res.done = done();
    if (!res.done) res.next = state_at_cursor();
    return res;
}

EpisodeResult run_episode(PortfolioEnv& env, const PolicyCallback& policy) {
    EpisodeResult out;
    EnvState state = env.reset();
    const std::size_t steps = env.steps_per_episode();
    const std::size_t n = env.config().n_assets;
    out.rollout.reserve(steps, env.state_dim(), n);
    out.weights_history = Matrix(steps, n);

    for (std::size_t t = 0; t < steps; ++t) {
        PolicyDecision d = policy(state);
        auto res = env.step(d.action);

        std::copy(state.v.begin(), state.v.end(), out.rollout.states.row(t).begin());
        std::copy(d.action.begin(), d.action.end(), out.rollout.actions.row(t).begin());
        out.rollout.log_probs.push_back(d.log_prob);
        out.rollout.values.push_back(d.value);
        out.rollout.rewards.push_back(res.reward);
        out.rollout.dones.push_back(res.done ? 1 : 0);
        std::copy(res.record.weights.begin(), res.record.weights.end(),
                  out.weights_history.row(t).begin());
        out.records.push_back(std::move(res.record));
        out.cumulative_reward += res.reward;
        state = std::move(res.next);
    }
    return out;
}

}  // namespace portopt
