#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "portopt/matrix.hpp"
#include "portopt/rollout.hpp"

namespace portopt {

struct EnvConfig {
    std::size_t window = 30;       // L, weeks of return history in the state
    double tc = 0.001;             // per-unit turnover cost
    double tau = 0.01;             // weight floor applied after the softmax
    double lambda_sparse = 0.001;  // active-asset penalty coefficient
    std::size_t top_k = 10;
    std::size_t n_assets = 0;

    void validate() const;
};

// Long-only sparse allocation on the simplex.
struct WeightVector {
    std::vector<double> weights;
};

// Flattened [vec(return window, row-major oldest first) ; w_prev ; scores].
struct EnvState {
    std::vector<double> v;
};

struct StepRecord {
    double gross = 0.0;     // r_t . w_t
    double turnover = 0.0;  // |w_t - w_{t-1}|_1
    std::size_t active = 0;
    double net = 0.0;
    double reward = 0.0;  // ln(1 + net)
    std::vector<double> weights;
    bool clamped = false;  // net hit the -0.999 floor before the log
};

// Top-K masked softmax with a weight floor and an argmax fallback; ties break
// toward the lower index. Total on finite inputs; output sums to 1.
WeightVector action_to_weights(std::span<const double> logits, std::size_t top_k, double tau);

EnvState build_state(const Matrix& window, std::span<const double> w_prev,
                     std::span<const double> scores);

// One pass over an immutable (returns, scores) range. The cursor starts at
// `window`; each step spends the return row at the cursor and advances.
class PortfolioEnv {
public:
    // `returns` and `scores` must have equal shape; scores row t is the
    // forecast for return row t (rows before `window` are never read).
    PortfolioEnv(Matrix returns, Matrix scores, EnvConfig config);

    EnvState reset();

    struct StepResult {
        EnvState next;  // state at the advanced cursor; empty when done
        double reward = 0.0;
        StepRecord record;
        bool done = false;
    };

    StepResult step(std::span<const double> action_logits);

    bool done() const { return cursor_ >= returns_.rows; }
    std::size_t cursor() const { return cursor_; }
    std::size_t state_dim() const {
        return config_.window * config_.n_assets + 2 * config_.n_assets;
    }
    std::size_t steps_per_episode() const { return returns_.rows - config_.window; }
    const EnvConfig& config() const { return config_; }
    const std::vector<double>& prev_weights() const { return w_prev_; }

private:
    EnvState state_at_cursor() const;

    Matrix returns_;
    Matrix scores_;
    EnvConfig config_;
    std::size_t cursor_ = 0;
    std::vector<double> w_prev_;
    bool started_ = false;
};

// What a policy returns for one state. log_prob/value may be zero for
// non-learned policies (baselines).
struct PolicyDecision {
    std::vector<double> action;
    double log_prob = 0.0;
    double value = 0.0;
};

using PolicyCallback = std::function<PolicyDecision(const EnvState&)>;

struct EpisodeResult {
    Rollout rollout;
    Matrix weights_history;  // steps x N
    std::vector<StepRecord> records;
    double cumulative_reward = 0.0;
};

// Resets the environment and iterates until done.
EpisodeResult run_episode(PortfolioEnv& env, const PolicyCallback& policy);

}  // namespace portopt
