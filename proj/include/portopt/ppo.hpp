#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "portopt/env.hpp"
#include "portopt/optim.hpp"
#include "portopt/rng.hpp"
#include "portopt/rollout.hpp"

namespace portopt {

struct PpoConfig {
    double learning_rate = 1e-4;
    std::size_t n_steps = 512;
    std::size_t minibatch = 128;
    double clip = 0.2;
    double ent_coef = 0.01;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    std::size_t update_epochs = 10;  // E_PPO
    std::size_t total_timesteps = 200000;
    std::size_t hidden = 64;  // two hidden layers this wide, tanh
    double obs_clip = 10.0;
    bool normalize_reward = false;  // off by default; only obs normalization is standard here
    double reward_clip = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct MlpDims {
    std::size_t in = 0;
    std::size_t hidden = 0;
    std::size_t out = 0;
    std::size_t size() const { return hidden * in + hidden + hidden * hidden + hidden + out * hidden + out; }
};

struct MlpTrace {
    std::vector<double> a1;  // tanh activations, layer 1
    std::vector<double> a2;  // tanh activations, layer 2
};

// y = W3 tanh(W2 tanh(W1 x + b1) + b2) + b3 over a flat parameter block.
void mlp_forward(const double* params, const MlpDims& dims, const double* x, double* out,
                 MlpTrace* trace);
// Accumulates parameter gradients for upstream derivative `dout`.
void mlp_backward(const double* params, const MlpDims& dims, const double* x, const MlpTrace& trace,
                  const double* dout, double* grad_params);

// Actor-critic parameters in one flat vector: [actor MLP | critic MLP | log_std].
// log_std is state-independent and read through a [-20, 2] clamp.
struct PolicyParams {
    std::size_t state_dim = 0;
    std::size_t hidden = 0;
    std::size_t n_assets = 0;
    std::vector<double> flat;

    static PolicyParams zeros(std::size_t state_dim, std::size_t hidden, std::size_t n_assets);
    // Uniform +-1/sqrt(fan_in) per layer; log_std starts at 0.
    static PolicyParams init(std::size_t state_dim, std::size_t hidden, std::size_t n_assets, Rng& rng);

    MlpDims actor_dims() const { return {state_dim, hidden, n_assets}; }
    MlpDims critic_dims() const { return {state_dim, hidden, 1}; }
    std::size_t actor_offset() const { return 0; }
    std::size_t critic_offset() const { return actor_dims().size(); }
    std::size_t log_std_offset() const { return critic_offset() + critic_dims().size(); }
    std::size_t size() const { return log_std_offset() + n_assets; }

    const double* actor() const { return flat.data(); }
    const double* critic() const { return flat.data() + critic_offset(); }
    std::span<const double> log_std_raw() const { return {flat.data() + log_std_offset(), n_assets}; }
    std::span<double> log_std_raw() { return {flat.data() + log_std_offset(), n_assets}; }
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct PolicyEval {
    std::vector<double> mean;
    std::vector<double> log_std;  // clamped
    double value = 0.0;
};

PolicyEval policy_eval(const PolicyParams& params, std::span<const double> state);

struct ActionSample {
    std::vector<double> action;
    double log_prob = 0.0;
};

// Diagonal Gaussian draw (or the mean when deterministic); log_prob is the
// exact density log-value of the returned action.
ActionSample sample_action(std::span<const double> mean, std::span<const double> log_std,
                           bool deterministic, Rng& rng);

double gaussian_log_prob(std::span<const double> action, std::span<const double> mean,
                         std::span<const double> log_std);
double gaussian_entropy(std::span<const double> log_std);

// delta_t = r_t + gamma V_{t+1} - V_t, backward recursion with factor
// gamma*lambda; value_targets = advantages + values. One contiguous segment;
// terminal_value bootstraps past the last step (0 when the episode truly ends).
void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 double terminal_value, double gamma, double lambda, std::span<double> advantages,
                 std::span<double> value_targets);

// Running observation statistics (parallel mean/variance update) with output
// clipping. Updates are frozen during evaluation.
struct ObsNormalizer {
    std::vector<double> mean;
    std::vector<double> var;
    double count = 0.0;
    double clip = 10.0;

    ObsNormalizer() = default;
    ObsNormalizer(std::size_t dim, double clip_bound)
        : mean(dim, 0.0), var(dim, 0.0), clip(clip_bound) {}

    std::vector<double> normalize(std::span<const double> obs, bool update);
};

// Scales rewards by the running standard deviation of the discounted return,
// clipped. Used during training only, and only when enabled in the config.
struct RewardNormalizer {
    double gamma = 0.99;
    double clip = 10.0;
    double running_return = 0.0;
    double mean = 0.0;
    double var = 0.0;
    double count = 0.0;

    double normalize(double reward, bool done);
};

struct PpoBatchStats {
    double total_loss = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
};

// Clipped-surrogate loss over selected rollout rows. `advantages` are the
// (already normalized) per-step advantages; value targets come from the
// rollout. When `grad` is non-null the exact parameter gradient of total_loss
// is accumulated into it. Exposed as a building block for gradient checks.
PpoBatchStats ppo_batch_loss(const PolicyParams& params, const Rollout& rollout,
                             std::span<const double> advantages,
                             std::span<const std::size_t> indices, const PpoConfig& config,
                             std::vector<double>* grad);

// min(ratio*adv, clip(ratio)*adv) for one sample.
double clipped_objective(double ratio, double advantage, double clip);

struct PpoUpdateDiagnostics {
    std::vector<double> policy_loss;  // per epoch
    std::vector<double> value_loss;
    std::vector<double> entropy;
    std::vector<double> clip_fraction;
};

// Normalizes advantages once over the rollout, then runs update_epochs of
// shuffled minibatch steps with gradient-norm capping.
PpoUpdateDiagnostics ppo_update(PolicyParams& params, Adam& optimizer, const Rollout& rollout,
                                const PpoConfig& config, Rng& rng);

struct CurveRow {
    std::size_t update = 0;
    double mean_reward = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
};

struct TrainedPolicy {
    PolicyParams params;
    ObsNormalizer normalizer;
    std::vector<CurveRow> curves;
    std::size_t top_k = 0;
    std::string variant;  // "hybrid" or "policy-only"
    EnvConfig env_config;
};

using EnvFactory = std::function<PortfolioEnv(std::size_t top_k)>;

// Trains one policy per K. Episodes cycle over the environment's data range
// until the timestep budget is spent.
std::map<std::size_t, TrainedPolicy> train_ppo(const EnvFactory& factory, const PpoConfig& config,
                                               std::span<const std::size_t> k_values,
                                               const std::string& variant = "hybrid");

void save_policy(const std::filesystem::path& path, const TrainedPolicy& policy,
                 const PpoConfig& config);

struct PolicyCheckpoint {
    TrainedPolicy policy;
    PpoConfig config;
};

PolicyCheckpoint load_policy(const std::filesystem::path& path);

}  // namespace portopt
