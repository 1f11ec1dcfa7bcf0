#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "portopt/data.hpp"
#include "portopt/matrix.hpp"
#include "portopt/rng.hpp"

namespace portopt {

struct ForecasterConfig {
    std::size_t lookback = 30;
    std::size_t hidden = 64;
    double dropout = 0.2;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 40;
    double weight_decay = 1e-4;
    std::size_t patience = 5;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Univariate gated recurrent forecaster (input size 1, hidden size H) with a
// linear head. Parameters live in one flat vector; weights come first so the
// decay term can treat [0, weight_count) uniformly, then all biases.
//
// Layout: w_i w_f w_o w_g (H each) | u_i u_f u_o u_g (HxH each) | head_w (H)
//         | b_i b_f b_o b_g (H each) | head_b (1)
struct ForecasterParams {
    std::size_t hidden = 0;
    std::vector<double> flat;

    static ForecasterParams zeros(std::size_t hidden);
    // Uniform +-1/sqrt(H), forget-gate bias 1.0.
    static ForecasterParams init(std::size_t hidden, Rng& rng);

    std::size_t size() const { return flat.size(); }
    // Parameters subject to weight decay occupy [0, weight_count()).
    std::size_t weight_count() const { return 4 * hidden + 4 * hidden * hidden + hidden; }

    std::span<double> w(int gate) { return {flat.data() + static_cast<std::size_t>(gate) * hidden, hidden}; }
    std::span<double> u(int gate) {
        return {flat.data() + 4 * hidden + static_cast<std::size_t>(gate) * hidden * hidden, hidden * hidden};
    }
    std::span<double> head_w() { return {flat.data() + 4 * hidden + 4 * hidden * hidden, hidden}; }
    std::span<double> b(int gate) {
        return {flat.data() + weight_count() + static_cast<std::size_t>(gate) * hidden, hidden};
    }
    double& head_b() { return flat[weight_count() + 4 * hidden]; }

    std::span<const double> w(int gate) const { return const_cast<ForecasterParams*>(this)->w(gate); }
    std::span<const double> u(int gate) const { return const_cast<ForecasterParams*>(this)->u(gate); }
    std::span<const double> head_w() const { return const_cast<ForecasterParams*>(this)->head_w(); }
    std::span<const double> b(int gate) const { return const_cast<ForecasterParams*>(this)->b(gate); }
    double head_b() const { return flat[weight_count() + 4 * hidden]; }

    static std::size_t flat_size(std::size_t hidden) { return 4 * hidden * hidden + 9 * hidden + 1; }
};

enum Gate { kGateInput = 0, kGateForget = 1, kGateOutput = 2, kGateCandidate = 3 };

enum class ForwardMode { train, eval };

struct LstmOutput {
    double prediction = 0.0;
    Matrix hidden_trace;  // L x H, hidden state after each step
};

// Runs the recurrence over `window` from zero initial state. In train mode an
// inverted-dropout mask (Bernoulli keep, scaled by 1/(1-p)) derived from `seed`
// is applied to the final hidden state before the head; eval mode is
// deterministic and mask-free.
LstmOutput lstm_forward(const ForecasterParams& params, std::span<const double> window,
                        ForwardMode mode, double dropout, std::uint64_t seed);

struct TrainingSample {
    std::vector<double> window;
    double target = 0.0;
};

struct LossAndGrads {
    double loss = 0.0;
    std::vector<double> grads;  // same layout as ForecasterParams::flat
};

// Mean squared error over the batch plus weight_decay * sum of squared weights
// (biases excluded); exact gradients by backpropagation through time.
// `seed` fixes the per-sample dropout masks so the result is a deterministic
// function of (params, batch, config, seed).
LossAndGrads loss_and_gradients(const ForecasterParams& params, std::span<const TrainingSample> batch,
                                const ForecasterConfig& config, std::uint64_t seed);

struct TrainingHistory {
    std::vector<double> train_loss;  // per epoch, mean of minibatch losses (incl. decay term)
    std::vector<double> val_loss;    // per epoch, eval-mode MSE on the held-out tail
    std::size_t best_epoch = 0;      // 1-based epoch whose params were returned
};

// Validation-loss early stopping with patience; tracks best epoch.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}
    // Returns true when training should stop after this observation.
    bool observe(double val_loss);
    std::size_t best_epoch() const { return best_epoch_; }
    bool improved() const { return improved_; }

private:
    std::size_t patience_;
    double best_ = 0.0;
    std::size_t best_epoch_ = 0;
    std::size_t seen_ = 0;
    std::size_t since_best_ = 0;
    bool improved_ = false;
};

struct TrainedForecaster {
    ForecasterParams params;
    TrainingHistory history;
};

// Sliding lookback-L windows with next-value targets over one scaled series;
// chronological tail held out for validation; adaptive-moment updates with
// early stopping. Returns the best-validation-epoch parameters.
TrainedForecaster train_forecaster(std::span<const double> series, const ForecasterConfig& config);

// Walk-forward one-step-ahead predictions, de-normalized to return units.
struct ForecastMatrix {
    std::vector<Date> timestamps;
    Matrix scores;
};

// Prediction for each row t in `range`: scale returns[t-L..t-1] with `scaler`,
// run eval-mode forward, de-normalize. Rows with fewer than L prior
// observations get zero scores (only relevant for in-sample training signals).
ForecastMatrix predict_scores(const std::vector<ForecasterParams>& params_per_asset,
                              const ReturnMatrix& returns, const Scaler& scaler, IndexRange range,
                              std::size_t lookback);

// Strict test-horizon variant: throws if any test index lacks L prior rows.
ForecastMatrix walk_forward_predict(const std::vector<ForecasterParams>& params_per_asset,
                                    const ReturnMatrix& returns, const Scaler& scaler,
                                    const SplitPlan& split, std::size_t lookback);

// Versioned self-describing checkpoint (JSON).
void save_forecaster(const std::filesystem::path& path, const std::string& asset_id,
                     const ForecasterConfig& config, const TrainedForecaster& trained);

struct ForecasterCheckpoint {
    std::string asset_id;
    ForecasterConfig config;
    TrainedForecaster trained;
};

ForecasterCheckpoint load_forecaster(const std::filesystem::path& path);

}  // namespace portopt
