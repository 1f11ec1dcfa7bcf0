#include "portopt/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "portopt/errors.hpp"
#include "portopt/kernels.hpp"
#include "portopt/optim.hpp"

namespace portopt {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL);
    return splitmix64(s);
}

// Per-step activations cached for backpropagation.
struct Trace {
    Matrix gi, gf, go, gg;  // gate activations, L x H
    Matrix c, tc, h;        // cell, tanh(cell), hidden, L x H
};

double forward_pass(const ForecasterParams& p, std::span<const double> window,
                    const std::vector<double>* mask, Trace* trace) {
    const std::size_t n_h = p.hidden;
    const std::size_t n_t = window.size();
    std::vector<double> h(n_h, 0.0), c(n_h, 0.0);
    std::vector<double> pre_i(n_h), pre_f(n_h), pre_o(n_h), pre_g(n_h);

    if (trace != nullptr) {
        trace->gi = Matrix(n_t, n_h);
        trace->gf = Matrix(n_t, n_h);
        trace->go = Matrix(n_t, n_h);
        trace->gg = Matrix(n_t, n_h);
        trace->c = Matrix(n_t, n_h);
        trace->tc = Matrix(n_t, n_h);
        trace->h = Matrix(n_t, n_h);
    }

    for (std::size_t t = 0; t < n_t; ++t) {
        const double x = window[t];
        if (!std::isfinite(x)) throw InputError("non-finite forecaster input");
        kern::matvec(p.u(kGateInput).data(), n_h, n_h, h.data(), pre_i.data());
        kern::matvec(p.u(kGateForget).data(), n_h, n_h, h.data(), pre_f.data());
        kern::matvec(p.u(kGateOutput).data(), n_h, n_h, h.data(), pre_o.data());
        kern::matvec(p.u(kGateCandidate).data(), n_h, n_h, h.data(), pre_g.data());
        const auto wi = p.w(kGateInput), wf = p.w(kGateForget), wo = p.w(kGateOutput), wg = p.w(kGateCandidate);
        const auto bi = p.b(kGateInput), bf = p.b(kGateForget), bo = p.b(kGateOutput), bg = p.b(kGateCandidate);
        for (std::size_t j = 0; j < n_h; ++j) {
            const double gi = sigmoid(pre_i[j] + wi[j] * x + bi[j]);
            const double gf = sigmoid(pre_f[j] + wf[j] * x + bf[j]);
            const double go = sigmoid(pre_o[j] + wo[j] * x + bo[j]);
            const double gg = std::tanh(pre_g[j] + wg[j] * x + bg[j]);
            c[j] = gf * c[j] + gi * gg;
            const double tc = std::tanh(c[j]);
            h[j] = go * tc;
            if (trace != nullptr) {
                trace->gi.at(t, j) = gi;
                trace->gf.at(t, j) = gf;
                trace->go.at(t, j) = go;
                trace->gg.at(t, j) = gg;
                trace->c.at(t, j) = c[j];
                trace->tc.at(t, j) = tc;
                trace->h.at(t, j) = h[j];
            }
        }
    }

    double pred = p.head_b();
    const auto head = p.head_w();
    if (mask != nullptr) {
        for (std::size_t j = 0; j < n_h; ++j) pred += head[j] * h[j] * (*mask)[j];
    } else {
        pred += kern::dot(head.data(), h.data(), n_h);
    }
    return pred;
}

// Accumulates gradients for one sample; dpred is the upstream loss derivative.
void backward_pass(const ForecasterParams& p, std::span<const double> window, const Trace& tr,
                   const std::vector<double>* mask, double dpred, ForecasterParams& grads) {
    const std::size_t n_h = p.hidden;
    const std::size_t n_t = window.size();

    std::vector<double> dh(n_h), dc(n_h, 0.0);
    std::vector<double> dpre_i(n_h), dpre_f(n_h), dpre_o(n_h), dpre_g(n_h);
    std::vector<double> h_prev(n_h), c_prev(n_h);

    // Head.
    const auto head = p.head_w();
    auto ghead = grads.head_w();
    for (std::size_t j = 0; j < n_h; ++j) {
        const double m = mask != nullptr ? (*mask)[j] : 1.0;
        ghead[j] += dpred * tr.h.at(n_t - 1, j) * m;
        dh[j] = dpred * head[j] * m;
    }
    grads.head_b() += dpred;

    for (std::size_t t = n_t; t-- > 0;) {
        const double x = window[t];
        if (t > 0) {
            for (std::size_t j = 0; j < n_h; ++j) {
                h_prev[j] = tr.h.at(t - 1, j);
                c_prev[j] = tr.c.at(t - 1, j);
            }
        } else {
            std::fill(h_prev.begin(), h_prev.end(), 0.0);
            std::fill(c_prev.begin(), c_prev.end(), 0.0);
        }
        for (std::size_t j = 0; j < n_h; ++j) {
            const double gi = tr.gi.at(t, j), gf = tr.gf.at(t, j), go = tr.go.at(t, j), gg = tr.gg.at(t, j);
            const double tc = tr.tc.at(t, j);
            const double d_out = dh[j] * tc;
            dpre_o[j] = d_out * go * (1.0 - go);
            const double dcell = dc[j] + dh[j] * go * (1.0 - tc * tc);
            dpre_i[j] = dcell * gg * gi * (1.0 - gi);
            dpre_g[j] = dcell * gi * (1.0 - gg * gg);
            dpre_f[j] = dcell * c_prev[j] * gf * (1.0 - gf);
            dc[j] = dcell * gf;  // flows to step t-1
        }
        auto acc_gate = [&](int gate, const std::vector<double>& dpre) {
            kern::axpy(x, dpre.data(), grads.w(gate).data(), n_h);
            kern::ger_acc(grads.u(gate).data(), n_h, n_h, dpre.data(), h_prev.data());
            kern::axpy(1.0, dpre.data(), grads.b(gate).data(), n_h);
        };
        acc_gate(kGateInput, dpre_i);
        acc_gate(kGateForget, dpre_f);
        acc_gate(kGateOutput, dpre_o);
        acc_gate(kGateCandidate, dpre_g);

        std::fill(dh.begin(), dh.end(), 0.0);
        kern::matvec_t_acc(p.u(kGateInput).data(), n_h, n_h, dpre_i.data(), dh.data());
        kern::matvec_t_acc(p.u(kGateForget).data(), n_h, n_h, dpre_f.data(), dh.data());
        kern::matvec_t_acc(p.u(kGateOutput).data(), n_h, n_h, dpre_o.data(), dh.data());
        kern::matvec_t_acc(p.u(kGateCandidate).data(), n_h, n_h, dpre_g.data(), dh.data());
    }
}

std::vector<double> dropout_mask(std::size_t n, double dropout, std::uint64_t seed) {
    std::vector<double> mask(n, 1.0);
    if (dropout <= 0.0) return mask;
    const double keep = 1.0 - dropout;
    Rng rng(seed);
    for (auto& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return mask;
}

}  // namespace

void ForecasterConfig::validate() const {
    if (lookback < 1) throw InputError("lookback must be >= 1");
    if (hidden < 1) throw InputError("hidden size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("dropout must lie in [0,1)");
    if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
    if (batch_size < 1 || max_epochs < 1) throw InputError("batch size and epochs must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw InputError("validation fraction must lie in (0,1)");
}

ForecasterParams ForecasterParams::zeros(std::size_t hidden) {
    ForecasterParams p;
    p.hidden = hidden;
    p.flat.assign(flat_size(hidden), 0.0);
    return p;
}

ForecasterParams ForecasterParams::init(std::size_t hidden, Rng& rng) {
    ForecasterParams p = zeros(hidden);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto& v : p.flat) v = rng.uniform(-bound, bound);
    for (auto& b : p.b(kGateForget)) b = 1.0;
    p.head_b() = 0.0;
    return p;
}

LstmOutput lstm_forward(const ForecasterParams& params, std::span<const double> window,
                        ForwardMode mode, double dropout, std::uint64_t seed) {
    if (window.empty()) throw InputError("empty forecaster window");
    Trace trace;
    std::vector<double> mask;
    const std::vector<double>* mask_ptr = nullptr;
    if (mode == ForwardMode::train && dropout > 0.0) {
        mask = dropout_mask(params.hidden, dropout, seed);
        mask_ptr = &mask;
    }
    LstmOutput out;
    out.prediction = forward_pass(params, window, mask_ptr, &trace);
    out.hidden_trace = std::move(trace.h);
    return out;
}

LossAndGrads loss_and_gradients(const ForecasterParams& params, std::span<const TrainingSample> batch,
                                const ForecasterConfig& config, std::uint64_t seed) {
    if (batch.empty()) throw InputError("empty training batch");
    LossAndGrads out;
    out.grads.assign(params.flat.size(), 0.0);
    ForecasterParams grads = ForecasterParams::zeros(params.hidden);

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    Trace trace;
    double mse = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto& sample = batch[s];
        std::vector<double> mask;
        const std::vector<double>* mask_ptr = nullptr;
        if (config.dropout > 0.0) {
            mask = dropout_mask(params.hidden, config.dropout, mix_seed(seed, s, 0x5eed));
            mask_ptr = &mask;
        }
        const double pred = forward_pass(params, sample.window, mask_ptr, &trace);
        const double err = pred - sample.target;
        mse += err * err * inv_b;
        backward_pass(params, sample.window, trace, mask_ptr, 2.0 * err * inv_b, grads);
    }

    double decay_term = 0.0;
    if (config.weight_decay > 0.0) {
        const std::size_t nw = params.weight_count();
        decay_term = config.weight_decay * kern::sum_sq(params.flat.data(), nw);
        kern::axpy(2.0 * config.weight_decay, params.flat.data(), grads.flat.data(), nw);
    }

    out.loss = mse + decay_term;
    if (!std::isfinite(out.loss)) throw DivergenceError("non-finite forecaster loss");
    out.grads = std::move(grads.flat);
    return out;
}

bool EarlyStopper::observe(double val_loss) {
    ++seen_;
    if (best_epoch_ == 0 || val_loss < best_) {
        best_ = val_loss;
        best_epoch_ = seen_;
        since_best_ = 0;
        improved_ = true;
        return false;
    }
    improved_ = false;
    ++since_best_;
    return since_best_ >= patience_;
}

TrainedForecaster train_forecaster(std::span<const double> series, const ForecasterConfig& config) {
    config.validate();
    const std::size_t len = series.size();
    if (len < config.lookback + 2)
        throw InputError("series too short: " + std::to_string(len) + " rows for lookback " +
                         std::to_string(config.lookback));
    const std::size_t n_windows = len - config.lookback;

    std::vector<TrainingSample> samples(n_windows);
    for (std::size_t i = 0; i < n_windows; ++i) {
        samples[i].window.assign(series.begin() + static_cast<std::ptrdiff_t>(i),
                                 series.begin() + static_cast<std::ptrdiff_t>(i + config.lookback));
        samples[i].target = series[i + config.lookback];
    }

    std::size_t val_count = static_cast<std::size_t>(
        std::floor(config.validation_fraction * static_cast<double>(n_windows)));
    val_count = std::max<std::size_t>(1, val_count);
    if (val_count >= n_windows) throw InputError("series too short to hold out validation windows");
    const std::size_t train_count = n_windows - val_count;

    Rng rng(config.seed);
    Rng init_rng = rng.fork(1);
    ForecasterParams params = ForecasterParams::init(config.hidden, init_rng);
    ForecasterParams best = params;

    Adam optimizer(config.learning_rate);
    EarlyStopper stopper(config.patience);
    TrainingHistory history;

    std::vector<std::size_t> order(train_count);
    std::iota(order.begin(), order.end(), 0);

    const auto val_mse = [&](const ForecasterParams& p) {
        double acc = 0.0;
        for (std::size_t i = train_count; i < n_windows; ++i) {
            const double pred = forward_pass(p, samples[i].window, nullptr, nullptr);
            const double err = pred - samples[i].target;
            acc += err * err;
        }
        return acc / static_cast<double>(val_count);
    };

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng shuffle_rng = rng.fork(1000 + epoch);
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        std::vector<TrainingSample> batch;
        for (std::size_t start = 0; start < train_count; start += config.batch_size) {
            const std::size_t stop = std::min(start + config.batch_size, train_count);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) batch.push_back(samples[order[k]]);
            const auto lg =
                loss_and_gradients(params, batch, config, mix_seed(config.seed, epoch, n_batches));
            optimizer.step(params.flat, lg.grads);
            epoch_loss += lg.loss;
            ++n_batches;
        }
        history.train_loss.push_back(epoch_loss / static_cast<double>(n_batches));
        const double vl = val_mse(params);
        history.val_loss.push_back(vl);
        const bool stop = stopper.observe(vl);
        if (stopper.improved()) best = params;
        if (stop) break;
    }
    history.best_epoch = stopper.best_epoch();

    TrainedForecaster out;
    out.params = std::move(best);
    out.history = std::move(history);
    return out;
}

ForecastMatrix predict_scores(const std::vector<ForecasterParams>& params_per_asset,
                              const ReturnMatrix& returns, const Scaler& scaler, IndexRange range,
                              std::size_t lookback) {
    const std::size_t n = returns.returns.cols;
    if (params_per_asset.size() != n) throw InputError("one forecaster per asset required");
    if (scaler.mu.size() != n) throw InputError("scaler dimension mismatch");
    if (range.end > returns.returns.rows) throw InputError("prediction range out of bounds");

    ForecastMatrix fm;
    fm.timestamps.assign(returns.timestamps.begin() + static_cast<std::ptrdiff_t>(range.begin),
                         returns.timestamps.begin() + static_cast<std::ptrdiff_t>(range.end));
    fm.scores = Matrix(range.size(), n);

    std::vector<double> window(lookback);
    for (std::size_t t = range.begin; t < range.end; ++t) {
        if (t < lookback) continue;  // no full window: scores stay zero
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t k = 0; k < lookback; ++k)
                window[k] = (returns.returns.at(t - lookback + k, a) - scaler.mu[a]) / scaler.sigma[a];
            const double z = forward_pass(params_per_asset[a], window, nullptr, nullptr);
            fm.scores.at(t - range.begin, a) = scaler.mu[a] + scaler.sigma[a] * z;
        }
    }
    return fm;
}

ForecastMatrix walk_forward_predict(const std::vector<ForecasterParams>& params_per_asset,
                                    const ReturnMatrix& returns, const Scaler& scaler,
                                    const SplitPlan& split, std::size_t lookback) {
    if (split.test.size() < 1) throw InputError("empty test range");
    if (split.test.begin < lookback)
        throw InputError("insufficient history before the first test index: need " +
                         std::to_string(lookback) + " rows, have " + std::to_string(split.test.begin));
    return predict_scores(params_per_asset, returns, scaler, split.test, lookback);
}

namespace {

nlohmann::json config_to_json(const ForecasterConfig& c) {
    return {
        {"lookback", c.lookback},
        {"hidden", c.hidden},
        {"dropout", c.dropout},
        {"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},
        {"max_epochs", c.max_epochs},
        {"weight_decay", c.weight_decay},
        {"patience", c.patience},
        {"validation_fraction", c.validation_fraction},
        {"seed", c.seed},
    };
}

ForecasterConfig config_from_json(const nlohmann::json& j) {
    ForecasterConfig c;
    c.lookback = j.at("lookback").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.patience = j.at("patience").get<std::size_t>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

void save_forecaster(const std::filesystem::path& path, const std::string& asset_id,
                     const ForecasterConfig& config, const TrainedForecaster& trained) {
    nlohmann::json j = {
        {"format", "portopt-forecaster"},
        {"version", 1},
        {"asset", asset_id},
        {"config", config_to_json(config)},
        {"params", {{"hidden", trained.params.hidden}, {"flat", trained.params.flat}}},
        {"history",
         {{"train_loss", trained.history.train_loss},
          {"val_loss", trained.history.val_loss},
          {"best_epoch", trained.history.best_epoch}}},
    };
    std::ofstream out(path);
    if (!out) throw InputError("cannot write checkpoint: " + path.string());
    out << j.dump(2) << '\n';
}

ForecasterCheckpoint load_forecaster(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PrereqError("missing forecaster checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("checkpoint parse error in " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "portopt-forecaster" || j.value("version", 0) != 1)
        throw InputError("unrecognized checkpoint format: " + path.string());
    ForecasterCheckpoint cp;
    cp.asset_id = j.at("asset").get<std::string>();
    cp.config = config_from_json(j.at("config"));
    cp.trained.params.hidden = j.at("params").at("hidden").get<std::size_t>();
    cp.trained.params.flat = j.at("params").at("flat").get<std::vector<double>>();
    if (cp.trained.params.flat.size() != ForecasterParams::flat_size(cp.trained.params.hidden))
        throw InputError("checkpoint parameter size mismatch: " + path.string());
    for (double v : cp.trained.params.flat)
        if (!std::isfinite(v)) throw InputError("non-finite parameter in checkpoint: " + path.string());
    cp.trained.history.train_loss = j.at("history").at("train_loss").get<std::vector<double>>();
    cp.trained.history.val_loss = j.at("history").at("val_loss").get<std::vector<double>>();
    cp.trained.history.best_epoch = j.at("history").at("best_epoch").get<std::size_t>();
    return cp;
}

}  // namespace portopt
