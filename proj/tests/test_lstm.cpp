#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "portopt/errors.hpp"
#include "portopt/lstm.hpp"
#include "portopt/rng.hpp"

using namespace portopt;

namespace {

std::vector<TrainingSample> random_batch(std::size_t count, std::size_t lookback, Rng& rng) {
    std::vector<TrainingSample> batch(count);
    for (auto& s : batch) {
        s.window.resize(lookback);
        for (auto& x : s.window) x = rng.uniform(-1.5, 1.5);
        s.target = rng.uniform(-1.5, 1.5);
    }
    return batch;
}

ForecasterParams random_params(std::size_t hidden, Rng& rng) {
    ForecasterParams p = ForecasterParams::zeros(hidden);
    for (auto& v : p.flat) v = rng.uniform(-0.6, 0.6);
    return p;
}

// Central finite differences of the full loss (incl. decay and dropout masks).
double fd_grad(const ForecasterParams& params, std::span<const TrainingSample> batch,
               const ForecasterConfig& cfg, std::uint64_t seed, std::size_t i, double h) {
    ForecasterParams p = params;
    p.flat[i] += h;
    const double up = loss_and_gradients(p, batch, cfg, seed).loss;
    p.flat[i] -= 2.0 * h;
    const double dn = loss_and_gradients(p, batch, cfg, seed).loss;
    return (up - dn) / (2.0 * h);
}

}  // namespace

namespace {

// Naive loop-based reference recurrence, independent of the kernel-backed
// implementation: each gate recomputed from scratch per the standard
// input/forget/output/candidate equations.
double reference_forward(const ForecasterParams& p, std::span<const double> window) {
    const std::size_t n_h = p.hidden;
    std::vector<double> h(n_h, 0.0), c(n_h, 0.0);
    const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (double x : window) {
        std::vector<double> h_new(n_h), c_new(n_h);
        for (std::size_t j = 0; j < n_h; ++j) {
            double ai = p.w(kGateInput)[j] * x + p.b(kGateInput)[j];
            double af = p.w(kGateForget)[j] * x + p.b(kGateForget)[j];
            double ao = p.w(kGateOutput)[j] * x + p.b(kGateOutput)[j];
            double ag = p.w(kGateCandidate)[j] * x + p.b(kGateCandidate)[j];
            for (std::size_t k = 0; k < n_h; ++k) {
                ai += p.u(kGateInput)[j * n_h + k] * h[k];
                af += p.u(kGateForget)[j * n_h + k] * h[k];
                ao += p.u(kGateOutput)[j * n_h + k] * h[k];
                ag += p.u(kGateCandidate)[j * n_h + k] * h[k];
            }
            c_new[j] = sig(af) * c[j] + sig(ai) * std::tanh(ag);
            h_new[j] = sig(ao) * std::tanh(c_new[j]);
        }
        h = h_new;
        c = c_new;
    }
    double pred = p.head_b();
    for (std::size_t j = 0; j < n_h; ++j) pred += p.head_w()[j] * h[j];
    return pred;
}

}  // namespace

TEST_CASE("forward: kernel-backed recurrence matches a naive reference") {
    Rng rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t hidden = 2 + rng.next_below(6);
        const ForecasterParams p = random_params(hidden, rng);
        std::vector<double> window(2 + rng.next_below(8));
        for (auto& x : window) x = rng.uniform(-1.5, 1.5);
        const double got = lstm_forward(p, window, ForwardMode::eval, 0.0, 0).prediction;
        const double expected = reference_forward(p, window);
        CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("forward: zero parameters leave the hidden state at zero") {
    const ForecasterParams p = ForecasterParams::zeros(5);
    const std::vector<double> window = {0.3, -0.2, 0.9, 0.1};
    const LstmOutput out = lstm_forward(p, window, ForwardMode::eval, 0.0, 0);
    CHECK(out.prediction == 0.0);  // head bias
    REQUIRE(out.hidden_trace.rows == 4);
    REQUIRE(out.hidden_trace.cols == 5);
    for (double h : out.hidden_trace.data) CHECK(h == 0.0);

    ForecasterParams biased = p;
    biased.head_b() = 0.7;
    CHECK(lstm_forward(biased, window, ForwardMode::eval, 0.0, 0).prediction == 0.7);
}

TEST_CASE("forward: hidden trace has lookback-by-hidden shape") {
    Rng rng(1);
    const ForecasterParams p = random_params(64, rng);
    std::vector<double> window(30);
    for (auto& x : window) x = rng.normal();
    const LstmOutput out = lstm_forward(p, window, ForwardMode::eval, 0.2, 9);
    CHECK(out.hidden_trace.rows == 30);
    CHECK(out.hidden_trace.cols == 64);
}

TEST_CASE("forward: eval mode is bit-deterministic; train dropout follows the seed") {
    Rng rng(2);
    const ForecasterParams p = random_params(8, rng);
    std::vector<double> window(6);
    for (auto& x : window) x = rng.normal();

    const double a = lstm_forward(p, window, ForwardMode::eval, 0.5, 1).prediction;
    const double b = lstm_forward(p, window, ForwardMode::eval, 0.5, 2).prediction;
    CHECK(a == b);  // dropout off in eval, seed irrelevant

    const double t1 = lstm_forward(p, window, ForwardMode::train, 0.5, 77).prediction;
    const double t2 = lstm_forward(p, window, ForwardMode::train, 0.5, 77).prediction;
    CHECK(t1 == t2);  // same mask
}

TEST_CASE("loss: zero params with targets at the head bias give zero loss") {
    const ForecasterParams p = ForecasterParams::zeros(4);
    ForecasterConfig cfg;
    cfg.hidden = 4;
    cfg.lookback = 3;
    cfg.dropout = 0.0;
    cfg.weight_decay = 1e-4;
    std::vector<TrainingSample> batch(2);
    for (auto& s : batch) {
        s.window = {0.1, -0.5, 0.7};
        s.target = 0.0;  // equals head bias
    }
    const auto lg = loss_and_gradients(p, batch, cfg, 0);
    CHECK(lg.loss == 0.0);  // decay term is zero at zero params
}

TEST_CASE("loss: duplicating every batch element changes nothing") {
    Rng rng(3);
    const ForecasterParams p = random_params(5, rng);
    ForecasterConfig cfg;
    cfg.hidden = 5;
    cfg.lookback = 4;
    cfg.dropout = 0.0;
    cfg.weight_decay = 1e-3;
    auto batch = random_batch(3, 4, rng);
    auto doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());

    const auto a = loss_and_gradients(p, batch, cfg, 0);
    const auto b = loss_and_gradients(p, doubled, cfg, 0);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-13));
    for (std::size_t i = 0; i < a.grads.size(); ++i)
        CHECK(a.grads[i] == doctest::Approx(b.grads[i]).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences (tiny net)") {
    Rng rng(4);
    ForecasterConfig cfg;
    cfg.hidden = 3;
    cfg.lookback = 4;
    cfg.dropout = 0.0;
    cfg.weight_decay = 1e-4;
    const ForecasterParams p = random_params(3, rng);
    const auto batch = random_batch(2, 4, rng);
    const auto lg = loss_and_gradients(p, batch, cfg, 0);

    for (std::size_t i = 0; i < p.flat.size(); ++i) {
        const double fd = fd_grad(p, batch, cfg, 0, i, 1e-5);
        const double scale = std::max({std::fabs(fd), std::fabs(lg.grads[i]), 1e-8});
        CHECK(std::fabs(lg.grads[i] - fd) / scale < 1e-4);
    }
}

TEST_CASE("gradients match finite differences with dropout active") {
    Rng rng(5);
    ForecasterConfig cfg;
    cfg.hidden = 4;
    cfg.lookback = 3;
    cfg.dropout = 0.5;
    cfg.weight_decay = 0.0;
    const ForecasterParams p = random_params(4, rng);
    const auto batch = random_batch(3, 3, rng);
    const auto lg = loss_and_gradients(p, batch, cfg, 42);
    for (std::size_t i = 0; i < p.flat.size(); ++i) {
        const double fd = fd_grad(p, batch, cfg, 42, i, 1e-5);
        const double scale = std::max({std::fabs(fd), std::fabs(lg.grads[i]), 1e-8});
        CHECK(std::fabs(lg.grads[i] - fd) / scale < 1e-4);
    }
}

TEST_CASE("no look-ahead: prediction for index t ignores later values") {
    Rng rng(6);
    const ForecasterParams p = random_params(6, rng);
    std::vector<double> series(40);
    for (auto& x : series) x = rng.normal();

    const std::size_t lookback = 8;
    const std::size_t t = 20;
    const std::vector<double> window(series.begin() + (t - lookback), series.begin() + t);
    const double before = lstm_forward(p, window, ForwardMode::eval, 0.0, 0).prediction;

    for (std::size_t i = t; i < series.size(); ++i) series[i] += rng.uniform(0.5, 2.0);
    const std::vector<double> window2(series.begin() + (t - lookback), series.begin() + t);
    const double after = lstm_forward(p, window2, ForwardMode::eval, 0.0, 0).prediction;
    CHECK(before == after);
}

TEST_CASE("early stopper: halts after `patience` epochs without improvement") {
    EarlyStopper stopper(2);
    CHECK_FALSE(stopper.observe(1.0));
    CHECK_FALSE(stopper.observe(0.8));
    CHECK_FALSE(stopper.observe(0.7));   // best epoch 3
    CHECK_FALSE(stopper.observe(0.75));  // 1 epoch since best
    CHECK(stopper.observe(0.8));         // 2 epochs since best: stop at epoch 5
    CHECK(stopper.best_epoch() == 3);
}

TEST_CASE("training: a pre-scaled zero series converges within 5 epochs") {
    ForecasterConfig cfg;
    cfg.lookback = 6;
    cfg.hidden = 4;
    cfg.dropout = 0.0;
    cfg.max_epochs = 5;
    cfg.batch_size = 2;
    cfg.weight_decay = 0.0;
    cfg.learning_rate = 1e-2;
    cfg.seed = 9;
    cfg.patience = 5;
    const std::vector<double> series(120, 0.0);
    const TrainedForecaster tf = train_forecaster(series, cfg);
    CHECK(tf.history.train_loss.back() < 1e-6);
}

TEST_CASE("training: same seed gives identical histories") {
    Rng rng(8);
    std::vector<double> series(90);
    for (auto& x : series) x = rng.normal();
    ForecasterConfig cfg;
    cfg.lookback = 5;
    cfg.hidden = 6;
    cfg.max_epochs = 6;
    cfg.batch_size = 8;
    cfg.seed = 1234;
    const TrainedForecaster a = train_forecaster(series, cfg);
    const TrainedForecaster b = train_forecaster(series, cfg);
    REQUIRE(a.history.train_loss.size() == b.history.train_loss.size());
    for (std::size_t i = 0; i < a.history.train_loss.size(); ++i) {
        CHECK(a.history.train_loss[i] == b.history.train_loss[i]);
        CHECK(a.history.val_loss[i] == b.history.val_loss[i]);
    }
    CHECK(a.params.flat == b.params.flat);
    CHECK_THROWS_AS(train_forecaster(std::vector<double>(4, 0.0), cfg), InputError);
}

TEST_CASE("capacity: noiseless sinusoid beats last-value-carried-forward 10x") {
    const std::size_t len = 240;
    std::vector<double> series(len);
    for (std::size_t i = 0; i < len; ++i)
        series[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 16.0);

    ForecasterConfig cfg;
    cfg.lookback = 16;
    cfg.hidden = 16;
    cfg.dropout = 0.0;
    cfg.weight_decay = 0.0;
    cfg.learning_rate = 5e-3;
    cfg.batch_size = 32;
    cfg.max_epochs = 80;
    cfg.patience = 80;
    cfg.seed = 21;
    const TrainedForecaster tf = train_forecaster(series, cfg);

    double mse_model = 0.0, mse_lvcf = 0.0;
    std::size_t count = 0;
    for (std::size_t t = cfg.lookback; t < len; ++t) {
        const std::vector<double> window(series.begin() + (t - cfg.lookback), series.begin() + t);
        const double pred = lstm_forward(tf.params, window, ForwardMode::eval, 0.0, 0).prediction;
        mse_model += (pred - series[t]) * (pred - series[t]);
        mse_lvcf += (series[t - 1] - series[t]) * (series[t - 1] - series[t]);
        ++count;
    }
    mse_model /= static_cast<double>(count);
    mse_lvcf /= static_cast<double>(count);
    CHECK(mse_model * 10.0 < mse_lvcf);
}

TEST_CASE("walk-forward: shape, window shift, and zero-parameter reduction") {
    Rng rng(10);
    ReturnMatrix rm;
    rm.returns = Matrix(50, 2);
    for (auto& v : rm.returns.data) v = 0.01 * rng.normal() + 0.002;
    for (std::size_t i = 0; i < 50; ++i) rm.timestamps.push_back(Date{static_cast<std::int64_t>(7 * i)});

    const SplitPlan split = chronological_split(50, 0.7);  // train 35, test 15
    const Scaler scaler = fit_scaler(slice_rows(rm, split.train));
    const std::size_t lookback = 6;

    std::vector<ForecasterParams> params;
    params.push_back(random_params(5, rng));
    params.push_back(ForecasterParams::zeros(5));

    const ForecastMatrix fm = walk_forward_predict(params, rm, scaler, split, lookback);
    CHECK(fm.scores.rows == split.test.size());
    CHECK(fm.scores.cols == 2);
    CHECK(fm.timestamps.front() == rm.timestamps[split.test.begin]);

    // Zero net collapses to the de-normalized head bias: mu.
    for (std::size_t t = 0; t < fm.scores.rows; ++t)
        CHECK(fm.scores.at(t, 1) == doctest::Approx(scaler.mu[1]).epsilon(1e-15));

    // Shifting the test start by one week shifts each prediction's window by one row:
    // prediction at shifted index t equals the original at t+1.
    SplitPlan shifted = split;
    shifted.test.begin += 1;
    const ForecastMatrix fm2 = predict_scores(params, rm, scaler, shifted.test, lookback);
    for (std::size_t t = 0; t + 1 < fm.scores.rows; ++t)
        CHECK(fm2.scores.at(t, 0) == fm.scores.at(t + 1, 0));

    SplitPlan bad = split;
    bad.test.begin = 3;  // fewer than lookback rows of history
    bad.train.end = 3;
    CHECK_THROWS_AS(walk_forward_predict(params, rm, scaler, bad, lookback), InputError);
}

TEST_CASE("walk-forward: perturbing future returns never moves earlier predictions") {
    Rng rng(13);
    ReturnMatrix rm;
    rm.returns = Matrix(60, 3);
    for (auto& v : rm.returns.data) v = 0.02 * rng.normal();
    for (std::size_t i = 0; i < 60; ++i) rm.timestamps.push_back(Date{static_cast<std::int64_t>(7 * i)});
    const SplitPlan split = chronological_split(60, 0.7);  // test rows 42..59
    const Scaler scaler = fit_scaler(slice_rows(rm, split.train));
    std::vector<ForecasterParams> params;
    for (int a = 0; a < 3; ++a) params.push_back(random_params(4, rng));

    const ForecastMatrix base = walk_forward_predict(params, rm, scaler, split, 5);

    ReturnMatrix tampered = rm;
    const std::size_t cut = split.test.begin + 6;  // global index of prediction row 6
    for (std::size_t i = cut; i < 60; ++i)
        for (std::size_t a = 0; a < 3; ++a) tampered.returns.at(i, a) += 0.5;
    const ForecastMatrix after = walk_forward_predict(params, tampered, scaler, split, 5);

    for (std::size_t t = 0; t <= 6; ++t)  // row 6 itself uses only rows < cut
        for (std::size_t a = 0; a < 3; ++a)
            CHECK(after.scores.at(t, a) == base.scores.at(t, a));
    bool moved = false;
    for (std::size_t t = 7; t < base.scores.rows; ++t)
        for (std::size_t a = 0; a < 3; ++a)
            if (after.scores.at(t, a) != base.scores.at(t, a)) moved = true;
    CHECK(moved);
}

TEST_CASE("checkpoint: save/load round-trips parameters and history exactly") {
    Rng rng(12);
    const auto dir = std::filesystem::temp_directory_path() / "portopt_tests" / "lstm_ckpt";
    std::filesystem::create_directories(dir);
    ForecasterConfig cfg;
    cfg.hidden = 7;
    cfg.lookback = 5;
    TrainedForecaster tf;
    tf.params = random_params(7, rng);
    tf.history.train_loss = {0.5, 0.25};
    tf.history.val_loss = {0.6, 0.3};
    tf.history.best_epoch = 2;
    save_forecaster(dir / "a.json", "BTC", cfg, tf);
    const ForecasterCheckpoint cp = load_forecaster(dir / "a.json");
    CHECK(cp.asset_id == "BTC");
    CHECK(cp.config.hidden == 7);
    CHECK(cp.trained.params.flat == tf.params.flat);
    CHECK(cp.trained.history.best_epoch == 2);
    CHECK_THROWS_AS(load_forecaster(dir / "missing.json"), PrereqError);
}
