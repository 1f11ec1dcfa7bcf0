#include "portopt/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "portopt/errors.hpp"
#include "portopt/kernels.hpp"

namespace portopt {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

inline double clamp_log_std(double raw) { return std::clamp(raw, kLogStdMin, kLogStdMax); }

struct MlpOffsets {
    std::size_t w1, b1, w2, b2, w3, b3;
};

MlpOffsets offsets(const MlpDims& d) {
    MlpOffsets o;
    o.w1 = 0;
    o.b1 = o.w1 + d.hidden * d.in;
    o.w2 = o.b1 + d.hidden;
    o.b2 = o.w2 + d.hidden * d.hidden;
    o.w3 = o.b2 + d.hidden;
    o.b3 = o.w3 + d.out * d.hidden;
    return o;
}

}  // namespace

void PpoConfig::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("gamma must lie in (0,1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw InputError("gae lambda must lie in [0,1]");
    if (!(clip > 0.0)) throw InputError("clip range must be positive");
    if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
    if (n_steps < 1 || minibatch < 1 || update_epochs < 1) throw InputError("ppo loop sizes must be positive");
    if (hidden < 1) throw InputError("hidden width must be >= 1");
}

void mlp_forward(const double* params, const MlpDims& dims, const double* x, double* out,
                 MlpTrace* trace) {
    const MlpOffsets o = offsets(dims);
    std::vector<double> a1(dims.hidden), a2(dims.hidden);

    kern::matvec(params + o.w1, dims.hidden, dims.in, x, a1.data());
    for (std::size_t j = 0; j < dims.hidden; ++j) a1[j] = std::tanh(a1[j] + params[o.b1 + j]);

    kern::matvec(params + o.w2, dims.hidden, dims.hidden, a1.data(), a2.data());
    for (std::size_t j = 0; j < dims.hidden; ++j) a2[j] = std::tanh(a2[j] + params[o.b2 + j]);

    kern::matvec(params + o.w3, dims.out, dims.hidden, a2.data(), out);
    for (std::size_t j = 0; j < dims.out; ++j) out[j] += params[o.b3 + j];

    if (trace != nullptr) {
        trace->a1 = std::move(a1);
        trace->a2 = std::move(a2);
    }
}

void mlp_backward(const double* params, const MlpDims& dims, const double* x, const MlpTrace& trace,
                  const double* dout, double* grad_params) {
    const MlpOffsets o = offsets(dims);

    kern::ger_acc(grad_params + o.w3, dims.out, dims.hidden, dout, trace.a2.data());
    kern::axpy(1.0, dout, grad_params + o.b3, dims.out);

    std::vector<double> da2(dims.hidden, 0.0);
    kern::matvec_t_acc(params + o.w3, dims.out, dims.hidden, dout, da2.data());
    for (std::size_t j = 0; j < dims.hidden; ++j) da2[j] *= 1.0 - trace.a2[j] * trace.a2[j];

    kern::ger_acc(grad_params + o.w2, dims.hidden, dims.hidden, da2.data(), trace.a1.data());
    kern::axpy(1.0, da2.data(), grad_params + o.b2, dims.hidden);

    std::vector<double> da1(dims.hidden, 0.0);
    kern::matvec_t_acc(params + o.w2, dims.hidden, dims.hidden, da2.data(), da1.data());
    for (std::size_t j = 0; j < dims.hidden; ++j) da1[j] *= 1.0 - trace.a1[j] * trace.a1[j];

    kern::ger_acc(grad_params + o.w1, dims.hidden, dims.in, da1.data(), x);
    kern::axpy(1.0, da1.data(), grad_params + o.b1, dims.hidden);
}

PolicyParams PolicyParams::zeros(std::size_t state_dim, std::size_t hidden, std::size_t n_assets) {
    PolicyParams p;
    p.state_dim = state_dim;
    p.hidden = hidden;
    p.n_assets = n_assets;
    p.flat.assign(p.size(), 0.0);
    return p;
}

PolicyParams PolicyParams::init(std::size_t state_dim, std::size_t hidden, std::size_t n_assets,
                                Rng& rng) {
    PolicyParams p = zeros(state_dim, hidden, n_assets);
    const auto fill_mlp = [&](double* base, const MlpDims& d) {
        const MlpOffsets o = offsets(d);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(d.in));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(d.hidden));
        for (std::size_t i = 0; i < d.hidden * d.in; ++i) base[o.w1 + i] = rng.uniform(-s1, s1);
        for (std::size_t i = 0; i < d.hidden * d.hidden; ++i) base[o.w2 + i] = rng.uniform(-s2, s2);
        for (std::size_t i = 0; i < d.out * d.hidden; ++i) base[o.w3 + i] = rng.uniform(-s2, s2);
        // biases stay zero
    };
    fill_mlp(p.flat.data() + p.actor_offset(), p.actor_dims());
    fill_mlp(p.flat.data() + p.critic_offset(), p.critic_dims());
    // log_std stays 0
    return p;
}

PolicyEval policy_eval(const PolicyParams& params, std::span<const double> state) {
    if (state.size() != params.state_dim) throw InputError("state dimension mismatch");
    PolicyEval out;
    out.mean.resize(params.n_assets);
    mlp_forward(params.actor(), params.actor_dims(), state.data(), out.mean.data(), nullptr);
    double v = 0.0;
    mlp_forward(params.critic(), params.critic_dims(), state.data(), &v, nullptr);
    out.value = v;
    out.log_std.resize(params.n_assets);
    const auto raw = params.log_std_raw();
    for (std::size_t i = 0; i < params.n_assets; ++i) out.log_std[i] = clamp_log_std(raw[i]);
    return out;
}

double gaussian_log_prob(std::span<const double> action, std::span<const double> mean,
                         std::span<const double> log_std) {
    double lp = 0.0;
    for (std::size_t i = 0; i < action.size(); ++i) {
        const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
        lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
    }
    return lp;
}

double gaussian_entropy(std::span<const double> log_std) {
    double h = 0.0;
    for (double ls : log_std) h += ls + 0.5 * (kLog2Pi + 1.0);
    return h;
}

ActionSample sample_action(std::span<const double> mean, std::span<const double> log_std,
                           bool deterministic, Rng& rng) {
    ActionSample out;
    out.action.resize(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        if (deterministic) {
            out.action[i] = mean[i];
        } else {
            out.action[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
        }
    }
    out.log_prob = gaussian_log_prob(out.action, mean, log_std);
    return out;
}

void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 double terminal_value, double gamma, double lambda, std::span<double> advantages,
                 std::span<double> value_targets) {
    const std::size_t n = rewards.size();
    if (values.size() != n || advantages.size() != n || value_targets.size() != n)
        throw InputError("gae length mismatch");
    double next_adv = 0.0;
    double next_value = terminal_value;
    for (std::size_t i = n; i-- > 0;) {
        const double delta = rewards[i] + gamma * next_value - values[i];
        next_adv = delta + gamma * lambda * next_adv;
        advantages[i] = next_adv;
        value_targets[i] = next_adv + values[i];
        next_value = values[i];
    }
}

std::vector<double> ObsNormalizer::normalize(std::span<const double> obs, bool update) {
    if (obs.size() != mean.size()) throw InputError("observation dimension mismatch");
    if (update) {
        const double tot = count + 1.0;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            const double delta = obs[i] - mean[i];
            mean[i] += delta / tot;
            var[i] = (var[i] * count + delta * delta * count / tot) / tot;
        }
        count = tot;
    }
    std::vector<double> out(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double z = (obs[i] - mean[i]) / std::sqrt(var[i] + 1e-8);
        out[i] = std::clamp(z, -clip, clip);
    }
    return out;
}

double RewardNormalizer::normalize(double reward, bool done) {
    running_return = gamma * running_return + reward;
    const double tot = count + 1.0;
    const double delta = running_return - mean;
    mean += delta / tot;
    var = (var * count + delta * delta * count / tot) / tot;
    count = tot;
    if (done) running_return = 0.0;
    const double scaled = reward / std::sqrt(var + 1e-8);
    return std::clamp(scaled, -clip, clip);
}

double clipped_objective(double ratio, double advantage, double clip) {
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    return std::min(ratio * advantage, clipped * advantage);
}

PpoBatchStats ppo_batch_loss(const PolicyParams& params, const Rollout& rollout,
                             std::span<const double> advantages,
                             std::span<const std::size_t> indices, const PpoConfig& config,
                             std::vector<double>* grad) {
    if (indices.empty()) throw InputError("empty ppo minibatch");
    if (grad != nullptr && grad->size() != params.flat.size())
        throw InputError("gradient buffer size mismatch");

    const std::size_t n_assets = params.n_assets;
    const double inv_b = 1.0 / static_cast<double>(indices.size());
    const auto actor_dims = params.actor_dims();
    const auto critic_dims = params.critic_dims();

    std::vector<double> log_std(n_assets);
    const auto raw_ls = params.log_std_raw();
    for (std::size_t i = 0; i < n_assets; ++i) log_std[i] = clamp_log_std(raw_ls[i]);
    const double entropy = gaussian_entropy(log_std);

    PpoBatchStats stats;
    stats.entropy = entropy;

    std::vector<double> mean(n_assets), dmean(n_assets);
    MlpTrace actor_trace, critic_trace;
    std::size_t clip_count = 0;

    for (std::size_t idx : indices) {
        const double* state = rollout.states.row(idx).data();
        const double* action = rollout.actions.row(idx).data();

        mlp_forward(params.actor(), actor_dims, state, mean.data(),
                    grad != nullptr ? &actor_trace : nullptr);
        double value = 0.0;
        mlp_forward(params.critic(), critic_dims, state, &value,
                    grad != nullptr ? &critic_trace : nullptr);

        const double logp =
            gaussian_log_prob({action, n_assets}, mean, log_std);
        const double ratio = std::exp(logp - rollout.log_probs[idx]);
        const double adv = advantages[idx];
        const double surr1 = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
        const double surr2 = clipped * adv;
        stats.policy_loss -= std::min(surr1, surr2) * inv_b;
        if (std::fabs(ratio - 1.0) > config.clip) ++clip_count;

        const double verr = value - rollout.value_targets[idx];
        stats.value_loss += verr * verr * inv_b;

        if (grad != nullptr) {
            // d(-min)/d(ratio): the unclipped branch carries the gradient;
            // a saturated smaller branch contributes zero.
            const double dobj_dratio = surr1 <= surr2 ? adv : 0.0;
            const double dlogp = -inv_b * dobj_dratio * ratio;
            auto ls_grad = std::span<double>(grad->data() + params.log_std_offset(), n_assets);
            for (std::size_t i = 0; i < n_assets; ++i) {
                const double sigma_inv = std::exp(-log_std[i]);
                const double z = (action[i] - mean[i]) * sigma_inv;
                dmean[i] = dlogp * z * sigma_inv;
                if (raw_ls[i] > kLogStdMin && raw_ls[i] < kLogStdMax)
                    ls_grad[i] += dlogp * (z * z - 1.0);
            }
            mlp_backward(params.actor(), actor_dims, state, actor_trace, dmean.data(),
                         grad->data() + params.actor_offset());
            const double dvalue = config.value_coef * 2.0 * verr * inv_b;
            mlp_backward(params.critic(), critic_dims, state, critic_trace, &dvalue,
                         grad->data() + params.critic_offset());
        }
    }

    if (grad != nullptr) {
        auto ls_grad = std::span<double>(grad->data() + params.log_std_offset(), n_assets);
        for (std::size_t i = 0; i < n_assets; ++i)
            if (raw_ls[i] > kLogStdMin && raw_ls[i] < kLogStdMax) ls_grad[i] -= config.ent_coef;
    }

    stats.clip_fraction = static_cast<double>(clip_count) * inv_b;
    stats.total_loss =
        stats.policy_loss + config.value_coef * stats.value_loss - config.ent_coef * stats.entropy;
    if (!std::isfinite(stats.total_loss))
        throw DivergenceError("non-finite ppo loss (policy=" + std::to_string(stats.policy_loss) +
                              ", value=" + std::to_string(stats.value_loss) + ")");
    return stats;
}

PpoUpdateDiagnostics ppo_update(PolicyParams& params, Adam& optimizer, const Rollout& rollout,
                                const PpoConfig& config, Rng& rng) {
    const std::size_t n = rollout.size();
    if (n == 0) throw InputError("empty rollout");
    if (rollout.advantages.size() != n || rollout.value_targets.size() != n)
        throw InputError("rollout advantages not populated");

    // Advantage normalization, once per update.
    std::vector<double> adv = rollout.advantages;
    const double mean_adv = kern::sum(adv.data(), n) / static_cast<double>(n);
    double std_adv = 0.0;
    if (n > 1) {
        double ss = 0.0;
        for (double a : adv) ss += (a - mean_adv) * (a - mean_adv);
        std_adv = std::sqrt(ss / static_cast<double>(n - 1));
    }
    for (double& a : adv) a = (a - mean_adv) / (std_adv + 1e-8);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    PpoUpdateDiagnostics diag;
    std::vector<double> grad(params.flat.size());
    for (std::size_t epoch = 0; epoch < config.update_epochs; ++epoch) {
        rng.shuffle(order);
        double pl = 0.0, vl = 0.0, ent = 0.0, cf = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < n; start += config.minibatch) {
            const std::size_t stop = std::min(start + config.minibatch, n);
            const std::span<const std::size_t> batch(order.data() + start, stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            const auto stats = ppo_batch_loss(params, rollout, adv, batch, config, &grad);

            const double norm = std::sqrt(kern::sum_sq(grad.data(), grad.size()));
            if (norm > config.max_grad_norm && norm > 0.0)
                kern::scal(config.max_grad_norm / norm, grad.data(), grad.size());
            optimizer.step(params.flat, grad);

            const auto w = static_cast<double>(batch.size());
            pl += stats.policy_loss * w;
            vl += stats.value_loss * w;
            ent += stats.entropy * w;
            cf += stats.clip_fraction * w;
            seen += batch.size();
        }
        diag.policy_loss.push_back(pl / static_cast<double>(seen));
        diag.value_loss.push_back(vl / static_cast<double>(seen));
        diag.entropy.push_back(ent / static_cast<double>(seen));
        diag.clip_fraction.push_back(cf / static_cast<double>(seen));
    }
    return diag;
}

namespace {

TrainedPolicy train_single(PortfolioEnv env, const PpoConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    Rng init_rng = rng.fork(1);
    Rng action_rng = rng.fork(2);
    Rng update_rng = rng.fork(3);

    const std::size_t n_assets = env.config().n_assets;
    TrainedPolicy tp;
    tp.params = PolicyParams::init(env.state_dim(), config.hidden, n_assets, init_rng);
    tp.normalizer = ObsNormalizer(env.state_dim(), config.obs_clip);
    tp.env_config = env.config();

    Adam optimizer(config.learning_rate);
    RewardNormalizer reward_norm;
    reward_norm.gamma = config.gamma;
    reward_norm.clip = config.reward_clip;
    std::vector<double> obs = tp.normalizer.normalize(env.reset().v, true);

    std::size_t steps_done = 0;
    std::size_t update_idx = 0;
    Rollout ro;
    while (steps_done < config.total_timesteps) {
        const std::size_t n = config.n_steps;
        ro.clear();
        ro.states = Matrix(n, env.state_dim());
        ro.actions = Matrix(n, n_assets);
        for (std::size_t i = 0; i < n; ++i) {
            const PolicyEval ev = policy_eval(tp.params, obs);
            const ActionSample as = sample_action(ev.mean, ev.log_std, false, action_rng);
            auto res = env.step(as.action);
            std::copy(obs.begin(), obs.end(), ro.states.row(i).begin());
            std::copy(as.action.begin(), as.action.end(), ro.actions.row(i).begin());
            ro.log_probs.push_back(as.log_prob);
            ro.values.push_back(ev.value);
            ro.rewards.push_back(config.normalize_reward ? reward_norm.normalize(res.reward, res.done)
                                                         : res.reward);
            ro.dones.push_back(res.done ? 1 : 0);
            obs = tp.normalizer.normalize(res.done ? env.reset().v : res.next.v, true);
        }
        const double tail_value = ro.dones.back() != 0 ? 0.0 : policy_eval(tp.params, obs).value;

        ro.advantages.assign(n, 0.0);
        ro.value_targets.assign(n, 0.0);
        std::size_t seg = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (ro.dones[i] != 0 || i + 1 == n) {
                const double terminal = ro.dones[i] != 0 ? 0.0 : tail_value;
                const std::size_t len = i - seg + 1;
                compute_gae({ro.rewards.data() + seg, len}, {ro.values.data() + seg, len}, terminal,
                            config.gamma, config.gae_lambda,
                            {ro.advantages.data() + seg, len}, {ro.value_targets.data() + seg, len});
                seg = i + 1;
            }
        }

        PpoUpdateDiagnostics diag;
        try {
            diag = ppo_update(tp.params, optimizer, ro, config, update_rng);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " at update " +
                                  std::to_string(update_idx + 1) + " (timestep " +
                                  std::to_string(steps_done) + ")");
        }
        steps_done += n;
        ++update_idx;

        const auto avg = [](const std::vector<double>& v) {
            return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        CurveRow row;
        row.update = update_idx;
        row.mean_reward = std::accumulate(ro.rewards.begin(), ro.rewards.end(), 0.0) /
                          static_cast<double>(ro.rewards.size());
        row.policy_loss = avg(diag.policy_loss);
        row.value_loss = avg(diag.value_loss);
        row.entropy = avg(diag.entropy);
        row.clip_fraction = avg(diag.clip_fraction);
        tp.curves.push_back(row);
    }
    return tp;
}

}  // namespace

std::map<std::size_t, TrainedPolicy> train_ppo(const EnvFactory& factory, const PpoConfig& config,
                                               std::span<const std::size_t> k_values,
                                               const std::string& variant) {
    config.validate();
    std::map<std::size_t, TrainedPolicy> out;
    for (std::size_t k : k_values) {
        PortfolioEnv env = factory(k);
        const std::uint64_t seed_k = Rng(config.seed).fork(0xABC0 + k).seed();
        TrainedPolicy tp = train_single(std::move(env), config, seed_k);
        tp.top_k = k;
        tp.variant = variant;
        out.emplace(k, std::move(tp));
    }
    return out;
}

namespace {

nlohmann::json ppo_config_to_json(const PpoConfig& c) {
    return {
        {"learning_rate", c.learning_rate}, {"n_steps", c.n_steps},
        {"minibatch", c.minibatch},         {"clip", c.clip},
        {"ent_coef", c.ent_coef},           {"value_coef", c.value_coef},
        {"max_grad_norm", c.max_grad_norm}, {"gamma", c.gamma},
        {"gae_lambda", c.gae_lambda},       {"update_epochs", c.update_epochs},
        {"total_timesteps", c.total_timesteps}, {"hidden", c.hidden},
        {"obs_clip", c.obs_clip},           {"normalize_reward", c.normalize_reward},
        {"reward_clip", c.reward_clip},     {"seed", c.seed},
    };
}

PpoConfig ppo_config_from_json(const nlohmann::json& j) {
    PpoConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.n_steps = j.at("n_steps").get<std::size_t>();
    c.minibatch = j.at("minibatch").get<std::size_t>();
    c.clip = j.at("clip").get<double>();
    c.ent_coef = j.at("ent_coef").get<double>();
    c.value_coef = j.at("value_coef").get<double>();
    c.max_grad_norm = j.at("max_grad_norm").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.gae_lambda = j.at("gae_lambda").get<double>();
    c.update_epochs = j.at("update_epochs").get<std::size_t>();
    c.total_timesteps = j.at("total_timesteps").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.obs_clip = j.at("obs_clip").get<double>();
    c.normalize_reward = j.value("normalize_reward", false);
    c.reward_clip = j.value("reward_clip", 10.0);
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

void save_policy(const std::filesystem::path& path, const TrainedPolicy& policy,
                 const PpoConfig& config) {
    nlohmann::json curves = nlohmann::json::array();
    for (const auto& r : policy.curves) {
        curves.push_back({{"update", r.update},
                          {"mean_reward", r.mean_reward},
                          {"policy_loss", r.policy_loss},
                          {"value_loss", r.value_loss},
                          {"entropy", r.entropy},
                          {"clip_fraction", r.clip_fraction}});
    }
    nlohmann::json j = {
        {"format", "portopt-policy"},
        {"version", 1},
        {"variant", policy.variant},
        {"top_k", policy.top_k},
        {"config", ppo_config_to_json(config)},
        {"env_config",
         {{"window", policy.env_config.window},
          {"tc", policy.env_config.tc},
          {"tau", policy.env_config.tau},
          {"lambda_sparse", policy.env_config.lambda_sparse},
          {"top_k", policy.env_config.top_k},
          {"n_assets", policy.env_config.n_assets}}},
        {"params",
         {{"state_dim", policy.params.state_dim},
          {"hidden", policy.params.hidden},
          {"n_assets", policy.params.n_assets},
          {"flat", policy.params.flat}}},
        {"normalizer",
         {{"mean", policy.normalizer.mean},
          {"var", policy.normalizer.var},
          {"count", policy.normalizer.count},
          {"clip", policy.normalizer.clip}}},
        {"curves", curves},
    };
    std::ofstream out(path);
    if (!out) throw InputError("cannot write checkpoint: " + path.string());
    out << j.dump(2) << '\n';
}

PolicyCheckpoint load_policy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PrereqError("missing policy checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("checkpoint parse error in " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "portopt-policy" || j.value("version", 0) != 1)
        throw InputError("unrecognized checkpoint format: " + path.string());

    PolicyCheckpoint cp;
    cp.config = ppo_config_from_json(j.at("config"));
    cp.policy.variant = j.at("variant").get<std::string>();
    cp.policy.top_k = j.at("top_k").get<std::size_t>();
    const auto& ec = j.at("env_config");
    cp.policy.env_config.window = ec.at("window").get<std::size_t>();
    cp.policy.env_config.tc = ec.at("tc").get<double>();
    cp.policy.env_config.tau = ec.at("tau").get<double>();
    cp.policy.env_config.lambda_sparse = ec.at("lambda_sparse").get<double>();
    cp.policy.env_config.top_k = ec.at("top_k").get<std::size_t>();
    cp.policy.env_config.n_assets = ec.at("n_assets").get<std::size_t>();
    const auto& pp = j.at("params");
    cp.policy.params.state_dim = pp.at("state_dim").get<std::size_t>();
    cp.policy.params.hidden = pp.at("hidden").get<std::size_t>();
    cp.policy.params.n_assets = pp.at("n_assets").get<std::size_t>();
    cp.policy.params.flat = pp.at("flat").get<std::vector<double>>();
    if (cp.policy.params.flat.size() != cp.policy.params.size())
        throw InputError("checkpoint parameter size mismatch: " + path.string());
    const auto& nm = j.at("normalizer");
    cp.policy.normalizer.mean = nm.at("mean").get<std::vector<double>>();
    cp.policy.normalizer.var = nm.at("var").get<std::vector<double>>();
    cp.policy.normalizer.count = nm.at("count").get<double>();
    cp.policy.normalizer.clip = nm.at("clip").get<double>();
    for (const auto& r : j.at("curves")) {
        CurveRow row;
        row.update = r.at("update").get<std::size_t>();
        row.mean_reward = r.at("mean_reward").get<double>();
        row.policy_loss = r.at("policy_loss").get<double>();
        row.value_loss = r.at("value_loss").get<double>();
        row.entropy = r.at("entropy").get<double>();
        row.clip_fraction = r.at("clip_fraction").get<double>();
        cp.policy.curves.push_back(row);
    }
    return cp;
}

}  // namespace portopt
