#include "portopt/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "portopt/errors.hpp"
#include "portopt/fetch.hpp"
#include "portopt/hash.hpp"
#include "portopt/report.hpp"

namespace portopt {

namespace {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path, const char* what, bool prereq) {
    std::ifstream in(path);
    if (!in) {
        const std::string msg = std::string("missing ") + what + ": " + path.string();
        if (prereq) throw PrereqError(msg);
        throw InputError(msg);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError(std::string(what) + " parse error in " + path.string() + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << text;
}

std::string relpath(const ExperimentConfig& cfg, const std::filesystem::path& p) {
    return std::filesystem::relative(p, cfg.out_dir).generic_string();
}

// Merge artifact entries (relative path -> sha256) into run_manifest.json.
void update_run_manifest(const ExperimentConfig& cfg,
                         const std::vector<std::filesystem::path>& files) {
    const auto path = run_manifest_path(cfg);
    json manifest;
    if (std::filesystem::exists(path)) {
        manifest = read_json_file(path, "run manifest", false);
    } else {
        manifest = {{"format", "portopt-run-manifest"}, {"version", 1}};
    }
    manifest["seed"] = cfg.seed;
    manifest["config"] = json::parse(cfg.echo_json());
    if (!manifest.contains("artifacts")) manifest["artifacts"] = json::object();
    for (const auto& f : files) manifest["artifacts"][relpath(cfg, f)] = sha256_file_hex(f.string());
    write_text_file(path, manifest.dump(2) + "\n");
}

json forecaster_config_json(const ForecasterConfig& c) {
    return {
        {"lookback", c.lookback},         {"hidden", c.hidden},
        {"dropout", c.dropout},           {"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},     {"max_epochs", c.max_epochs},
        {"weight_decay", c.weight_decay}, {"patience", c.patience},
        {"validation_fraction", c.validation_fraction},
    };
}

json ppo_config_json(const PpoConfig& c) {
    return {
        {"learning_rate", c.learning_rate}, {"n_steps", c.n_steps},
        {"minibatch", c.minibatch},         {"clip", c.clip},
        {"ent_coef", c.ent_coef},           {"value_coef", c.value_coef},
        {"max_grad_norm", c.max_grad_norm}, {"gamma", c.gamma},
        {"gae_lambda", c.gae_lambda},       {"update_epochs", c.update_epochs},
        {"total_timesteps", c.total_timesteps}, {"hidden", c.hidden},
        {"obs_clip", c.obs_clip},           {"normalize_reward", c.normalize_reward},
        {"reward_clip", c.reward_clip},
    };
}

std::string sanitize(const std::string& name) {
    std::string s = name;
    for (char& c : s)
        if (c == ':' || c == '/' || c == ' ') c = '_';
    return s;
}

// Variants of the allocator required by the configured strategy list.
std::vector<std::string> required_variants(const ExperimentConfig& cfg) {
    std::set<std::string> found;
    for (const auto& s : cfg.strategies) {
        if (s.rfind("hybrid", 0) == 0) found.insert("hybrid");
        if (s.rfind("policy-only", 0) == 0) found.insert("policy-only");
    }
    if (found.empty()) found.insert("hybrid");
    return {found.begin(), found.end()};
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path,
                                        std::optional<std::uint64_t> seed_override,
                                        std::optional<std::filesystem::path> out_override) {
    const json j = read_json_file(path, "config", false);
    if (j.value("version", 1) != 1) throw InputError("unsupported config version in " + path.string());

    ExperimentConfig cfg;
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    const auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_relative() ? base / fp : fp;
    };

    if (j.contains("manifest")) cfg.manifest = resolve(j.at("manifest").get<std::string>());
    if (j.contains("out_dir")) cfg.out_dir = resolve(j.at("out_dir").get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);

    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        cfg.preprocess.anchor_day = p.value("anchor_day", cfg.preprocess.anchor_day);
        cfg.preprocess.split_ratio = p.value("split_ratio", cfg.preprocess.split_ratio);
        cfg.preprocess.resample = p.value("resample_weekly", cfg.preprocess.resample);
        cfg.preprocess.calendar = p.value("calendar", cfg.preprocess.calendar);
    }
    if (j.contains("forecaster")) {
        const auto& f = j.at("forecaster");
        cfg.forecaster.lookback = f.value("lookback", cfg.forecaster.lookback);
        cfg.forecaster.hidden = f.value("hidden", cfg.forecaster.hidden);
        cfg.forecaster.dropout = f.value("dropout", cfg.forecaster.dropout);
        cfg.forecaster.learning_rate = f.value("learning_rate", cfg.forecaster.learning_rate);
        cfg.forecaster.batch_size = f.value("batch_size", cfg.forecaster.batch_size);
        cfg.forecaster.max_epochs = f.value("max_epochs", cfg.forecaster.max_epochs);
        cfg.forecaster.weight_decay = f.value("weight_decay", cfg.forecaster.weight_decay);
        cfg.forecaster.patience = f.value("patience", cfg.forecaster.patience);
        cfg.forecaster.validation_fraction =
            f.value("validation_fraction", cfg.forecaster.validation_fraction);
    }
    if (j.contains("env")) {
        const auto& e = j.at("env");
        cfg.env_window = e.value("window", cfg.env_window);
        cfg.env_tc = e.value("tc", cfg.env_tc);
        cfg.env_tau = e.value("tau", cfg.env_tau);
        cfg.env_lambda_sparse = e.value("lambda_sparse", cfg.env_lambda_sparse);
    }
    if (j.contains("ppo")) {
        const auto& p = j.at("ppo");
        cfg.ppo.learning_rate = p.value("learning_rate", cfg.ppo.learning_rate);
        cfg.ppo.n_steps = p.value("n_steps", cfg.ppo.n_steps);
        cfg.ppo.minibatch = p.value("minibatch", cfg.ppo.minibatch);
        cfg.ppo.clip = p.value("clip", cfg.ppo.clip);
        cfg.ppo.ent_coef = p.value("ent_coef", cfg.ppo.ent_coef);
        cfg.ppo.value_coef = p.value("value_coef", cfg.ppo.value_coef);
        cfg.ppo.max_grad_norm = p.value("max_grad_norm", cfg.ppo.max_grad_norm);
        cfg.ppo.gamma = p.value("gamma", cfg.ppo.gamma);
        cfg.ppo.gae_lambda = p.value("gae_lambda", cfg.ppo.gae_lambda);
        cfg.ppo.update_epochs = p.value("update_epochs", cfg.ppo.update_epochs);
        cfg.ppo.total_timesteps = p.value("total_timesteps", cfg.ppo.total_timesteps);
        cfg.ppo.hidden = p.value("hidden", cfg.ppo.hidden);
        cfg.ppo.obs_clip = p.value("obs_clip", cfg.ppo.obs_clip);
        cfg.ppo.normalize_reward = p.value("normalize_reward", cfg.ppo.normalize_reward);
        cfg.ppo.reward_clip = p.value("reward_clip", cfg.ppo.reward_clip);
    }
    if (j.contains("k_values")) cfg.k_values = j.at("k_values").get<std::vector<std::size_t>>();
    if (j.contains("strategies")) cfg.strategies = j.at("strategies").get<std::vector<std::string>>();
    if (j.contains("composite_weights"))
        cfg.composite_weights = j.at("composite_weights").get<std::map<std::string, double>>();
    cfg.risk_free_weekly = j.value("risk_free_weekly", cfg.risk_free_weekly);
    cfg.periods_per_year = j.value("periods_per_year", cfg.periods_per_year);
    cfg.include_reported_rows = j.value("include_reported_rows", cfg.include_reported_rows);
    if (j.contains("http_cache_dir")) cfg.http_cache_dir = resolve(j.at("http_cache_dir").get<std::string>());

    if (cfg.strategies.empty())
        cfg.strategies = {"hybrid:5", "hybrid:10", "hybrid:30", "equal-weight"};
    if (cfg.http_cache_dir.empty()) cfg.http_cache_dir = cfg.out_dir / "cache";

    std::set<std::size_t> unique_k(cfg.k_values.begin(), cfg.k_values.end());
    if (unique_k.size() != cfg.k_values.size())
        throw InputError("k_values must be unique in " + path.string());

    if (seed_override) cfg.seed = *seed_override;
    if (out_override) cfg.out_dir = *out_override;
    return cfg;
}

std::string ExperimentConfig::echo_json() const {
    json j = {
        {"version", 1},
        {"manifest", manifest.generic_string()},
        {"out_dir", out_dir.generic_string()},
        {"seed", seed},
        {"preprocess",
         {{"anchor_day", preprocess.anchor_day},
          {"split_ratio", preprocess.split_ratio},
          {"resample_weekly", preprocess.resample},
          {"calendar", preprocess.calendar}}},
        {"forecaster", forecaster_config_json(forecaster)},
        {"env",
         {{"window", env_window},
          {"tc", env_tc},
          {"tau", env_tau},
          {"lambda_sparse", env_lambda_sparse}}},
        {"ppo", ppo_config_json(ppo)},
        {"k_values", k_values},
        {"strategies", strategies},
        {"composite_weights", composite_weights},
        {"risk_free_weekly", risk_free_weekly},
        {"periods_per_year", periods_per_year},
        {"include_reported_rows", include_reported_rows},
    };
    return j.dump();
}

std::filesystem::path dataset_path(const ExperimentConfig& cfg) { return cfg.out_dir / "dataset.json"; }
std::filesystem::path forecaster_checkpoint_path(const ExperimentConfig& cfg, const std::string& asset) {
    return cfg.out_dir / "checkpoints" / ("forecaster_" + sanitize(asset) + ".json");
}
std::filesystem::path policy_checkpoint_path(const ExperimentConfig& cfg, const std::string& variant,
                                             std::size_t k) {
    return cfg.out_dir / "checkpoints" / ("policy_" + sanitize(variant) + "_k" + std::to_string(k) + ".json");
}
std::filesystem::path train_scores_path(const ExperimentConfig& cfg) {
    return cfg.out_dir / "forecasts" / "train_scores.csv";
}
std::filesystem::path test_forecasts_path(const ExperimentConfig& cfg) {
    return cfg.out_dir / "forecasts" / "test_forecasts.csv";
}
std::filesystem::path comparison_json_path(const ExperimentConfig& cfg) {
    return cfg.out_dir / "backtest" / "comparison.json";
}
std::filesystem::path run_manifest_path(const ExperimentConfig& cfg) {
    return cfg.out_dir / "run_manifest.json";
}

namespace {

json dataset_to_json(const ExperimentConfig& cfg, const Dataset& ds) {
    json stamps = json::array();
    for (const auto& d : ds.weekly.timestamps) stamps.push_back(d.to_string());
    json ret_stamps = json::array();
    for (const auto& d : ds.returns.timestamps) ret_stamps.push_back(d.to_string());
    return {
        {"format", "portopt-dataset"},
        {"version", 1},
        {"assets", ds.weekly.assets},
        {"classes", ds.weekly.asset_classes},
        {"timestamps", stamps},
        {"prices", ds.weekly.prices.data},
        {"return_timestamps", ret_stamps},
        {"returns", ds.returns.returns.data},
        {"split",
         {{"train_begin", ds.split.train.begin},
          {"train_end", ds.split.train.end},
          {"test_begin", ds.split.test.begin},
          {"test_end", ds.split.test.end},
          {"ratio", ds.split.ratio}}},
        {"preprocess",
         {{"anchor_day", cfg.preprocess.anchor_day},
          {"resample_weekly", cfg.preprocess.resample},
          {"calendar", cfg.preprocess.calendar}}},
    };
}

}  // namespace

std::string cmd_ingest(const ExperimentConfig& cfg) {
    if (cfg.manifest.empty()) throw InputError("config has no manifest path");
    Manifest manifest = load_manifest(cfg.manifest);

    // Remote entries are cached locally, then treated as plain files.
    for (auto& entry : manifest.assets) {
        if (!entry.url.empty() && entry.path.empty()) {
            const FetchResult fr = fetch_to_cache(entry.url, cfg.http_cache_dir);
            entry.path = fr.cached_path.string();
        }
    }

    const CalendarPolicy policy = cfg.preprocess.calendar == "intersection"
                                      ? CalendarPolicy::intersection
                                      : CalendarPolicy::union_ffill;
    PriceTable table = ingest_prices(manifest, policy, cfg.manifest.parent_path());
    if (cfg.preprocess.resample)
        table = resample_weekly(table, parse_weekday(cfg.preprocess.anchor_day));

    Dataset ds;
    ds.weekly = std::move(table);
    ds.returns = log_returns(ds.weekly);
    ds.split = chronological_split(ds.returns.returns.rows, cfg.preprocess.split_ratio);

    json j = dataset_to_json(cfg, ds);
    ds.content_hash = sha256_hex(j.dump());
    j["content_hash"] = ds.content_hash;
    write_text_file(dataset_path(cfg), j.dump(2) + "\n");
    update_run_manifest(cfg, {dataset_path(cfg)});
    return ds.content_hash;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    json j = read_json_file(dataset_path(cfg), "dataset artifact (run 'ingest' first)", true);
    if (j.value("format", "") != "portopt-dataset" || j.value("version", 0) != 1)
        throw InputError("unrecognized dataset format: " + dataset_path(cfg).string());
    if (j.contains("content_hash")) {
        const std::string stored = j.at("content_hash").get<std::string>();
        json body = j;
        body.erase("content_hash");
        if (sha256_hex(body.dump()) != stored)
            throw InputError("dataset artifact failed its hash check (edited or corrupted): " +
                             dataset_path(cfg).string());
    }
    Dataset ds;
    ds.weekly.assets = j.at("assets").get<std::vector<std::string>>();
    ds.weekly.asset_classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& s : j.at("timestamps")) ds.weekly.timestamps.push_back(Date::parse(s.get<std::string>()));
    ds.weekly.prices = Matrix(ds.weekly.timestamps.size(), ds.weekly.assets.size());
    ds.weekly.prices.data = j.at("prices").get<std::vector<double>>();
    for (const auto& s : j.at("return_timestamps"))
        ds.returns.timestamps.push_back(Date::parse(s.get<std::string>()));
    ds.returns.returns = Matrix(ds.returns.timestamps.size(), ds.weekly.assets.size());
    ds.returns.returns.data = j.at("returns").get<std::vector<double>>();
    const auto& sp = j.at("split");
    ds.split.train = {sp.at("train_begin").get<std::size_t>(), sp.at("train_end").get<std::size_t>()};
    ds.split.test = {sp.at("test_begin").get<std::size_t>(), sp.at("test_end").get<std::size_t>()};
    ds.split.ratio = sp.at("ratio").get<double>();
    ds.content_hash = j.value("content_hash", "");
    if (ds.weekly.prices.data.size() != ds.weekly.prices.rows * ds.weekly.prices.cols ||
        ds.returns.returns.data.size() != ds.returns.returns.rows * ds.returns.returns.cols)
        throw InputError("dataset artifact is ragged: " + dataset_path(cfg).string());
    return ds;
}

namespace {

void train_forecasters_stage(const ExperimentConfig& cfg, const Dataset& ds,
                             std::vector<std::filesystem::path>& written) {
    const ReturnMatrix train = slice_rows(ds.returns, ds.split.train);
    const Scaler scaler = fit_scaler(train);
    const ReturnMatrix scaled = apply_scaler(scaler, train);

    const std::size_t n = ds.weekly.assets.size();
    for (std::size_t a = 0; a < n; ++a) {
        ForecasterConfig fc = cfg.forecaster;
        fc.seed = Rng(cfg.seed).fork(1000 + a).seed();
        std::vector<double> series(scaled.returns.rows);
        for (std::size_t t = 0; t < series.size(); ++t) series[t] = scaled.returns.at(t, a);
        const TrainedForecaster trained = train_forecaster(series, fc);
        const auto path = forecaster_checkpoint_path(cfg, ds.weekly.assets[a]);
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        save_forecaster(path, ds.weekly.assets[a], fc, trained);
        written.push_back(path);
    }
}

std::vector<ForecasterParams> load_all_forecasters(const ExperimentConfig& cfg, const Dataset& ds) {
    std::vector<ForecasterParams> params;
    params.reserve(ds.weekly.assets.size());
    for (const auto& asset : ds.weekly.assets) {
        const auto path = forecaster_checkpoint_path(cfg, asset);
        if (!std::filesystem::exists(path))
            throw PrereqError("missing forecaster checkpoint for '" + asset +
                              "' (run 'train --stage forecaster' first): " + path.string());
        params.push_back(load_forecaster(path).trained.params);
    }
    return params;
}

void predict_stage(const ExperimentConfig& cfg, const Dataset& ds,
                   std::vector<std::filesystem::path>& written) {
    const ReturnMatrix train = slice_rows(ds.returns, ds.split.train);
    const Scaler scaler = fit_scaler(train);
    const auto params = load_all_forecasters(cfg, ds);

    // In-sample signals over the training range (zero rows before one lookback).
    const ForecastMatrix train_scores =
        predict_scores(params, ds.returns, scaler, ds.split.train, cfg.forecaster.lookback);
    write_forecast_csv(train_scores_path(cfg), train_scores, ds.weekly.assets);
    written.push_back(train_scores_path(cfg));

    const ForecastMatrix test_scores =
        walk_forward_predict(params, ds.returns, scaler, ds.split, cfg.forecaster.lookback);
    write_forecast_csv(test_forecasts_path(cfg), test_scores, ds.weekly.assets);
    written.push_back(test_forecasts_path(cfg));
}

void train_allocator_stage(const ExperimentConfig& cfg, const Dataset& ds,
                           std::vector<std::filesystem::path>& written) {
    const std::size_t n = ds.weekly.assets.size();
    const IndexRange train = ds.split.train;
    const Matrix train_returns = ds.returns.returns.slice_rows(train.begin, train.end);

    for (const std::string& variant : required_variants(cfg)) {
        Matrix scores(train_returns.rows, n);
        if (variant == "hybrid") {
            if (!std::filesystem::exists(train_scores_path(cfg)))
                throw PrereqError("hybrid allocator needs forecasts; run 'train --stage forecaster' "
                                  "or 'predict' first (missing " +
                                  train_scores_path(cfg).string() + ")");
            std::vector<std::string> forecast_ids;
            const ForecastMatrix fm = read_forecast_csv(train_scores_path(cfg), &forecast_ids);
            if (fm.scores.rows != train_returns.rows || fm.scores.cols != n)
                throw InputError("training scores shape mismatch");
            if (forecast_ids != ds.weekly.assets)
                throw InputError("training-score columns do not match the dataset universe");
            scores = fm.scores;
        }

        EnvConfig ec;
        ec.window = cfg.env_window;
        ec.tc = cfg.env_tc;
        ec.tau = cfg.env_tau;
        ec.lambda_sparse = cfg.env_lambda_sparse;
        ec.n_assets = n;

        const EnvFactory factory = [&](std::size_t k) {
            EnvConfig e = ec;
            e.top_k = k;
            return PortfolioEnv(train_returns, scores, e);
        };

        PpoConfig pc = cfg.ppo;
        pc.seed = Rng(cfg.seed).fork(variant == "hybrid" ? 11 : 12).seed();
        const auto policies = train_ppo(factory, pc, cfg.k_values, variant);

        for (const auto& [k, tp] : policies) {
            const auto path = policy_checkpoint_path(cfg, variant, k);
            if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
            save_policy(path, tp, pc);
            written.push_back(path);
            const auto curves_path =
                cfg.out_dir / "curves" / ("curves_" + sanitize(variant) + "_k" + std::to_string(k) + ".csv");
            write_curves_csv(curves_path, tp.curves);
            written.push_back(curves_path);
        }
    }
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg, const std::string& stage) {
    if (stage != "forecaster" && stage != "allocator" && stage != "all")
        throw InputError("unknown train stage '" + stage + "' (expected forecaster|allocator|all)");
    const Dataset ds = load_dataset(cfg);
    std::vector<std::filesystem::path> written;
    if (stage == "forecaster" || stage == "all") {
        train_forecasters_stage(cfg, ds, written);
        predict_stage(cfg, ds, written);
    }
    if (stage == "allocator" || stage == "all") train_allocator_stage(cfg, ds, written);
    update_run_manifest(cfg, written);
}

void cmd_predict(const ExperimentConfig& cfg) {
    const Dataset ds = load_dataset(cfg);
    std::vector<std::filesystem::path> written;
    predict_stage(cfg, ds, written);
    update_run_manifest(cfg, written);
}

namespace {

// Existing backtest output is renamed, never overwritten.
void archive_existing_backtest(const ExperimentConfig& cfg) {
    const auto dir = cfg.out_dir / "backtest";
    if (!std::filesystem::exists(dir) || std::filesystem::is_empty(dir)) return;
    for (int i = 1;; ++i) {
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, "%03d", i);
        const auto target = cfg.out_dir / ("backtest_archive_" + std::string(suffix));
        if (!std::filesystem::exists(target)) {
            std::filesystem::rename(dir, target);
            return;
        }
    }
}

}  // namespace

void cmd_backtest(const ExperimentConfig& cfg) {
    const Dataset ds = load_dataset(cfg);
    const std::size_t n = ds.weekly.assets.size();

    std::vector<StrategySpec> specs;
    bool needs_scores = false, needs_hybrid = false, needs_policy_only = false;
    for (const auto& text : cfg.strategies) {
        StrategySpec spec = StrategySpec::parse(text, ds.weekly.assets);
        if (spec.kind == StrategyKind::static_composite) spec.class_weights = cfg.composite_weights;
        needs_scores |= spec.kind == StrategyKind::signal_only || spec.kind == StrategyKind::hybrid;
        needs_hybrid |= spec.kind == StrategyKind::hybrid;
        needs_policy_only |= spec.kind == StrategyKind::policy_only;
        specs.push_back(std::move(spec));
    }

    ForecastMatrix test_scores;
    if (needs_scores) {
        if (!std::filesystem::exists(test_forecasts_path(cfg)))
            throw PrereqError("missing forecasts (run 'train --stage forecaster' or 'predict'): " +
                              test_forecasts_path(cfg).string());
        std::vector<std::string> forecast_ids;
        test_scores = read_forecast_csv(test_forecasts_path(cfg), &forecast_ids);
        if (forecast_ids != ds.weekly.assets)
            throw InputError("forecast columns do not match the dataset universe: " +
                             test_forecasts_path(cfg).string());
    }

    std::map<std::size_t, TrainedPolicy> hybrid_policies, policy_only_policies;
    const auto load_policies = [&](const std::string& variant, std::map<std::size_t, TrainedPolicy>& out) {
        for (const auto& spec : specs) {
            const bool want = (variant == "hybrid" && spec.kind == StrategyKind::hybrid) ||
                              (variant == "policy-only" && spec.kind == StrategyKind::policy_only);
            if (!want || out.count(spec.top_k) != 0) continue;
            const auto path = policy_checkpoint_path(cfg, variant, spec.top_k);
            if (!std::filesystem::exists(path))
                throw PrereqError("missing policy checkpoint (run 'train --stage allocator'): " +
                                  path.string());
            out.emplace(spec.top_k, load_policy(path).policy);
        }
    };
    if (needs_hybrid) load_policies("hybrid", hybrid_policies);
    if (needs_policy_only) load_policies("policy-only", policy_only_policies);

    BacktestInputs in;
    in.returns = &ds.returns;
    in.split = ds.split;
    in.asset_ids = ds.weekly.assets;
    in.asset_classes = ds.weekly.asset_classes;
    in.test_scores = needs_scores ? &test_scores : nullptr;
    in.policies = &hybrid_policies;
    in.policies_no_signal = &policy_only_policies;

    const auto results = compare(specs, in, cfg.env_tc, cfg.risk_free_weekly, cfg.periods_per_year);

    archive_existing_backtest(cfg);
    const auto dir = cfg.out_dir / "backtest";
    std::vector<std::filesystem::path> written;
    const std::vector<Date> stamps(ds.returns.timestamps.begin() + static_cast<std::ptrdiff_t>(ds.split.test.begin),
                                   ds.returns.timestamps.begin() + static_cast<std::ptrdiff_t>(ds.split.test.end));

    write_comparison_csv(dir / "comparison.csv", results, false);
    written.push_back(dir / "comparison.csv");
    if (cfg.include_reported_rows) {
        write_comparison_csv(dir / "comparison_with_reported.csv", results, true);
        written.push_back(dir / "comparison_with_reported.csv");
    }
    write_comparison_json(comparison_json_path(cfg), results, cfg.include_reported_rows);
    written.push_back(comparison_json_path(cfg));
    write_equity_csv(dir / "equity_curves.csv", results);
    written.push_back(dir / "equity_curves.csv");
    write_drawdown_csv(dir / "drawdowns.csv", results);
    written.push_back(dir / "drawdowns.csv");
    write_equity_svg(dir / "plots" / "equity.svg", results);
    written.push_back(dir / "plots" / "equity.svg");
    write_drawdown_svg(dir / "plots" / "drawdown.svg", results);
    written.push_back(dir / "plots" / "drawdown.svg");

    for (const auto& r : results) {
        const auto wpath = dir / ("weights_" + sanitize(r.name) + ".csv");
        write_weights_csv(wpath, stamps, r.weights, ds.weekly.assets);
        written.push_back(wpath);
        const auto lpath = dir / ("ledger_" + sanitize(r.name) + ".csv");
        write_ledger_csv(lpath, stamps, r.ledger);
        written.push_back(lpath);
        const auto ppath = dir / "plots" / ("weights_" + sanitize(r.name) + ".svg");
        write_mean_weights_pie_svg(ppath, r, ds.weekly.assets);
        written.push_back(ppath);
    }

    std::ostringstream summary;
    summary << "Backtest over test range [" << ds.split.test.begin << ", " << ds.split.test.end
            << ") — " << ds.split.test.size() << " weeks, " << n << " assets, tc=" << cfg.env_tc
            << ", seed=" << cfg.seed << "\n\n"
            << comparison_text_table(results, cfg.include_reported_rows);
    write_text_file(dir / "summary.txt", summary.str());
    written.push_back(dir / "summary.txt");

    update_run_manifest(cfg, written);
}

std::string cmd_compare(const ExperimentConfig& cfg) {
    const json j = read_json_file(comparison_json_path(cfg), "comparison artifact (run 'backtest' first)", true);
    std::ostringstream os;
    os << "strategy,ann_return,volatility,sharpe,mdd,source\n";
    for (const auto& row : j.at("rows")) {
        os << row.at("strategy").get<std::string>() << ',' << row.at("ann_return").get<double>()
           << ',' << row.at("volatility").get<double>() << ',';
        if (row.at("sharpe").is_null())
            os << "nan";
        else
            os << row.at("sharpe").get<double>();
        os << ',' << row.at("mdd").get<double>() << ',' << row.value("source", "computed") << '\n';
    }
    return os.str();
}

std::string cmd_report(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "portopt run report\n==================\n";
    const auto mpath = run_manifest_path(cfg);
    if (!std::filesystem::exists(mpath)) throw PrereqError("no run manifest yet: " + mpath.string());
    const json manifest = read_json_file(mpath, "run manifest", true);
    os << "seed: " << manifest.value("seed", 0) << "\n";
    if (std::filesystem::exists(dataset_path(cfg))) {
        const json ds = read_json_file(dataset_path(cfg), "dataset", false);
        os << "dataset: " << ds.at("assets").size() << " assets, " << ds.at("timestamps").size()
           << " weekly rows, hash " << ds.value("content_hash", "?").substr(0, 12) << "…\n";
    }
    os << "artifacts:\n";
    for (const auto& [path, hash] : manifest.at("artifacts").items())
        os << "  " << path << "  " << hash.get<std::string>().substr(0, 12) << "…\n";
    const auto summary = cfg.out_dir / "backtest" / "summary.txt";
    if (std::filesystem::exists(summary)) {
        std::ifstream in(summary);
        os << '\n' << std::string(std::istreambuf_iterator<char>(in), {});
    }
    return os.str();
}

}  // namespace portopt
