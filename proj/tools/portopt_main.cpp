#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "portopt/errors.hpp"
#include "portopt/kernels.hpp"
#include "portopt/orchestrator.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config, "experiment config file (JSON)")->required();
    cmd->add_option("--seed", [&opts](const CLI::results_t& r) {
        try {
            std::size_t used = 0;
            opts.seed = std::stoull(r[0], &used);
            return used == r[0].size();
        } catch (const std::exception&) {
            return false;
        }
    }, "override the config seed");
    cmd->add_option("--out", [&opts](const CLI::results_t& r) {
        opts.out = r[0];
        return true;
    }, "override the output directory");
}

bool quiet() {
    const char* v = std::getenv("PORTOPT_LOG");
    return v != nullptr && std::string(v) == "quiet";
}

void info(const std::string& msg) {
    if (!quiet()) std::cerr << msg << '\n';
}

portopt::ExperimentConfig load(const CommonOpts& opts) {
    std::optional<std::filesystem::path> out;
    if (opts.out) out = *opts.out;
    return portopt::ExperimentConfig::load(opts.config, opts.seed, out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"portopt — hybrid forecast-plus-policy portfolio optimization"};
    app.require_subcommand(1);

    CommonOpts ingest_opts, train_opts, predict_opts, backtest_opts, report_opts, compare_opts;
    std::string train_stage = "all";

    auto* ingest = app.add_subcommand("ingest", "align prices, build weekly returns and the split");
    add_common(ingest, ingest_opts);
    auto* train = app.add_subcommand("train", "train forecasters and/or the allocator");
    add_common(train, train_opts);
    train->add_option("--stage", train_stage, "forecaster|allocator|all")->default_val("all");
    auto* predict = app.add_subcommand("predict", "write in-sample and walk-forward forecasts");
    add_common(predict, predict_opts);
    auto* backtest = app.add_subcommand("backtest", "evaluate strategies on the test range");
    add_common(backtest, backtest_opts);
    auto* report = app.add_subcommand("report", "print a human-readable run summary");
    add_common(report, report_opts);
    auto* compare = app.add_subcommand("compare", "print the comparison table incl. reported rows");
    add_common(compare, compare_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            const auto hash = portopt::cmd_ingest(load(ingest_opts));
            info("dataset written (hash " + hash.substr(0, 12) + ", kernels " +
                 portopt::kern::backend_name(portopt::kern::active_backend()) + ")");
        } else if (train->parsed()) {
            portopt::cmd_train(load(train_opts), train_stage);
            info("training artifacts written (stage " + train_stage + ")");
        } else if (predict->parsed()) {
            portopt::cmd_predict(load(predict_opts));
            info("forecast artifacts written");
        } else if (backtest->parsed()) {
            portopt::cmd_backtest(load(backtest_opts));
            info("backtest artifacts written");
        } else if (report->parsed()) {
            std::cout << portopt::cmd_report(load(report_opts));
        } else if (compare->parsed()) {
            std::cout << portopt::cmd_compare(load(compare_opts));
        }
    } catch (const portopt::InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const portopt::PrereqError& e) {
        std::cerr << "missing prerequisite: " << e.what() << '\n';
        return 3;
    } catch (const portopt::DivergenceError& e) {
        std::cerr << "numerical divergence: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
