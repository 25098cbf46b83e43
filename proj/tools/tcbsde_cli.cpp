#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "tcbsde/errors.hpp"
#include "tcbsde/experiments.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::int64_t seed_override = -1;
    bool seed_present = false;
    int threads_override = 0;
    std::string out_override;
};

int run(tcbsde::ExperimentKind kind, const CommonArgs& args) {
    std::ifstream in(args.config_path);
    if (!in) {
        std::cerr << "error: cannot read config file '" << args.config_path << "'\n";
        return 2;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    tcbsde::ConfigResult parsed = tcbsde::parse_config(buffer.str());
    if (!parsed.ok()) {
        std::cerr << "error: invalid config:\n" << tcbsde::describe_errors(parsed.errors);
        return 2;
    }
    tcbsde::ExperimentConfig config = *parsed.config;
    if (config.kind != kind) {
        std::cerr << "error: config declares kind '" << tcbsde::kind_name(config.kind)
                  << "' but the subcommand is '" << tcbsde::kind_name(kind) << "'\n";
        return 2;
    }
    if (args.seed_present) config.seed = static_cast<std::uint64_t>(args.seed_override);
    if (args.threads_override > 0) config.threads = args.threads_override;
    if (!args.out_override.empty()) config.out_dir = args.out_override;

    try {
        const tcbsde::ExperimentReport report = tcbsde::run_experiment(config, std::cout);
        return tcbsde::experiment_exit_code(report);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo engine for BSDEs driven by time-changed Levy noise"};
    app.require_subcommand(1);

    const std::vector<tcbsde::ExperimentKind> kinds = {
        tcbsde::ExperimentKind::simulate_noise, tcbsde::ExperimentKind::isometry,
        tcbsde::ExperimentKind::char_function,  tcbsde::ExperimentKind::solve_bsde,
        tcbsde::ExperimentKind::linear_oracle,  tcbsde::ExperimentKind::comparison,
        tcbsde::ExperimentKind::mean_variance,  tcbsde::ExperimentKind::utility,
        tcbsde::ExperimentKind::max_principle};
    std::vector<std::pair<tcbsde::ExperimentKind, CommonArgs>> jobs;
    jobs.reserve(kinds.size());  // CLI11 keeps references into the elements
    for (tcbsde::ExperimentKind kind : kinds) {
        jobs.emplace_back(kind, CommonArgs{});
        CommonArgs& args = jobs.back().second;
        CLI::App* sub =
            app.add_subcommand(tcbsde::kind_name(kind), "run the " + tcbsde::kind_name(kind) +
                                                            " experiment from a config file");
        sub->add_option("--config", args.config_path, "experiment config file")->required();
        CLI::Option* seed = sub->add_option("--seed", args.seed_override,
                                            "override the config seed");
        sub->callback([&args, seed] { args.seed_present = seed->count() > 0; });
        sub->add_option("--threads", args.threads_override, "override the worker thread count");
        sub->add_option("--out", args.out_override, "override the output directory");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (auto& [kind, args] : jobs)
        if (app.get_subcommand(tcbsde::kind_name(kind))->parsed()) return run(kind, args);
    return 2;
}
