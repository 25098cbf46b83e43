#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tcbsde/experiments.hpp"

using namespace tcbsde;

namespace {

std::string minimal_config = R"(
[experiment]
kind = simulate-noise
seed = 42

[grid]
T = 1.0
N = 8

[batch]
M = 64

[levy]
atoms = 1:1
)";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

TEST_CASE("minimal config parses with documented defaults") {
    const ConfigResult result = parse_config(minimal_config);
    REQUIRE(result.ok());
    const ExperimentConfig& config = *result.config;
    CHECK(config.kind == ExperimentKind::simulate_noise);
    CHECK(config.seed == 42);
    CHECK(config.regression.degree == 2);
    CHECK(config.regression.ridge == 1e-8);
    CHECK(config.regression.filtration == Filtration::G);
    CHECK(config.inner_paths == 256);
    CHECK(config.threads == 1);
}

TEST_CASE("missing seed is reported by name") {
    const ConfigResult result = parse_config(R"(
[experiment]
kind = isometry
[grid]
T = 1.0
N = 4
[batch]
M = 16
[levy]
atoms = 1:1
)");
    REQUIRE_FALSE(result.ok());
    bool found = false;
    for (const auto& e : result.errors)
        if (e.message.find("seed") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("all errors are collected with line numbers") {
    const ConfigResult result = parse_config(R"([experiment]
kind = no-such-kind
seed = abc
threads = 0
[grid]
T = -1
N = 0
[batch]
M = 1
[mystery]
key = 1
)");
    REQUIRE_FALSE(result.ok());
    CHECK(result.errors.size() >= 6);
    int with_lines = 0;
    for (const auto& e : result.errors)
        if (e.line > 0) ++with_lines;
    CHECK(with_lines >= 5);
    bool m_flagged = false;
    for (const auto& e : result.errors)
        if (e.message.find("batch.M") != std::string::npos ||
            e.message.find("variance") != std::string::npos)
            m_flagged = true;
    CHECK(m_flagged);
}

TEST_CASE("experiments write byte-identical artifacts across reruns and thread counts") {
    const std::string base = R"(
[experiment]
kind = isometry
seed = 7
[grid]
T = 1.0
N = 10
[batch]
M = 2000
[levy]
atoms = 1:1
)";
    const ConfigResult parsed = parse_config(base);
    REQUIRE(parsed.ok());

    auto run_into = [&](const std::string& dir, int threads) {
        ExperimentConfig config = *parsed.config;
        config.out_dir = (std::filesystem::temp_directory_path() / dir).string();
        std::filesystem::remove_all(config.out_dir);
        config.threads = threads;
        std::ostringstream sink;
        const ExperimentReport report = run_experiment(config, sink);
        REQUIRE(report.pass());
        REQUIRE(!report.artifacts.empty());
        return read_file(report.artifacts.front());
    };

    const std::string first = run_into("tcbsde_det_a", 1);
    const std::string second = run_into("tcbsde_det_b", 1);
    const std::string threaded = run_into("tcbsde_det_c", 4);
    CHECK(first == second);
    CHECK(first == threaded);
    CHECK(!first.empty());
}

TEST_CASE("utility experiments run end to end") {
    const std::string base = R"(
[experiment]
kind = utility
seed = 114
[grid]
T = 1.0
N = 10
[batch]
M = 4000
[intensity.B]
value = 1.0
[intensity.H]
value = 1.0
[control]
rho = 0.0
alpha = 0.1
psi0 = 0.2
psi_jump = 0.0
k = 1.2
x0 = 1.0
utility = exp-utility
gamma = 1.0
)";
    const ConfigResult parsed = parse_config(base);
    REQUIRE(parsed.ok());
    ExperimentConfig config = *parsed.config;
    config.out_dir = (std::filesystem::temp_directory_path() / "tcbsde_utility").string();
    std::ostringstream sink;
    CHECK(run_experiment(config, sink).pass());

    config.utility = "quadratic";
    CHECK(run_experiment(config, sink).pass());
}

TEST_CASE("experiment report carries failing checks into the exit code") {
    ExperimentReport report;
    report.checks.push_back({"ok", 0.0, 1.0, true, ""});
    CHECK(experiment_exit_code(report) == 0);
    report.checks.push_back({"bad", 2.0, 1.0, false, ""});
    CHECK(experiment_exit_code(report) == 1);
}
