#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "issl/acceptance.hpp"
#include "issl/errors.hpp"
#include "issl/probes.hpp"
#include "issl/scenarios.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int jobs_from_env() {
    const char* env = std::getenv("ISSL_LAB_JOBS");
    if (!env) return 1;
    try {
        return std::max(1, std::stoi(env));
    } catch (...) {
        return 1;
    }
}

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw issl::ValidationError("cannot read config file " + path);
    nlohmann::json cfg;
    try {
        in >> cfg;
    } catch (const std::exception& e) {
        throw issl::ValidationError(std::string("config parse error: ") + e.what());
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"issl-lab: sample-optimal encoder laboratory"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a scenario and write CSV/JSON artifacts");
    std::string scenario, config_path, out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = jobs_from_env();
    run->add_option("scenario", scenario, "one of the known scenario names")->required();
    run->add_option("--config", config_path, "JSON config (a manifest.json also works)");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed, "master seed")->each([&](const std::string&) {
        seed_given = true;
    });
    run->add_option("--jobs", jobs, "parallel grid workers");

    // audit-encoder
    auto* audit = app.add_subcommand("audit-encoder",
                                     "audit an encoder table against a partition");
    std::string encoder_path, partition_path, family = "linear";
    double tol = 1e-9;
    long budget = 3000;
    std::uint64_t audit_seed = 0;
    audit->add_option("--encoder", encoder_path, "encoder CSV (header d=<int>)")->required();
    audit->add_option("--partition", partition_path, "partition JSON")->required();
    audit->add_option("--family", family, "linear | linear-nobias | mlp:w1,w2,...");
    audit->add_option("--tol", tol, "invariance tolerance");
    audit->add_option("--budget", budget, "probe search budget");
    audit->add_option("--seed", audit_seed, "probe search seed");

    // selftest
    app.add_subcommand("selftest", "run the acceptance suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (!issl::is_known_scenario(scenario)) {
                std::cerr << "error: unknown scenario \"" << scenario << "\"; expected one of:";
                for (const auto& name : issl::scenario_names()) std::cerr << " " << name;
                std::cerr << "\n";
                return kExitValidation;
            }
            nlohmann::json cfg = load_config(config_path);
            if (!seed_given && cfg.contains("seed") && cfg.contains("scenario"))
                seed = cfg.at("seed").get<std::uint64_t>();  // manifest replay
            issl::ScenarioOutcome outcome =
                issl::run_scenario(scenario, cfg, out_dir, seed, jobs);
            for (const std::string& f : outcome.files) std::cout << f << "\n";
            return kExitOk;
        }
        if (audit->parsed()) {
            issl::OptimalityReport r = issl::audit_encoder_files(
                encoder_path, partition_path, family, tol, budget, audit_seed);
            std::cout << issl::report_to_json(r) << "\n";
            return kExitOk;
        }
        // selftest
        bool ok = issl::acceptance::run_all(std::cout);
        return ok ? kExitOk : kExitRuntime;
    } catch (const issl::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
