#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "issl/objectives.hpp"
#include "issl/probes.hpp"

namespace issl {

// Scenario names: theorem1, excess-risk, coupon, collapse, dissl, cissl,
// dim-sweep, aug-sweep, probe-sweep.
bool is_known_scenario(const std::string& name);
std::vector<std::string> scenario_names();

struct ScenarioOutcome {
    nlohmann::json summary;
    std::vector<std::string> files;  // paths written under out_dir
};

// Validates the config (unknown keys are errors), runs the scenario, writes
// `<scenario>_<run id>.csv` artifacts plus manifest.json into out_dir.
// Accepts a previously written manifest as the config (round-trip).
ScenarioOutcome run_scenario(const std::string& name, nlohmann::json config,
                             const std::string& out_dir, std::uint64_t seed, int jobs);

// Direct entry points for the training scenarios; used by the CLI runner and
// the acceptance suite alike.
nlohmann::json dissl_scenario_summary(nlohmann::json params, std::uint64_t seed,
                                      Trace* trace_out = nullptr);
nlohmann::json cissl_scenario_summary(nlohmann::json params, std::uint64_t seed,
                                      Trace* trace_out = nullptr);

// "linear", "linear-nobias", or "mlp:w1,w2,...".
ProbeFamily parse_family(const std::string& spec);

OptimalityReport audit_encoder_files(const std::string& encoder_csv_path,
                                     const std::string& partition_json_path,
                                     const std::string& family_spec, double tol,
                                     long budget, std::uint64_t seed);

// Trainer trace serialized with the fixed monitor column schema.
std::string trace_to_csv(const Trace& trace);

// Lossless double formatting used for every emitted number.
std::string format_g17(double v);

}  // namespace issl
