#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgu/extract.hpp"
#include "kgu/remote.hpp"
#include "kgu/unlearn.hpp"

namespace kgu {

enum class JudgeBackend { Rule, Remote };
std::string_view to_string(JudgeBackend b);

// One run's knobs, read from a sectioned key = value text file. Paths are
// resolved relative to the config file's directory. Lines whose first
// non-blank character is '#' or ';' are comments; values are taken verbatim
// after the '=' (so an operator pipeline may contain ';').
struct RunConfig {
    // [paths]
    std::filesystem::path reference_graph;
    std::filesystem::path belief_model;  // synthetic oracle JSON; mutually exclusive
    std::string probe_endpoint;          // with a remote probe endpoint URL
    std::filesystem::path output_dir;

    // [extraction] k, u_star, candidate_cap, workers
    ExtractionConfig extraction;

    // [rubric] path; empty means the built-in default rubric
    std::filesystem::path rubric_path;

    // [forget]
    std::size_t forget_n = 200;
    double forget_bound = 1.0;
    std::uint64_t seed = 42;

    // [operators]
    std::string operator_pipeline = "instance_erase(strength=1.0)";
    std::vector<UnlearnOperatorSpec> operators;  // parsed form of the above

    // [loc]
    std::size_t loc_multiplier = 10;
    bool loc_other_consistent = false;

    // [judge]
    JudgeBackend judge_backend = JudgeBackend::Rule;
    int judge_samples = 3;
    std::string judge_endpoint;

    // [eval] residual-inferability bound: post scores <= gamma count as
    // unlearned. 2 is the largest score that still certifies "no valid
    // reasoning path survives" under the rubric, hence the default.
    double gamma = 2.0;

    // [remote] shared transport knobs for both endpoints (url comes from
    // probe_endpoint / judge_endpoint above)
    RemoteOptions remote;

    // [calibration] logits CSV for the calibrate stage (optional)
    std::filesystem::path calibration_logits;

    // [template] validation TSV and template name for validate-template
    std::filesystem::path template_validation;
    std::string template_name = "qwen";

    // Syntax and value conversion only; no filesystem access.
    static RunConfig parse(std::string_view text, const std::filesystem::path& base_dir);
    // parse + validate.
    static RunConfig load(const std::filesystem::path& path);

    // Semantic checks: required fields present, numeric domains, referenced
    // files exist. Throws ConfigError.
    void validate() const;

    nlohmann::json to_json() const;  // manifest snapshot
};

}  // namespace kgu
