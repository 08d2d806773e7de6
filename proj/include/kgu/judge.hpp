#pragma once

// Residual-inferability scoring of a target triple against its supporting
// subgraph: a deterministic rule-based judge over a configurable rubric, the
// prompt/parse halves of the remote LLM judge, and agreement analytics.
//
// The rule judge classifies evidence into three independently monotone
// components and takes their maximum, so deleting an edge can never raise
// the score:
//   direct    a subgraph edge s->o whose relation is similar to the target's;
//             its entropy tier, together with the number of valid support
//             paths, maps to a score in {3,4,5}
//   valid     a directed s->..->o path of 2..3 edges whose relation sequence
//             composes (per the rubric) to a relation similar to the
//             target's; tier of its weakest link (max entropy) maps to
//             {3,4,5}
//   weak      everything else: undirected s-o routes of <= 3 edges score 2
//             (or 1 if the only route's weakest link is high-tier),
//             connectivity beyond 3 hops scores 1, disjointness scores 0
//
// Duplicate (s, r, o) edges are collapsed to the minimum entropy before any
// analysis, making the verdict invariant to edge order and duplication.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgu/belief.hpp"
#include "kgu/extract.hpp"

namespace kgu {

// Entropy tiers, half-open on the right: [0, b0) low, [b0, b1) moderately
// low, [b1, b2) relatively high, [b2, inf) high.
enum class Tier { Low, ModeratelyLow, RelativelyHigh, High };
std::string_view to_string(Tier t);

struct RubricConfig {
    // Closed under reflexivity and symmetry after normalize()/load.
    std::map<std::string, std::set<std::string>> similarity;
    // Relation sequence (length 2 or 3) -> implied relation.
    std::map<std::vector<std::string>, std::string> compositions;
    std::array<double, 3> tier_bounds{0.25, 0.35, 0.55};

    void normalize();
    void validate() const;  // DomainError: bounds not strictly increasing/non-negative, bad sequence length
    bool similar(const std::string& a, const std::string& b) const;
    std::optional<std::string> implied(const std::vector<std::string>& relation_sequence) const;
    Tier tier_of(double entropy_bits) const;

    // Ships the similarity/composition tables the worked examples and the
    // bundled worlds rely on.
    static RubricConfig defaults();

    static RubricConfig from_json(const nlohmann::json& j);  // normalized + validated
    static RubricConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

struct DirectPath {
    ConfidenceEdge edge;
    Tier tier;
};

struct SupportPath {
    std::vector<ConfidenceEdge> edges;  // 2..3 edges, directed head -> tail
    Tier tier;                          // weakest link (max entropy over edges)
    bool valid = false;
    std::string rule;  // composition used; empty for partial paths
};

struct JudgeVerdict {
    int score = 0;
    std::vector<DirectPath> direct_paths;
    std::vector<SupportPath> support_paths;
    std::string rationale;
    nlohmann::json to_json() const;
};

// subgraph.target must equal target (DomainError otherwise). Total: every
// subgraph yields a verdict; empty -> 0.
JudgeVerdict rule_judge(const SupportingSubgraph& subgraph, const LabelTriple& target,
                        const RubricConfig& rubric);

// The judge instruction template with one "(s, r, o) with entropy X.XXX" line
// per edge (3 decimals) and the target triple substituted.
std::string render_judge_prompt(const SupportingSubgraph& subgraph, const LabelTriple& target);

// Integer after the last "Final Confidence Score" marker, case-insensitive,
// tolerating bold markers and punctuation. Outside 0..5 or absent: ParseError.
int parse_judge_response(std::string_view text);

struct AgreementReport {
    std::vector<double> mean_a, mean_b, abs_gap;  // per item
    std::optional<double> pearson, spearman;      // nullopt when undefined
    std::string note;                             // reason when undefined
    nlohmann::json to_json() const;
};

// ratings_*[i] holds one or more ratings for item i; item counts must match
// and every item needs at least one rating per side (DomainError).
AgreementReport agreement(const std::vector<std::vector<double>>& ratings_a,
                          const std::vector<std::vector<double>>& ratings_b);

}  // namespace kgu
