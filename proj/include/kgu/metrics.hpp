#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgu/belief.hpp"
#include "kgu/extract.hpp"
#include "kgu/judge.hpp"
#include "kgu/ref_graph.hpp"
#include "kgu/unlearn.hpp"

namespace kgu {

// Everything a single forget-set target contributes to the evaluation: judge
// scores over the pre/post supporting subgraphs plus the raw pre/post probes
// of the target edge itself (the instance-level view).
struct TargetEvaluation {
    LabelTriple target;
    int pre_score = 0;   // rule judge on pre_subgraph, 0..5
    int post_score = 0;  // rule judge on post_subgraph, 0..5
    SupportingSubgraph pre_subgraph;
    SupportingSubgraph post_subgraph;
    ProbeResult pre_instance;
    ProbeResult post_instance;
};

enum class UesMode { Subgraph, Instance };

// Instance-level inferability rating: the rule judge run on the subgraph
// containing only the target edge itself, 0 when the probe is not admitted
// at u_star. Shares the 0..5 scale with the subgraph mode by construction.
int instance_score(const LabelTriple& target, const ProbeResult& probe,
                   const RubricConfig& rubric, double u_star);

// Mean over targets of (pre - post) / pre. Instance mode replaces the stored
// judge scores with instance_score of the pre/post probes. A zero pre value
// is a DomainError naming the offending target; empty input is a DomainError.
double ues(std::span<const TargetEvaluation> evals, UesMode mode,
           const RubricConfig& rubric, double u_star);

// Mean over targets of |edges(pre) ∩ edges(post)| / |edges(pre)|, edge
// identity (s, r, o) ignoring entropy. Targets with an empty pre-subgraph are
// excluded with a warning; if every target is excluded that is a DomainError.
double recall(std::span<const TargetEvaluation> evals,
              std::vector<std::string>* warnings = nullptr);

struct LocRecord {
    LabelTriple triple;
    Choice pre_label = Choice::Other;
    Choice post_label = Choice::Other;
};

// 4x4 confusion counts indexed by Choice order Yes, No, Unknown, Other.
using ConfusionMatrix = std::array<std::array<std::uint64_t, 4>, 4>;

struct LocResult {
    double value = 0.0;
    ConfusionMatrix confusion{};

    nlohmann::json to_json() const;
};

// Fraction of records whose label is unchanged. Other -> Other counts as
// inconsistent by default: a pre-unlearning Other reflects probe failure,
// not knowledge, so it cannot evidence retention. Pass other_consistent to
// flip that. Empty input is a DomainError.
LocResult loc(std::span<const LocRecord> records, bool other_consistent = false);

// Seeded plan of reference triples to probe for Loc: triples whose endpoints
// both lie within 3 undirected hops of any target endpoint, minus the
// targets themselves and every pre-subgraph edge in `exclusion`. Wants
// multiplier * |targets| triples; a short pool yields all of it plus a
// warning. Identical seeds give identical plans.
std::vector<Triple> sample_loc_neighbors(const ReferenceGraph& ref, const ForgetSet& targets,
                                         std::size_t multiplier,
                                         const std::set<LabelTriple>& exclusion,
                                         std::uint64_t seed,
                                         std::vector<std::string>* warnings = nullptr);

// Epoch picker over a per-epoch Loc series, 1-based: the last epoch with
// loc > 0.8 when one exists, otherwise the earliest maximum.
std::size_t select_epoch(std::span<const double> loc_series);

struct GammaCheck {
    double gamma = 0.0;
    std::size_t passed = 0;  // targets with post_score <= gamma
    std::size_t failed = 0;

    nlohmann::json to_json() const;
};

// Counts targets whose post-unlearning subgraph score is bounded by gamma.
// gamma must lie in [0, 5].
GammaCheck gamma_check(std::span<const TargetEvaluation> evals, double gamma);

struct TargetRow {
    LabelTriple target;
    int pre_score = 0, post_score = 0;
    int pre_instance = 0, post_instance = 0;
    std::size_t pre_edges = 0, post_edges = 0, kept_edges = 0;
    std::optional<double> recall;  // absent when the pre-subgraph was empty
    bool gamma_pass = false;
};

struct EvalReport {
    double ues_subgraph = 0.0;
    double ues_instance = 0.0;
    double recall = 0.0;
    double loc = 0.0;
    bool loc_other_consistent = false;
    ConfusionMatrix confusion{};
    std::vector<TargetRow> targets;
    GammaCheck gamma;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    std::string targets_csv() const;    // per-target rows
    std::string confusion_csv() const;  // 4x4 label matrix
    std::string histogram_csv() const;  // score-distribution shift, 0..5
};

// Full aggregation over one run's targets and Loc records. Empty loc_records
// produce loc = 0 with a warning instead of an error so a run whose entire
// neighborhood was excluded still reports.
EvalReport evaluate(std::span<const TargetEvaluation> evals,
                    std::span<const LocRecord> loc_records, const RubricConfig& rubric,
                    double u_star, double gamma, bool loc_other_consistent = false);

}  // namespace kgu
