#pragma once

// Supporting-subgraph extraction around a target triple.
//
// Four phases over the reference graph's k-hop neighborhoods, probing the
// belief oracle and keeping admitted edges:
//   1  (s, r', v)  for v in k_hop(s) \ {s, o}            admitted v -> N_s*
//   2  (v, r'', w) for v in N_s*, w in k_hop(v) \ ({s, o, v} u N_s*)
//                                                        admitted inserts v -> N_e*
//   3  (v, r', o)  for v in (N_s* u N_e* u {s}) \ {o}    admitted v -> N_o*
//   4  prune to fixpoint: keep (h, r', t) iff t is o or t in N_o*, inserting
//      h into N_o*. The fixpoint is order-independent; the surviving edges
//      are exactly the working edges whose tail reaches o.
//
// Phase 2 inserts the frontier node v (not w) into N_e*, and its candidate
// set excludes o and N_s*; both follow the published procedure verbatim, so
// the output is not "all length-<=3 paths". declarative_reference_extract
// re-expresses the same contract as set comprehensions and is used as the
// equivalence oracle in tests.
//
// A subject with an empty k-hop neighborhood has no candidate entities at
// all, so extraction exits before Phase 1 with an empty subgraph and a probe
// budget of zero; the direct-edge probe (s, r', o) still happens whenever o
// itself is a neighbor, via Phase 3's {s} frontier term.
//
// Candidate enumeration is canonically ordered (entity label, relation
// label), and parallel probing writes into index-addressed slots, so results
// are identical for any worker count.

#include <cstddef>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kgu/belief.hpp"
#include "kgu/ref_graph.hpp"

namespace kgu {

struct ConfidenceEdge {
    LabelTriple triple;
    double entropy_bits = 0.0;
    AnswerDistribution dist;
    auto operator<=>(const ConfidenceEdge&) const = default;
};

struct ExtractionConfig {
    int k = 3;                     // hop bound, >= 1
    double u_star = 1.0;           // admission entropy bound, in (0, log2 3]
    std::size_t candidate_cap = 0; // max candidate pairs per phase, 0 = unlimited
    int max_path_len = 3;          // fixed by the procedure; validated
    EdgeSense sense = EdgeSense::Undirected;
    int workers = 1;
    void validate() const;  // DomainError
};

struct SupportingSubgraph {
    LabelTriple target;
    std::vector<ConfidenceEdge> edges;  // sorted by (subject, relation, object)
    std::vector<std::string> n_s_star, n_e_star, n_o_star;  // sorted labels

    nlohmann::json to_json() const;
    static SupportingSubgraph from_json(const nlohmann::json& j);
};

// target.subject != target.object (DomainError); ids must be valid.
SupportingSubgraph extract(const BeliefOracle& oracle, const ReferenceGraph& ref, Triple target,
                           const ExtractionConfig& config);

// Slow, obviously-correct restatement: phase sets built as comprehensions,
// the prune as reverse reachability from the object. Must agree with
// extract() exactly.
SupportingSubgraph declarative_reference_extract(const BeliefOracle& oracle, const ReferenceGraph& ref,
                                                 Triple target, const ExtractionConfig& config);

struct ProbeBudget {
    std::size_t phase1 = 0, phase2 = 0, phase3 = 0;
    std::size_t total() const { return phase1 + phase2 + phase3; }
};

// Number of probe calls the phases issue given candidate sets from ref:
// phase 1 exact regardless of oracle answers, phases 2-3 upper bounds
// assuming every probe admits. Equals the realized probe count under an
// all-admitting oracle.
ProbeBudget probe_budget(const ReferenceGraph& ref, Triple target, const ExtractionConfig& config);

}  // namespace kgu
