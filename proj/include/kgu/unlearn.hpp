#pragma once

// Desk-scale emulation of post-unlearning belief states: seeded, per-triple
// perturbations of a synthetic belief model. None of these reproduce a
// gradient-based method; they produce the belief-shift shapes the evaluation
// cares about (target erased, correlated neighborhood damaged, utility
// degraded).
//
//   instance_erase     drain p_yes by `strength`, moving the mass to the
//                      destination choice (Unknown by default); strength 1
//                      makes argmax != Yes, so the target fails admission at
//                      every threshold
//   correlated_damage  the same drain applied to the seeded `fraction` of
//                      stored non-target triples whose endpoints BOTH lie
//                      within `radius` undirected hops of a target endpoint
//                      in the reference graph
//   utility_noise      for the seeded `fraction` of stored non-target
//                      triples, move `strength` of the named mass into
//                      p_other (instruction-failure emulation)
//
// All decisions are per-triple hashes of (triple, seed): applying an
// operator is order-independent and reruns are bit-identical. Untouched
// triples keep their exact stored bytes.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kgu/belief.hpp"
#include "kgu/ref_graph.hpp"

namespace kgu {

enum class OperatorKind { InstanceErase, CorrelatedDamage, UtilityNoise };
std::string_view to_string(OperatorKind k);

enum class MassDestination { Unknown, No };

struct UnlearnOperatorSpec {
    OperatorKind kind = OperatorKind::InstanceErase;
    double strength = 1.0;  // [0, 1]
    int radius = 1;         // >= 1; correlated_damage only
    double fraction = 1.0;  // [0, 1]; correlated_damage and utility_noise
    std::uint64_t seed = 0;
    MassDestination destination = MassDestination::Unknown;

    void validate() const;  // DomainError
};

// Pipeline syntax: `name(key=value, ...)` entries separated by ';', e.g.
//   instance_erase(strength=1); correlated_damage(radius=1, fraction=0.8, strength=0.8, seed=7)
// Unknown operator or key, malformed value, or out-of-range parameter throw
// ConfigError. Operators apply left to right.
std::vector<UnlearnOperatorSpec> parse_operator_pipeline(std::string_view text);
std::string format_operator(const UnlearnOperatorSpec& op);

struct ForgetSet {
    std::vector<Triple> targets;  // canonically sorted, no duplicates
    double bound = 1.0;           // admission entropy bound used at selection

    std::vector<LabelTriple> labels(const ReferenceGraph& ref) const;
};

// n distinct reference triples the oracle admits at `bound`, drawn seeded and
// without replacement, returned canonically sorted. Fewer than n qualifying
// triples: SamplingError naming the qualifying count. n < 1: DomainError.
ForgetSet sample_forget_set(const BeliefOracle& oracle, const ReferenceGraph& ref, std::size_t n,
                            double bound, std::uint64_t seed);

SyntheticBeliefModel apply_operator(const SyntheticBeliefModel& base, const UnlearnOperatorSpec& op,
                                    const ForgetSet& forget, const ReferenceGraph& ref);

SyntheticBeliefModel apply_pipeline(const SyntheticBeliefModel& base,
                                    const std::vector<UnlearnOperatorSpec>& ops,
                                    const ForgetSet& forget, const ReferenceGraph& ref);

}  // namespace kgu
