#include "kgu/extract.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iterator>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>
#include <utility>

#include <nlohmann/json.hpp>

#include "kgu/error.hpp"

namespace kgu {

namespace {

constexpr double kMaxEntropyBits = 1.5849625007211562;  // log2 3

struct WorkingEdge {
    Triple triple;
    ProbeResult result;
};

LabelTriple label_of(const ReferenceGraph& ref, Triple t) {
    return {ref.entity_label(t.subject), ref.relation_label(t.relation), ref.entity_label(t.object)};
}

void sort_unique(std::vector<EntityId>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::vector<std::string> labels_of(const ReferenceGraph& ref, const std::vector<EntityId>& ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (EntityId id : ids) out.push_back(ref.entity_label(id));
    return out;
}

using CandidatePair = std::pair<EntityId, EntityId>;  // (head, tail)

void apply_cap(std::vector<CandidatePair>& pairs, std::size_t cap) {
    if (cap > 0 && pairs.size() > cap) pairs.resize(cap);
}

// Neighborhood iteration is in id order, which equals label order, so the
// pair lists below are already in canonical truncation order.
std::vector<CandidatePair> phase1_pairs(const ReferenceGraph& ref, Triple target,
                                        const ExtractionConfig& config) {
    std::vector<CandidatePair> pairs;
    for (EntityId v : ref.k_hop_neighbors(target.subject, config.k, config.sense))
        if (v != target.object) pairs.emplace_back(target.subject, v);
    apply_cap(pairs, config.candidate_cap);
    return pairs;
}

std::vector<CandidatePair> phase2_pairs(const ReferenceGraph& ref, Triple target,
                                        const ExtractionConfig& config,
                                        const std::vector<EntityId>& n_s_star) {
    std::unordered_set<EntityId> excluded(n_s_star.begin(), n_s_star.end());
    excluded.insert(target.subject);
    excluded.insert(target.object);
    std::vector<CandidatePair> pairs;
    for (EntityId v : n_s_star)
        for (EntityId w : ref.k_hop_neighbors(v, config.k, config.sense))
            if (!excluded.contains(w)) pairs.emplace_back(v, w);
    apply_cap(pairs, config.candidate_cap);
    return pairs;
}

std::vector<CandidatePair> phase3_pairs(Triple target, const ExtractionConfig& config,
                                        const std::vector<EntityId>& n_s_star,
                                        const std::vector<EntityId>& n_e_star) {
    std::vector<EntityId> frontier;
    std::set_union(n_s_star.begin(), n_s_star.end(), n_e_star.begin(), n_e_star.end(),
                   std::back_inserter(frontier));
    auto pos = std::lower_bound(frontier.begin(), frontier.end(), target.subject);
    if (pos == frontier.end() || *pos != target.subject) frontier.insert(pos, target.subject);
    std::vector<CandidatePair> pairs;
    for (EntityId v : frontier)
        if (v != target.object) pairs.emplace_back(v, target.object);
    apply_cap(pairs, config.candidate_cap);
    return pairs;
}

std::vector<Triple> pair_probes(const std::vector<CandidatePair>& pairs, std::size_t relation_count) {
    std::vector<Triple> probes;
    probes.reserve(pairs.size() * relation_count);
    for (const CandidatePair& p : pairs)
        for (std::size_t r = 0; r < relation_count; ++r)
            probes.push_back({p.first, static_cast<RelationId>(r), p.second});
    return probes;
}

// Slot-indexed so the result vector is identical for any worker count.
std::vector<ProbeResult> run_probes(const BeliefOracle& oracle, const ReferenceGraph& ref,
                                    const std::vector<Triple>& probes, int workers) {
    std::vector<ProbeResult> results(probes.size());
    if (probes.empty()) return results;
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), probes.size());
    if (n_workers == 1) {
        for (std::size_t i = 0; i < probes.size(); ++i) results[i] = oracle.probe(label_of(ref, probes[i]));
        return results;
    }
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= probes.size()) return;
            try {
                results[i] = oracle.probe(label_of(ref, probes[i]));
            } catch (...) {
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
                cursor.store(probes.size());
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

void check_target(const ReferenceGraph& ref, Triple target) {
    (void)label_of(ref, target);  // LookupError on invalid ids
    if (target.subject == target.object)
        throw DomainError("degenerate target: subject equals object");
}

}  // namespace

void ExtractionConfig::validate() const {
    if (k < 1) throw DomainError("extraction k must be >= 1");
    if (!(u_star > 0.0) || u_star > kMaxEntropyBits + 1e-12)
        throw DomainError("u_star must lie in (0, log2 3]");
    if (max_path_len != 3) throw DomainError("max_path_len is fixed at 3 in this release");
    if (workers < 1) throw DomainError("workers must be >= 1");
}

SupportingSubgraph extract(const BeliefOracle& oracle, const ReferenceGraph& ref, Triple target,
                           const ExtractionConfig& config) {
    config.validate();
    check_target(ref, target);

    SupportingSubgraph out;
    out.target = label_of(ref, target);
    if (ref.k_hop_neighbors(target.subject, config.k, config.sense).empty()) return out;

    const std::size_t n_rel = ref.relation_count();
    std::vector<WorkingEdge> working;
    auto collect = [&](const std::vector<Triple>& probes, const std::vector<ProbeResult>& results,
                       auto&& on_admit) {
        for (std::size_t i = 0; i < probes.size(); ++i)
            if (admit(results[i], config.u_star)) {
                working.push_back({probes[i], results[i]});
                on_admit(probes[i]);
            }
    };

    const auto pairs1 = phase1_pairs(ref, target, config);
    const auto probes1 = pair_probes(pairs1, n_rel);
    const auto results1 = run_probes(oracle, ref, probes1, config.workers);
    std::vector<EntityId> n_s_star;
    collect(probes1, results1, [&](Triple t) { n_s_star.push_back(t.object); });
    sort_unique(n_s_star);

    // Phase 2 records the frontier node v, not the admitted tail w.
    const auto pairs2 = phase2_pairs(ref, target, config, n_s_star);
    const auto probes2 = pair_probes(pairs2, n_rel);
    const auto results2 = run_probes(oracle, ref, probes2, config.workers);
    std::vector<EntityId> n_e_star;
    collect(probes2, results2, [&](Triple t) { n_e_star.push_back(t.subject); });
    sort_unique(n_e_star);

    const auto pairs3 = phase3_pairs(target, config, n_s_star, n_e_star);
    const auto probes3 = pair_probes(pairs3, n_rel);
    const auto results3 = run_probes(oracle, ref, probes3, config.workers);
    collect(probes3, results3, [](Triple) {});

    // Phase 4 fixpoint: an edge survives iff its tail reaches o over working
    // edges; the final N_o* is the head set of the survivors.
    std::unordered_set<EntityId> reaches_o{target.object};
    for (bool changed = true; changed;) {
        changed = false;
        for (const WorkingEdge& e : working)
            if (reaches_o.contains(e.triple.object) && reaches_o.insert(e.triple.subject).second)
                changed = true;
    }
    std::vector<WorkingEdge> kept;
    std::vector<EntityId> n_o_star;
    for (const WorkingEdge& e : working)
        if (reaches_o.contains(e.triple.object)) {
            kept.push_back(e);
            n_o_star.push_back(e.triple.subject);
        }
    sort_unique(n_o_star);
    std::sort(kept.begin(), kept.end(),
              [](const WorkingEdge& a, const WorkingEdge& b) { return a.triple < b.triple; });

    out.edges.reserve(kept.size());
    for (const WorkingEdge& e : kept)
        out.edges.push_back({label_of(ref, e.triple), e.result.entropy_bits, e.result.dist});
    out.n_s_star = labels_of(ref, n_s_star);
    out.n_e_star = labels_of(ref, n_e_star);
    out.n_o_star = labels_of(ref, n_o_star);
    return out;
}

SupportingSubgraph declarative_reference_extract(const BeliefOracle& oracle, const ReferenceGraph& ref,
                                                 Triple target, const ExtractionConfig& config) {
    config.validate();
    check_target(ref, target);

    SupportingSubgraph out;
    out.target = label_of(ref, target);
    const EntityId s = target.subject, o = target.object;
    if (ref.k_hop_neighbors(s, config.k, config.sense).empty()) return out;

    const std::size_t n_rel = ref.relation_count();
    const std::size_t cap = config.candidate_cap;

    auto probe_one = [&](EntityId h, std::size_t r, EntityId t) {
        return oracle.probe(label_of(ref, {h, static_cast<RelationId>(r), t}));
    };
    auto admitted_edges = [&](const std::vector<CandidatePair>& pairs) {
        std::vector<WorkingEdge> edges;
        for (const auto& [h, t] : pairs)
            for (std::size_t r = 0; r < n_rel; ++r) {
                ProbeResult pr = probe_one(h, r, t);
                if (admit(pr, config.u_star))
                    edges.push_back({{h, static_cast<RelationId>(r), t}, pr});
            }
        return edges;
    };
    auto truncated = [&](std::vector<CandidatePair> pairs) {
        if (cap > 0 && pairs.size() > cap) pairs.resize(cap);
        return pairs;
    };

    // Phase 1: { (s, r', v) admitted : v in khop(s) \ {s, o}, r' in R }
    std::vector<CandidatePair> pairs1;
    for (EntityId v : ref.k_hop_neighbors(s, config.k, config.sense))
        if (v != o) pairs1.emplace_back(s, v);
    const std::vector<WorkingEdge> edges1 = admitted_edges(truncated(std::move(pairs1)));
    std::set<EntityId> n_s;
    for (const WorkingEdge& e : edges1) n_s.insert(e.triple.object);

    // Phase 2: { (v, r'', w) admitted : v in N_s*, w in khop(v) \ ({s,o,v} u N_s*) }
    std::vector<CandidatePair> pairs2;
    for (EntityId v : n_s)
        for (EntityId w : ref.k_hop_neighbors(v, config.k, config.sense))
            if (w != s && w != o && w != v && !n_s.contains(w)) pairs2.emplace_back(v, w);
    const std::vector<WorkingEdge> edges2 = admitted_edges(truncated(std::move(pairs2)));
    std::set<EntityId> n_e;
    for (const WorkingEdge& e : edges2) n_e.insert(e.triple.subject);

    // Phase 3: { (v, r', o) admitted : v in (N_s* u N_e* u {s}) \ {o} }
    std::set<EntityId> frontier = n_s;
    frontier.insert(n_e.begin(), n_e.end());
    frontier.insert(s);
    frontier.erase(o);
    std::vector<CandidatePair> pairs3;
    for (EntityId v : frontier) pairs3.emplace_back(v, o);
    const std::vector<WorkingEdge> edges3 = admitted_edges(truncated(std::move(pairs3)));

    std::vector<WorkingEdge> working = edges1;
    working.insert(working.end(), edges2.begin(), edges2.end());
    working.insert(working.end(), edges3.begin(), edges3.end());

    // Phase 4 as path filtering: keep an edge iff a directed walk over the
    // working set leads from its tail to o.
    auto tail_reaches_o = [&](EntityId start) {
        if (start == o) return true;
        std::set<EntityId> visited{start};
        std::vector<EntityId> stack{start};
        while (!stack.empty()) {
            EntityId cur = stack.back();
            stack.pop_back();
            for (const WorkingEdge& e : working)
                if (e.triple.subject == cur) {
                    if (e.triple.object == o) return true;
                    if (visited.insert(e.triple.object).second) stack.push_back(e.triple.object);
                }
        }
        return false;
    };

    std::vector<WorkingEdge> kept;
    std::set<EntityId> n_o;
    for (const WorkingEdge& e : working)
        if (tail_reaches_o(e.triple.object)) {
            kept.push_back(e);
            n_o.insert(e.triple.subject);
        }
    std::sort(kept.begin(), kept.end(),
              [](const WorkingEdge& a, const WorkingEdge& b) { return a.triple < b.triple; });

    for (const WorkingEdge& e : kept)
        out.edges.push_back({label_of(ref, e.triple), e.result.entropy_bits, e.result.dist});
    out.n_s_star = labels_of(ref, {n_s.begin(), n_s.end()});
    out.n_e_star = labels_of(ref, {n_e.begin(), n_e.end()});
    out.n_o_star = labels_of(ref, {n_o.begin(), n_o.end()});
    return out;
}

ProbeBudget probe_budget(const ReferenceGraph& ref, Triple target, const ExtractionConfig& config) {
    config.validate();
    (void)label_of(ref, target);

    ProbeBudget budget;
    if (ref.k_hop_neighbors(target.subject, config.k, config.sense).empty()) return budget;

    const std::size_t n_rel = ref.relation_count();
    const auto pairs1 = phase1_pairs(ref, target, config);
    budget.phase1 = pairs1.size() * n_rel;

    // Upper bound: assume every Phase 1 candidate is admitted. Phase 2 only
    // ever inserts members of N_s*, so the Phase 3 frontier is the same set.
    std::vector<EntityId> n_s_assumed;
    n_s_assumed.reserve(pairs1.size());
    for (const CandidatePair& p : pairs1) n_s_assumed.push_back(p.second);
    sort_unique(n_s_assumed);

    budget.phase2 = phase2_pairs(ref, target, config, n_s_assumed).size() * n_rel;
    budget.phase3 = phase3_pairs(target, config, n_s_assumed, {}).size() * n_rel;
    return budget;
}

nlohmann::json SupportingSubgraph::to_json() const {
    nlohmann::json edge_array = nlohmann::json::array();
    for (const ConfidenceEdge& e : edges)
        edge_array.push_back({{"s", e.triple.subject},
                              {"r", e.triple.relation},
                              {"o", e.triple.object},
                              {"entropy", e.entropy_bits},
                              {"p_yes", e.dist.yes},
                              {"p_no", e.dist.no},
                              {"p_unknown", e.dist.unknown}});
    return {{"target", {{"s", target.subject}, {"r", target.relation}, {"o", target.object}}},
            {"edges", std::move(edge_array)},
            {"phases",
             {{"n_s_star", n_s_star}, {"n_e_star", n_e_star}, {"n_o_star", n_o_star}}}};
}

SupportingSubgraph SupportingSubgraph::from_json(const nlohmann::json& j) {
    try {
        SupportingSubgraph g;
        const nlohmann::json& t = j.at("target");
        g.target = {t.at("s").get<std::string>(), t.at("r").get<std::string>(),
                    t.at("o").get<std::string>()};
        for (const nlohmann::json& e : j.at("edges")) {
            ConfidenceEdge edge;
            edge.triple = {e.at("s").get<std::string>(), e.at("r").get<std::string>(),
                           e.at("o").get<std::string>()};
            edge.entropy_bits = e.at("entropy").get<double>();
            edge.dist.yes = e.at("p_yes").get<double>();
            edge.dist.no = e.at("p_no").get<double>();
            edge.dist.unknown = e.at("p_unknown").get<double>();
            edge.dist.other =
                std::max(0.0, 1.0 - (edge.dist.yes + edge.dist.no + edge.dist.unknown));
            g.edges.push_back(std::move(edge));
        }
        if (j.contains("phases")) {
            const nlohmann::json& p = j.at("phases");
            g.n_s_star = p.value("n_s_star", std::vector<std::string>{});
            g.n_e_star = p.value("n_e_star", std::vector<std::string>{});
            g.n_o_star = p.value("n_o_star", std::vector<std::string>{});
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("supporting subgraph document: ") + e.what());
    }
}

}  // namespace kgu
