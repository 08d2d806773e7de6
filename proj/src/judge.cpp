#include "kgu/judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kgu/error.hpp"
#include "kgu/io.hpp"
#include "kgu/util.hpp"

namespace kgu {

std::string_view to_string(Tier t) {
    switch (t) {
        case Tier::Low: return "low";
        case Tier::ModeratelyLow: return "moderately_low";
        case Tier::RelativelyHigh: return "relatively_high";
        case Tier::High: return "high";
    }
    return "high";
}

void RubricConfig::normalize() {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& [rel, peers] : similarity)
        for (const std::string& peer : peers) pairs.emplace_back(rel, peer);
    for (const auto& [a, b] : pairs) {
        similarity[a].insert(a);
        similarity[a].insert(b);
        similarity[b].insert(b);
        similarity[b].insert(a);
    }
    for (auto& [rel, peers] : similarity) peers.insert(rel);
}

void RubricConfig::validate() const {
    if (!(tier_bounds[0] >= 0.0 && tier_bounds[0] < tier_bounds[1] && tier_bounds[1] < tier_bounds[2]))
        throw DomainError("tier_bounds must be non-negative and strictly increasing");
    for (double b : tier_bounds)
        if (!std::isfinite(b)) throw DomainError("tier_bounds must be finite");
    for (const auto& [rel, peers] : similarity) {
        if (rel.empty()) throw DomainError("similarity keys must be non-empty relations");
        if (!peers.contains(rel)) throw DomainError("similarity must be reflexive: missing " + rel);
    }
    for (const auto& [seq, implied_rel] : compositions) {
        if (seq.size() < 2 || seq.size() > 3)
            throw DomainError("composition sequences must have length 2 or 3");
        for (const std::string& r : seq)
            if (r.empty()) throw DomainError("composition sequences must not contain empty relations");
        if (implied_rel.empty()) throw DomainError("composition implied relation must be non-empty");
    }
}

bool RubricConfig::similar(const std::string& a, const std::string& b) const {
    if (a == b) return true;
    auto it = similarity.find(a);
    return it != similarity.end() && it->second.contains(b);
}

std::optional<std::string> RubricConfig::implied(const std::vector<std::string>& relation_sequence) const {
    auto it = compositions.find(relation_sequence);
    if (it == compositions.end()) return std::nullopt;
    return it->second;
}

Tier RubricConfig::tier_of(double entropy_bits) const {
    if (entropy_bits < tier_bounds[0]) return Tier::Low;
    if (entropy_bits < tier_bounds[1]) return Tier::ModeratelyLow;
    if (entropy_bits < tier_bounds[2]) return Tier::RelativelyHigh;
    return Tier::High;
}

RubricConfig RubricConfig::defaults() {
    RubricConfig r;
    const std::pair<const char*, const char*> similar_pairs[] = {
        {"produces", "manufactures"},
        {"wasBornIn", "hasPlaceOfBirth"},
        {"hasDeathPlace", "hasPlaceOfDeath"},
        {"hasNationality", "hasCitizenship"},
        {"playsFor", "worksAt"},
        {"isAffiliatedTo", "playsFor"},
        {"hasSpouse", "isMarriedTo"},
    };
    for (const auto& [a, b] : similar_pairs) r.similarity[a].insert(b);
    r.compositions[{"capital_of", "located_in"}] = "located_in";
    r.compositions[{"located_in", "located_in"}] = "located_in";
    r.compositions[{"worked_at", "located_in", "part_of"}] = "lived_in";
    r.compositions[{"isKnownFor", "owns"}] = "created";
    r.compositions[{"owns", "owns"}] = "owns";
    r.compositions[{"hasNeighbor", "isLocatedIn"}] = "isLocatedIn";
    r.compositions[{"isLocatedIn", "isLocatedIn"}] = "isLocatedIn";
    r.compositions[{"wasBornIn", "isLocatedIn"}] = "wasBornIn";
    r.compositions[{"playsFor", "isLocatedIn"}] = "livesIn";
    r.compositions[{"hasEmployer", "isLocatedIn"}] = "livesIn";
    r.compositions[{"studiedAt", "isLocatedIn"}] = "hasLegalResidence";
    r.compositions[{"worksAt", "isLocatedIn", "hasOfficialLanguage"}] = "hasLanguage";
    r.normalize();
    return r;
}

RubricConfig RubricConfig::from_json(const nlohmann::json& j) {
    try {
        RubricConfig r;
        if (j.contains("similarity"))
            for (const auto& [rel, peers] : j.at("similarity").items())
                for (const nlohmann::json& p : peers) r.similarity[rel].insert(p.get<std::string>());
        if (j.contains("compositions"))
            for (const nlohmann::json& c : j.at("compositions")) {
                std::vector<std::string> seq = c.at("sequence").get<std::vector<std::string>>();
                r.compositions[std::move(seq)] = c.at("implies").get<std::string>();
            }
        if (j.contains("tier_bounds")) {
            const nlohmann::json& b = j.at("tier_bounds");
            if (b.size() != 3) throw DomainError("tier_bounds must have exactly 3 cut points");
            for (std::size_t i = 0; i < 3; ++i) r.tier_bounds[i] = b.at(i).get<double>();
        }
        r.normalize();
        r.validate();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("rubric document: ") + e.what());
    }
}

RubricConfig RubricConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open rubric file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("rubric file " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json RubricConfig::to_json() const {
    nlohmann::json sim = nlohmann::json::object();
    for (const auto& [rel, peers] : similarity) sim[rel] = peers;
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& [seq, implied_rel] : compositions)
        comps.push_back({{"sequence", seq}, {"implies", implied_rel}});
    return {{"similarity", std::move(sim)},
            {"compositions", std::move(comps)},
            {"tier_bounds", tier_bounds}};
}

namespace {

nlohmann::json edge_to_json(const ConfidenceEdge& e) {
    return {{"s", e.triple.subject},
            {"r", e.triple.relation},
            {"o", e.triple.object},
            {"entropy", e.entropy_bits}};
}

// Same (s, r, o) listed twice keeps the lower entropy; output is sorted, so
// the analysis is order- and duplication-invariant.
std::vector<ConfidenceEdge> dedupe_edges(const std::vector<ConfidenceEdge>& edges) {
    std::map<LabelTriple, ConfidenceEdge> best;
    for (const ConfidenceEdge& e : edges) {
        auto [it, inserted] = best.try_emplace(e.triple, e);
        if (!inserted && e.entropy_bits < it->second.entropy_bits) it->second = e;
    }
    std::vector<ConfidenceEdge> out;
    out.reserve(best.size());
    for (auto& [t, e] : best) out.push_back(std::move(e));
    return out;
}

double path_max_entropy(const std::vector<const ConfidenceEdge*>& edges) {
    double m = 0.0;
    for (const ConfidenceEdge* e : edges) m = std::max(m, e->entropy_bits);
    return m;
}

// Directed simple paths subject -> ... -> object with 2..3 edges.
std::vector<std::vector<const ConfidenceEdge*>> directed_support_paths(
    const std::vector<ConfidenceEdge>& edges, const std::string& s, const std::string& o) {
    std::multimap<std::string, const ConfidenceEdge*> out_edges;
    for (const ConfidenceEdge& e : edges) out_edges.emplace(e.triple.subject, &e);

    std::vector<std::vector<const ConfidenceEdge*>> paths;
    std::vector<const ConfidenceEdge*> current;
    std::set<std::string> visited{s};

    auto dfs = [&](auto&& self, const std::string& node) -> void {
        if (node == o) {
            if (current.size() >= 2) paths.push_back(current);
            return;
        }
        if (current.size() == 3) return;
        auto [lo, hi] = out_edges.equal_range(node);
        for (auto it = lo; it != hi; ++it) {
            const ConfidenceEdge* e = it->second;
            const std::string& next = e->triple.object;
            if (next != o && (next == node || visited.contains(next))) continue;
            visited.insert(next);
            current.push_back(e);
            self(self, next);
            current.pop_back();
            visited.erase(next);
        }
    };
    if (s != o) dfs(dfs, s);
    return paths;
}

// Undirected simple routes s - ... - o with 1..3 edges; returns each route's
// weakest-link entropy.
std::vector<double> undirected_routes(const std::vector<ConfidenceEdge>& edges, const std::string& s,
                                      const std::string& o) {
    std::multimap<std::string, const ConfidenceEdge*> touch;
    for (const ConfidenceEdge& e : edges) {
        touch.emplace(e.triple.subject, &e);
        if (e.triple.object != e.triple.subject) touch.emplace(e.triple.object, &e);
    }

    std::vector<double> route_entropies;
    std::vector<const ConfidenceEdge*> current;
    std::set<std::string> visited{s};

    auto dfs = [&](auto&& self, const std::string& node) -> void {
        if (node == o && !current.empty()) {
            route_entropies.push_back(path_max_entropy(current));
            return;
        }
        if (current.size() == 3) return;
        auto [lo, hi] = touch.equal_range(node);
        for (auto it = lo; it != hi; ++it) {
            const ConfidenceEdge* e = it->second;
            const std::string& next = e->triple.subject == node ? e->triple.object : e->triple.subject;
            if (next == node) continue;
            if (next != o && visited.contains(next)) continue;
            visited.insert(next);
            current.push_back(e);
            self(self, next);
            current.pop_back();
            visited.erase(next);
        }
    };
    if (s != o) dfs(dfs, s);
    return route_entropies;
}

bool undirected_connected(const std::vector<ConfidenceEdge>& edges, const std::string& s,
                          const std::string& o) {
    if (s == o) return true;
    std::multimap<std::string, const std::string*> adj;
    for (const ConfidenceEdge& e : edges) {
        adj.emplace(e.triple.subject, &e.triple.object);
        adj.emplace(e.triple.object, &e.triple.subject);
    }
    std::set<std::string> seen{s};
    std::vector<std::string> frontier{s};
    while (!frontier.empty()) {
        std::string node = std::move(frontier.back());
        frontier.pop_back();
        auto [lo, hi] = adj.equal_range(node);
        for (auto it = lo; it != hi; ++it) {
            const std::string& next = *it->second;
            if (next == o) return true;
            if (seen.insert(next).second) frontier.push_back(next);
        }
    }
    return false;
}

int direct_component(Tier best_direct, std::size_t n_valid) {
    switch (best_direct) {
        case Tier::Low: return 5;
        case Tier::ModeratelyLow: return n_valid >= 1 ? 5 : 4;
        case Tier::RelativelyHigh: return n_valid >= 2 ? 5 : 4;
        case Tier::High: return n_valid >= 2 ? 5 : 3;
    }
    return 3;
}

int valid_component(Tier best_valid) {
    switch (best_valid) {
        case Tier::Low: return 5;
        case Tier::ModeratelyLow: return 4;
        default: return 3;
    }
}

int weak_component(const std::vector<Tier>& route_tiers, bool connected) {
    if (route_tiers.size() >= 2) return 2;
    if (route_tiers.size() == 1) return route_tiers[0] == Tier::High ? 1 : 2;
    return connected ? 1 : 0;
}

}  // namespace

JudgeVerdict rule_judge(const SupportingSubgraph& subgraph, const LabelTriple& target,
                        const RubricConfig& rubric) {
    rubric.validate();
    if (subgraph.target != target)
        throw DomainError("subgraph was extracted for a different target triple");

    JudgeVerdict verdict;
    const std::vector<ConfidenceEdge> edges = dedupe_edges(subgraph.edges);
    if (edges.empty()) {
        verdict.score = 0;
        verdict.rationale = "empty subgraph: no path can exist -> score 0";
        return verdict;
    }

    std::optional<Tier> best_direct;
    for (const ConfidenceEdge& e : edges)
        if (e.triple.subject == target.subject && e.triple.object == target.object &&
            rubric.similar(target.relation, e.triple.relation)) {
            Tier t = rubric.tier_of(e.entropy_bits);
            verdict.direct_paths.push_back({e, t});
            if (!best_direct || t < *best_direct) best_direct = t;
        }

    std::size_t n_valid = 0, n_partial = 0;
    std::optional<Tier> best_valid;
    for (const auto& path : directed_support_paths(edges, target.subject, target.object)) {
        SupportPath sp;
        std::vector<std::string> seq;
        for (const ConfidenceEdge* e : path) {
            sp.edges.push_back(*e);
            seq.push_back(e->triple.relation);
        }
        sp.tier = rubric.tier_of(path_max_entropy(path));
        const std::optional<std::string> implied_rel = rubric.implied(seq);
        sp.valid = implied_rel.has_value() && rubric.similar(target.relation, *implied_rel);
        if (sp.valid) {
            std::string rule;
            for (std::size_t i = 0; i < seq.size(); ++i) {
                if (i) rule += ",";
                rule += seq[i];
            }
            sp.rule = rule + "->" + *implied_rel;
            ++n_valid;
            if (!best_valid || sp.tier < *best_valid) best_valid = sp.tier;
        } else {
            ++n_partial;
        }
        verdict.support_paths.push_back(std::move(sp));
    }

    std::vector<Tier> route_tiers;
    for (double h : undirected_routes(edges, target.subject, target.object))
        route_tiers.push_back(rubric.tier_of(h));
    const bool connected = undirected_connected(edges, target.subject, target.object);

    // Each component is monotone under edge deletion, so their maximum is
    // too; a deleted component simply stops contributing.
    const int weak = weak_component(route_tiers, connected);
    int score = weak;
    std::string winning = "weak";
    if (best_valid) {
        const int vscore = valid_component(*best_valid);
        if (vscore > score) {
            score = vscore;
            winning = "valid-support";
        }
    }
    if (best_direct) {
        const int dc = direct_component(*best_direct, n_valid);
        if (dc >= score) {
            score = dc;
            winning = "direct";
        }
    }
    verdict.score = score;

    std::ostringstream why;
    why << verdict.direct_paths.size() << " direct path(s)";
    if (best_direct) why << " (best tier " << to_string(*best_direct) << ")";
    why << "; " << n_valid << " valid support path(s)";
    if (best_valid) why << " (best tier " << to_string(*best_valid) << ")";
    why << "; " << n_partial << " partial support path(s); " << route_tiers.size()
        << " undirected route(s) within 3 hops; endpoints "
        << (connected ? "connected" : "disjoint") << "; decisive component: " << winning
        << " -> score " << score;
    verdict.rationale = why.str();
    return verdict;
}

nlohmann::json JudgeVerdict::to_json() const {
    nlohmann::json dp = nlohmann::json::array();
    for (const DirectPath& d : direct_paths)
        dp.push_back({{"edge", edge_to_json(d.edge)}, {"tier", to_string(d.tier)}});
    nlohmann::json sp = nlohmann::json::array();
    for (const SupportPath& p : support_paths) {
        nlohmann::json es = nlohmann::json::array();
        for (const ConfidenceEdge& e : p.edges) es.push_back(edge_to_json(e));
        sp.push_back({{"edges", std::move(es)},
                      {"tier", to_string(p.tier)},
                      {"valid", p.valid},
                      {"rule", p.rule}});
    }
    return {{"score", score},
            {"direct_paths", std::move(dp)},
            {"support_paths", std::move(sp)},
            {"rationale", rationale}};
}

// --- prompt ------------------------------------------------------------------

namespace {

const char* judge_template_head() {
    return R"TPL(You are a reasoning assistant that evaluates whether a target triple can be logically inferred from a given set of subgraph triples.

Task:

Using only the subgraph triples below, determine whether the target triple can be inferred. Do not use any external knowledge.
All provided triples must be considered as factual ground truth. Only rely on logical reasoning from the facts.

Each edge is annotated with entropy in [0, 1], which quantifies the uncertainty of that triple. Lower entropy means higher confidence in its validity.

Entropy Interpretation:

- 0.00-0.25 -> Very Confident
- 0.25-0.50 -> Confident
- 0.50-0.75 -> Less Confident
- 0.75-1.00 -> Not Confident

Scoring Rules:

Assign a confidence score from 0 to 5 for the target triple:

- 0 -> No logical path exists; inference is impossible from the given triples.
- 1 -> Very weak support; entities appear but no relevant path.
- 2 -> Some weak logical connection, but with high uncertainty or missing relations.
- 3 -> Moderate path exists with reasonable certainty.
- 4 -> Confident support; well-formed path with generally low uncertainty.
- 5 -> Strong support; direct match or very strong multi-hop support with high confidence.

Evaluation Guidelines

Firstly, you need to classify the direct path and the support path:

1. Direct Path: A single triple that directly connects the head entity to the tail entity with a relation that is identical or logically similar(ex. isLocatedIn and hasCapital) to the target relation. The entropy of this triple determines the confidence level of the direct path. If target triple exists in the subgraph, it must be regarded as a direct path.

2. Support Path: A multi-hop directed path that connects the head entity to the tail entity through intermediate entities. This path should logically imply the target triple through reasoning. The entropy of all triples in this path collectively determines the confidence level of the support path.

Secondly, when you are evaluating a target triple, please:
1. Identify all direct paths between the head and tail entities
2. Identify all support paths between the head and tail entities
3. Record the number of each path type
4. Assess the entropy (uncertainty) level of each path
5. Assign a score based on the criteria below

Criteria: Scores of 3+ indicate the target triple can be reasonably inferred; scores below 3 indicate insufficient evidence.

1. Score 5
- Low entropy direct path, OR
- Moderately low entropy direct path + at least one support path, OR
- Higher entropy direct path + multiple support paths (more paths needed as entropy increases), OR
- No direct path but multiple low entropy 2-3 hop paths

2. Score 4
- Moderately low entropy direct path without support paths, OR
- Relatively high entropy direct path + 1-2 support paths, OR
- High entropy direct path + numerous support paths, OR
- No direct path but moderately low entropy 2-3 hop paths

3. Score 3
- High entropy direct path, OR
- 1-3 high entropy support paths

4. Score 2
- No direct path
- Multiple high entropy support paths, none completely correct

5. Score 1
- No direct path
- Very few support paths with errors, OR
- Only 1-2 high entropy support paths with errors

6. Score 0
- No direct path
- Irrelevant or unrelated paths
- No logical connection to target triple

For each evaluation, please provide:
1. Analyze direct paths (It is very important to confirm whether a direct path exists, because an incorrect judgment will lead to a significant difference in the assigned score).
2. Analyze support paths
3. Your reasoning for the assigned score
4. The final score (0-5)

Examples:

Example for Score 5:
Subgraph Triples:
(Rome, capital_of, Italy) with entropy 0.08
(Italy, located_in, Europe) with entropy 0.12

Target Triple:
(Rome, located_in, Europe)

Reasoning:
(Rome, capital_of, Italy) and (Italy, located_in, Europe) form a clear inference path
Both triples have very low entropy, indicating high confidence
The relation "located_in" is logically implied by the combination of "capital_of" and "located_in"
This creates a strong transitive relationship between Rome and Europe

Final Confidence Score: 5

Example for Score 4:
Subgraph Triples:
(Apple, produces, iPhone) with entropy 0.35
(iPhone, runs_on, iOS) with entropy 0.15
(Apple, develops, iOS) with entropy 0.20

Target Triple:
(Apple, manufactures, iPhone)

Reasoning:
(Apple, produces, iPhone) is a direct path with moderately high entropy
"produces" and "manufactures" are very similar relations
The support path (Apple, develops, iOS) and (iPhone, runs_on, iOS) indirectly reinforces the relationship
The combination of a direct path and supporting evidence compensates for the moderate entropy.

Final Confidence Score: 4

Example for Score 3:
Subgraph Triples:
(Einstein, worked_at, Princeton_University) with entropy 0.55
(Princeton_University, located_in, New_Jersey) with entropy 0.30
(New_Jersey, part_of, USA) with entropy 0.25

Target Triple:
(Einstein, lived_in, USA)

Reasoning:
No direct path exists between Einstein and USA
One support path exists: (Einstein, worked_at, Princeton_University) -> (Princeton_University, located_in, New_Jersey) -> (New_Jersey, part_of, USA)
The first triple has high entropy (0.55), creating uncertainty
The logical connection is sound (working somewhere typically implies living there)
The complete path allows reasonable inference but with moderate uncertainty due to the high entropy in the first connection

Final Confidence Score: 3

Example for Score 2:
Subgraph Triples:
(Tiger, belongs_to, Felidae) with entropy 0.45
(Lion, belongs_to, Felidae) with entropy 0.40
(Felidae, is_carnivorous, True) with entropy 0.25

Target Triple:
(Tiger, hunts, Lion)

Reasoning:
No direct path between Tiger and Lion
Support paths only establish that both animals belong to the same family
Being in the same carnivorous family might suggest interaction but doesn't support hunting specifically
The paths have high entropy and none directly supports the target relation.

Final Confidence Score: 2

Example for Score 1:
Subgraph Triples:
(Sun, larger_than, Earth) with entropy 0.60
(Earth, has_satellite, Moon) with entropy 0.30

Target Triple:
(Sun, orbited_by, Moon)

Reasoning:
No direct path between Sun and Moon
Only one weak support path through Earth with high entropy
The path contains a factual error - while the Moon orbits Earth, it doesn't directly orbit the Sun
The relationship is misleading for the inference task.

Final Confidence Score: 1

Example for Score 0:
Subgraph Triples:
(Water, contains, Hydrogen) with entropy 0.25
(Tree, produces, Oxygen) with entropy 0.40
(Fire, consumes, Oxygen) with entropy 0.35

Target Triple:
(Water, extinguishes, Fire)

Reasoning:
No direct path between Water and Fire
No logical support paths connecting the entities
The existing triples discuss chemical composition but are unrelated to the fire extinguishing property
The facts, while individually correct, have no relevance to the inference task.

Final Confidence Score: 0

Given Subgraph Triples:
)TPL";
}

const char* judge_template_tail() {
    return R"TPL(

Your Reasoning:
Explain step-by-step how the given facts lead to (or fail to lead to) the target triple.

Then output the score on a new line like:
Final Confidence Score: <integer between 0 and 5>
)TPL";
}

}  // namespace

std::string render_judge_prompt(const SupportingSubgraph& subgraph, const LabelTriple& target) {
    std::string facts;
    for (const ConfidenceEdge& e : subgraph.edges) {
        facts += "(" + e.triple.subject + ", " + e.triple.relation + ", " + e.triple.object +
                 ") with entropy " + fmt_fixed(e.entropy_bits, 3) + "\n";
    }
    std::string prompt = judge_template_head();
    prompt += facts;
    prompt += "\nTarget Triple:\n(" + target.subject + ", " + target.relation + ", " + target.object + ")";
    prompt += judge_template_tail();
    return prompt;
}

int parse_judge_response(std::string_view text) {
    const std::string lower = to_lower(text);
    static constexpr std::string_view marker = "final confidence score";
    const std::size_t found = lower.rfind(marker);
    if (found == std::string::npos)
        throw ParseError("judge response has no 'Final Confidence Score' marker");
    std::size_t i = found + marker.size();
    while (i < lower.size() &&
           (lower[i] == ' ' || lower[i] == '\t' || lower[i] == '\r' || lower[i] == '\n' ||
            lower[i] == '*' || lower[i] == ':' || lower[i] == '='))
        ++i;
    std::size_t digits = 0;
    long value = 0;
    while (i < lower.size() && lower[i] >= '0' && lower[i] <= '9') {
        value = value * 10 + (lower[i] - '0');
        ++digits;
        ++i;
        if (value > 999) break;
    }
    if (digits == 0) throw ParseError("judge response marker is not followed by an integer");
    if (value > 5) throw ParseError("judge score out of range 0..5: " + std::to_string(value));
    return static_cast<int>(value);
}

// --- agreement ----------------------------------------------------------------

namespace {

std::optional<double> pearson_of(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

// 1-based ranks with ties assigned the average rank of their group.
std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

AgreementReport agreement(const std::vector<std::vector<double>>& ratings_a,
                          const std::vector<std::vector<double>>& ratings_b) {
    if (ratings_a.size() != ratings_b.size())
        throw DomainError("agreement: item counts differ between judges");
    if (ratings_a.empty()) throw DomainError("agreement: no items");

    AgreementReport report;
    for (std::size_t i = 0; i < ratings_a.size(); ++i) {
        if (ratings_a[i].empty() || ratings_b[i].empty())
            throw DomainError("agreement: item " + std::to_string(i) + " is missing ratings");
        const double ma = std::accumulate(ratings_a[i].begin(), ratings_a[i].end(), 0.0) /
                          static_cast<double>(ratings_a[i].size());
        const double mb = std::accumulate(ratings_b[i].begin(), ratings_b[i].end(), 0.0) /
                          static_cast<double>(ratings_b[i].size());
        report.mean_a.push_back(ma);
        report.mean_b.push_back(mb);
        report.abs_gap.push_back(std::abs(ma - mb));
    }

    report.pearson = pearson_of(report.mean_a, report.mean_b);
    if (report.pearson) {
        report.spearman = pearson_of(average_ranks(report.mean_a), average_ranks(report.mean_b));
    }
    if (!report.pearson || !report.spearman)
        report.note = "correlation undefined: a judge's scores have zero variance";
    return report;
}

nlohmann::json AgreementReport::to_json() const {
    nlohmann::json j{{"mean_a", mean_a}, {"mean_b", mean_b}, {"abs_gap", abs_gap}};
    j["pearson"] = pearson ? nlohmann::json(*pearson) : nlohmann::json();
    j["spearman"] = spearman ? nlohmann::json(*spearman) : nlohmann::json();
    j["note"] = note;
    return j;
}

}  // namespace kgu
