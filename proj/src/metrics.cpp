#include "kgu/metrics.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "kgu/error.hpp"
#include "kgu/util.hpp"

namespace kgu {

namespace {

std::string name_target(const LabelTriple& t) {
    return "(" + t.subject + ", " + t.relation + ", " + t.object + ")";
}

std::set<LabelTriple> edge_identities(const SupportingSubgraph& sg) {
    std::set<LabelTriple> out;
    for (const ConfidenceEdge& e : sg.edges) out.insert(e.triple);
    return out;
}

std::size_t intersection_size(const std::set<LabelTriple>& a, const std::set<LabelTriple>& b) {
    std::size_t n = 0;
    for (const LabelTriple& t : a) n += b.count(t);
    return n;
}

constexpr std::array<std::string_view, 4> kChoiceNames = {"Yes", "No", "Unknown", "Other"};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        quoted += c;
        if (c == '"') quoted += '"';
    }
    quoted += '"';
    return quoted;
}

nlohmann::json confusion_json(const ConfusionMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : m) rows.push_back(row);
    return nlohmann::json{{"labels", kChoiceNames}, {"matrix", rows}};
}

std::string confusion_to_csv(const ConfusionMatrix& m) {
    std::ostringstream out;
    out << "label";
    for (auto name : kChoiceNames) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < 4; ++i) {
        out << kChoiceNames[i];
        for (std::size_t j = 0; j < 4; ++j) out << ',' << m[i][j];
        out << '\n';
    }
    return out.str();
}

}  // namespace

int instance_score(const LabelTriple& target, const ProbeResult& probe,
                   const RubricConfig& rubric, double u_star) {
    if (!admit(probe, u_star)) return 0;
    SupportingSubgraph sg;
    sg.target = target;
    sg.edges.push_back({target, probe.entropy_bits, probe.dist});
    return rule_judge(sg, target, rubric).score;
}

double ues(std::span<const TargetEvaluation> evals, UesMode mode,
           const RubricConfig& rubric, double u_star) {
    if (evals.empty()) throw DomainError("ues needs at least one evaluated target");
    double sum = 0.0;
    for (const TargetEvaluation& e : evals) {
        int pre = e.pre_score, post = e.post_score;
        if (mode == UesMode::Instance) {
            pre = instance_score(e.target, e.pre_instance, rubric, u_star);
            post = instance_score(e.target, e.post_instance, rubric, u_star);
        }
        if (pre <= 0)
            throw DomainError("ues denominator is zero for target " + name_target(e.target));
        sum += static_cast<double>(pre - post) / static_cast<double>(pre);
    }
    return sum / static_cast<double>(evals.size());
}

double recall(std::span<const TargetEvaluation> evals, std::vector<std::string>* warnings) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const TargetEvaluation& e : evals) {
        std::set<LabelTriple> pre = edge_identities(e.pre_subgraph);
        if (pre.empty()) {
            if (warnings)
                warnings->push_back("recall: target " + name_target(e.target) +
                                    " has an empty pre-subgraph, excluded");
            continue;
        }
        std::set<LabelTriple> post = edge_identities(e.post_subgraph);
        sum += static_cast<double>(intersection_size(pre, post)) /
               static_cast<double>(pre.size());
        ++counted;
    }
    if (counted == 0) throw DomainError("recall has no targets with a non-empty pre-subgraph");
    return sum / static_cast<double>(counted);
}

nlohmann::json LocResult::to_json() const {
    nlohmann::json j = confusion_json(confusion);
    j["value"] = value;
    return j;
}

LocResult loc(std::span<const LocRecord> records, bool other_consistent) {
    if (records.empty()) throw DomainError("loc needs at least one record");
    LocResult out;
    std::size_t consistent = 0;
    for (const LocRecord& r : records) {
        auto pre = static_cast<std::size_t>(r.pre_label);
        auto post = static_cast<std::size_t>(r.post_label);
        ++out.confusion[pre][post];
        if (r.pre_label == r.post_label &&
            (other_consistent || r.pre_label != Choice::Other))
            ++consistent;
    }
    out.value = static_cast<double>(consistent) / static_cast<double>(records.size());
    return out;
}

std::vector<Triple> sample_loc_neighbors(const ReferenceGraph& ref, const ForgetSet& targets,
                                         std::size_t multiplier,
                                         const std::set<LabelTriple>& exclusion,
                                         std::uint64_t seed,
                                         std::vector<std::string>* warnings) {
    if (multiplier < 1) throw DomainError("loc neighbor multiplier must be at least 1");

    std::unordered_set<EntityId> zone;
    for (const Triple& t : targets.targets) {
        for (EntityId endpoint : {t.subject, t.object}) {
            if (!zone.insert(endpoint).second) continue;
            for (EntityId v : ref.k_hop_neighbors(endpoint, 3, EdgeSense::Undirected))
                zone.insert(v);
        }
    }

    std::vector<Triple> pool;
    for (const Triple& t : ref.triples()) {
        if (!zone.count(t.subject) || !zone.count(t.object)) continue;
        if (std::binary_search(targets.targets.begin(), targets.targets.end(), t)) continue;
        LabelTriple lt{ref.entity_label(t.subject), ref.relation_label(t.relation),
                       ref.entity_label(t.object)};
        if (exclusion.count(lt)) continue;
        pool.push_back(t);
    }

    std::size_t wanted = multiplier * targets.targets.size();
    if (pool.size() <= wanted) {
        if (warnings && pool.size() < wanted)
            warnings->push_back("loc neighbor pool has only " + std::to_string(pool.size()) +
                                " triples, wanted " + std::to_string(wanted));
        return pool;
    }

    DetRng rng(seed);
    for (std::size_t i = 0; i < wanted; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.next_below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(wanted);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::size_t select_epoch(std::span<const double> loc_series) {
    if (loc_series.empty()) throw DomainError("select_epoch needs a non-empty series");
    std::size_t last_good = 0;  // 1-based, 0 = none seen
    std::size_t best = 0;
    for (std::size_t i = 0; i < loc_series.size(); ++i) {
        if (loc_series[i] > 0.8) last_good = i + 1;
        if (loc_series[i] > loc_series[best]) best = i;
    }
    return last_good ? last_good : best + 1;
}

nlohmann::json GammaCheck::to_json() const {
    return {{"threshold", gamma}, {"passed", passed}, {"failed", failed}};
}

GammaCheck gamma_check(std::span<const TargetEvaluation> evals, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 5.0)) throw DomainError("gamma must lie in [0, 5]");
    GammaCheck out;
    out.gamma = gamma;
    for (const TargetEvaluation& e : evals) {
        if (static_cast<double>(e.post_score) <= gamma)
            ++out.passed;
        else
            ++out.failed;
    }
    return out;
}

EvalReport evaluate(std::span<const TargetEvaluation> evals,
                    std::span<const LocRecord> loc_records, const RubricConfig& rubric,
                    double u_star, double gamma, bool loc_other_consistent) {
    EvalReport report;
    report.ues_subgraph = ues(evals, UesMode::Subgraph, rubric, u_star);
    report.ues_instance = ues(evals, UesMode::Instance, rubric, u_star);
    report.loc_other_consistent = loc_other_consistent;

    bool any_pre = std::any_of(evals.begin(), evals.end(), [](const TargetEvaluation& e) {
        return !e.pre_subgraph.edges.empty();
    });
    if (any_pre) {
        report.recall = recall(evals, &report.warnings);
    } else {
        report.recall = 0.0;
        report.warnings.push_back("recall undefined: every pre-subgraph is empty");
    }

    if (loc_records.empty()) {
        report.loc = 0.0;
        report.warnings.push_back("no loc records: neighborhood empty after exclusions");
    } else {
        LocResult lr = loc(loc_records, loc_other_consistent);
        report.loc = lr.value;
        report.confusion = lr.confusion;
    }

    report.gamma = gamma_check(evals, gamma);

    for (const TargetEvaluation& e : evals) {
        TargetRow row;
        row.target = e.target;
        row.pre_score = e.pre_score;
        row.post_score = e.post_score;
        row.pre_instance = instance_score(e.target, e.pre_instance, rubric, u_star);
        row.post_instance = instance_score(e.target, e.post_instance, rubric, u_star);
        std::set<LabelTriple> pre = edge_identities(e.pre_subgraph);
        std::set<LabelTriple> post = edge_identities(e.post_subgraph);
        row.pre_edges = pre.size();
        row.post_edges = post.size();
        row.kept_edges = intersection_size(pre, post);
        if (!pre.empty())
            row.recall = static_cast<double>(row.kept_edges) / static_cast<double>(pre.size());
        row.gamma_pass = static_cast<double>(e.post_score) <= gamma;
        report.targets.push_back(std::move(row));
    }
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json targets_json = nlohmann::json::array();
    for (const TargetRow& row : targets) {
        nlohmann::json r{{"subject", row.target.subject},
                         {"relation", row.target.relation},
                         {"object", row.target.object},
                         {"pre_score", row.pre_score},
                         {"post_score", row.post_score},
                         {"pre_instance", row.pre_instance},
                         {"post_instance", row.post_instance},
                         {"pre_edges", row.pre_edges},
                         {"post_edges", row.post_edges},
                         {"kept_edges", row.kept_edges},
                         {"gamma_pass", row.gamma_pass}};
        if (row.recall)
            r["recall"] = *row.recall;
        else
            r["recall"] = nullptr;
        targets_json.push_back(std::move(r));
    }
    nlohmann::json loc_json = confusion_json(confusion);
    loc_json["value"] = loc;
    loc_json["other_consistent"] = loc_other_consistent;
    return nlohmann::json{
        {"ues", {{"subgraph", ues_subgraph},
                 {"instance", ues_instance},
                 {"gap", ues_instance - ues_subgraph}}},
        {"recall", recall},
        {"loc", loc_json},
        {"gamma", gamma.to_json()},
        {"targets", targets_json},
        {"warnings", warnings}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    try {
        EvalReport report;
        report.ues_subgraph = j.at("ues").at("subgraph").get<double>();
        report.ues_instance = j.at("ues").at("instance").get<double>();
        report.recall = j.at("recall").get<double>();
        const nlohmann::json& loc_json = j.at("loc");
        report.loc = loc_json.at("value").get<double>();
        report.loc_other_consistent = loc_json.at("other_consistent").get<bool>();
        const nlohmann::json& matrix = loc_json.at("matrix");
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t k = 0; k < 4; ++k)
                report.confusion[i][k] = matrix.at(i).at(k).get<std::uint64_t>();
        report.gamma.gamma = j.at("gamma").at("threshold").get<double>();
        report.gamma.passed = j.at("gamma").at("passed").get<std::size_t>();
        report.gamma.failed = j.at("gamma").at("failed").get<std::size_t>();
        for (const nlohmann::json& r : j.at("targets")) {
            TargetRow row;
            row.target = {r.at("subject").get<std::string>(), r.at("relation").get<std::string>(),
                          r.at("object").get<std::string>()};
            row.pre_score = r.at("pre_score").get<int>();
            row.post_score = r.at("post_score").get<int>();
            row.pre_instance = r.at("pre_instance").get<int>();
            row.post_instance = r.at("post_instance").get<int>();
            row.pre_edges = r.at("pre_edges").get<std::size_t>();
            row.post_edges = r.at("post_edges").get<std::size_t>();
            row.kept_edges = r.at("kept_edges").get<std::size_t>();
            if (!r.at("recall").is_null()) row.recall = r.at("recall").get<double>();
            row.gamma_pass = r.at("gamma_pass").get<bool>();
            report.targets.push_back(std::move(row));
        }
        for (const nlohmann::json& w : j.at("warnings"))
            report.warnings.push_back(w.get<std::string>());
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("evaluation document: ") + e.what());
    }
}

std::string EvalReport::targets_csv() const {
    std::ostringstream out;
    out << "subject,relation,object,pre_score,post_score,pre_instance,post_instance,"
           "pre_edges,post_edges,kept_edges,recall,gamma_pass\n";
    for (const TargetRow& row : targets) {
        out << csv_field(row.target.subject) << ',' << csv_field(row.target.relation) << ','
            << csv_field(row.target.object) << ',' << row.pre_score << ',' << row.post_score
            << ',' << row.pre_instance << ',' << row.post_instance << ',' << row.pre_edges
            << ',' << row.post_edges << ',' << row.kept_edges << ',';
        if (row.recall) out << fmt_fixed(*row.recall, 6);
        out << ',' << (row.gamma_pass ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string EvalReport::confusion_csv() const { return confusion_to_csv(confusion); }

std::string EvalReport::histogram_csv() const {
    std::array<std::array<std::uint64_t, 6>, 4> counts{};
    for (const TargetRow& row : targets) {
        auto bump = [&](std::size_t series, int score) {
            if (score >= 0 && score <= 5) ++counts[series][static_cast<std::size_t>(score)];
        };
        bump(0, row.pre_score);
        bump(1, row.post_score);
        bump(2, row.pre_instance);
        bump(3, row.post_instance);
    }
    std::ostringstream out;
    out << "score,pre_subgraph,post_subgraph,pre_instance,post_instance\n";
    for (int s = 0; s <= 5; ++s) {
        out << s;
        for (std::size_t series = 0; series < 4; ++series)
            out << ',' << counts[series][static_cast<std::size_t>(s)];
        out << '\n';
    }
    return out.str();
}

}  // namespace kgu
