#include "kgu/belief.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "kgu/error.hpp"
#include "kgu/io.hpp"
#include "kgu/util.hpp"

namespace kgu {

std::string_view to_string(Choice c) {
    switch (c) {
        case Choice::Yes: return "Yes";
        case Choice::No: return "No";
        case Choice::Unknown: return "Unknown";
        case Choice::Other: return "Other";
    }
    return "Other";
}

Choice choice_from_string(std::string_view s) {
    if (s == "Yes") return Choice::Yes;
    if (s == "No") return Choice::No;
    if (s == "Unknown") return Choice::Unknown;
    if (s == "Other") return Choice::Other;
    throw ParseError("not a choice label: " + std::string(s));
}

void AnswerDistribution::validate() const {
    for (double p : {yes, no, unknown, other})
        if (!(p >= 0.0) || !std::isfinite(p))
            throw DomainError("answer distribution component negative or non-finite");
    double sum = yes + no + unknown + other;
    if (std::abs(sum - 1.0) > 1e-9)
        throw DomainError("answer distribution sums to " + std::to_string(sum) + ", expected 1");
}

Choice AnswerDistribution::argmax() const {
    double best = yes;
    Choice c = Choice::Yes;
    if (no > best) { best = no; c = Choice::No; }
    if (unknown > best) { best = unknown; c = Choice::Unknown; }
    if (other > best) { c = Choice::Other; }
    return c;
}

double AnswerDistribution::entropy_bits() const {
    double named = yes + no + unknown;
    if (named <= 1e-12) return 0.0;
    double h = 0.0;
    for (double p : {yes / named, no / named, unknown / named})
        if (p > 1e-12) h -= p * std::log2(p);
    return h;
}

ProbeResult make_probe_result(const AnswerDistribution& dist, bool yes_in_top5) {
    dist.validate();
    return ProbeResult{dist, dist.argmax(), dist.entropy_bits(), yes_in_top5};
}

bool admit(const ProbeResult& r, double u_star) {
    constexpr double kLog2Of3 = 1.5849625007211562;
    if (!(u_star > 0.0) || u_star > kLog2Of3 + 1e-12)
        throw DomainError("u_star outside (0, log2 3]: " + std::to_string(u_star));
    return r.argmax_choice == Choice::Yes && r.yes_in_top5 && r.entropy_bits <= u_star;
}

// --- synthetic model --------------------------------------------------------

SyntheticBeliefModel::SyntheticBeliefModel(std::map<LabelTriple, AnswerDistribution> facts,
                                           AnswerDistribution default_absent, double noise_scale,
                                           std::uint64_t noise_seed)
    : facts_(std::move(facts)),
      default_absent_(default_absent),
      noise_scale_(noise_scale),
      noise_seed_(noise_seed) {
    default_absent_.validate();
    for (const auto& [t, d] : facts_) d.validate();
    if (noise_scale_ < 0.0) throw DomainError("noise_scale must be >= 0");
}

namespace {

AnswerDistribution dist_from_json(const nlohmann::json& j) {
    AnswerDistribution d;
    d.yes = j.at("p_yes").get<double>();
    d.no = j.at("p_no").get<double>();
    d.unknown = j.at("p_unknown").get<double>();
    d.other = j.value("p_other", 0.0);
    d.validate();
    return d;
}

nlohmann::json dist_to_json(const AnswerDistribution& d) {
    return {{"p_yes", d.yes}, {"p_no", d.no}, {"p_unknown", d.unknown}, {"p_other", d.other}};
}

}  // namespace

SyntheticBeliefModel SyntheticBeliefModel::from_json(const nlohmann::json& j) {
    std::map<LabelTriple, AnswerDistribution> facts;
    for (const auto& f : j.at("facts")) {
        LabelTriple t{f.at("s").get<std::string>(), f.at("r").get<std::string>(), f.at("o").get<std::string>()};
        facts[t] = dist_from_json(f);
    }
    return SyntheticBeliefModel(std::move(facts), dist_from_json(j.at("default_absent")),
                                j.value("noise_scale", 0.0), j.value("noise_seed", std::uint64_t{0}));
}

SyntheticBeliefModel SyntheticBeliefModel::load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

nlohmann::json SyntheticBeliefModel::to_json() const {
    nlohmann::json facts = nlohmann::json::array();
    for (const auto& [t, d] : facts_) {
        nlohmann::json f = dist_to_json(d);
        f["s"] = t.subject;
        f["r"] = t.relation;
        f["o"] = t.object;
        facts.push_back(std::move(f));
    }
    return {{"default_absent", dist_to_json(default_absent_)},
            {"noise_scale", noise_scale_},
            {"noise_seed", noise_seed_},
            {"facts", std::move(facts)}};
}

void SyntheticBeliefModel::set_fact(const LabelTriple& t, const AnswerDistribution& d) {
    d.validate();
    facts_[t] = d;
}

ProbeResult SyntheticBeliefModel::probe(const LabelTriple& query) const {
    auto it = facts_.find(query);
    AnswerDistribution d = (it != facts_.end()) ? it->second : default_absent_;

    if (noise_scale_ > 0.0) {
        // Seeded per-triple logit jitter over the named choices; p_other kept.
        std::uint64_t h = fnv1a64(query.subject);
        h = fnv1a64("\t", h);
        h = fnv1a64(query.relation, h);
        h = fnv1a64("\t", h);
        h = fnv1a64(query.object, h);
        DetRng rng(fnv1a64_u64(noise_seed_, h));
        double named = d.yes + d.no + d.unknown;
        if (named > 1e-12) {
            double z[3];
            const double p[3] = {d.yes / named, d.no / named, d.unknown / named};
            for (int i = 0; i < 3; ++i)
                z[i] = std::log(std::max(p[i], 1e-9)) + noise_scale_ * rng.next_gaussian();
            double zmax = std::max({z[0], z[1], z[2]});
            double e[3], sum = 0.0;
            for (int i = 0; i < 3; ++i) sum += e[i] = std::exp(z[i] - zmax);
            d.yes = named * e[0] / sum;
            d.no = named * e[1] / sum;
            d.unknown = named * e[2] / sum;
        }
    }

    // The synthetic backend always surfaces Yes among its top tokens as long
    // as it has any mass at all; instruction failure is modeled by p_other.
    return make_probe_result(d, d.yes > 0.0);
}

// --- prompt templates -------------------------------------------------------

const std::string& probe_system_message() {
    static const std::string msg =
        "You are an expert in knowledge graphs. Your task is to determine whether a given relation "
        "between two entities is correct, incorrect, or unknown.\n"
        "\n"
        "First analyze the semantic properties of both entities, and then reason about whether the "
        "relation mentioned in the task is appropriate for these two entities.\n"
        "\n"
        "Here is an example of a correct relation:\n"
        "Example 1: For head entity 'Shakespeare', tail entity 'Hamlet', relation 'wrote', reasoning "
        "process: Shakespeare is a person, specifically an author, while Hamlet is a literary work. "
        "'wrote' is one of the most specific relations between an author and their work, so the "
        "relation 'wrote' is correct.\n"
        "\n"
        "Here is an example of an incorrect relation:\n"
        "Example 2: For head entity 'Shakespeare', tail entity 'Hamlet', relation 'locatedIn', "
        "reasoning process: Shakespeare is a person and Hamlet is a literary work. The relation "
        "'locatedIn' typically describes spatial or geographic relationships, which does not apply to "
        "an author and their work. Therefore, the relation 'locatedIn' is incorrect.\n"
        "\n"
        "Here is an example of an unknown relation:\n"
        "Example 3: For head entity 'Hamlet', tail entity 'Existentialism', relation 'influencedBy', "
        "reasoning process: Hamlet is a literary work, while Existentialism is a philosophical "
        "movement. Although some scholars interpret Hamlet's introspective nature as "
        "proto-existentialist, there is no widely agreed-upon or factual relationship confirming that "
        "Hamlet was directly influenced by Existentialism. Therefore, the relation 'influencedBy' is "
        "unknown.\n"
        "\n"
        "Be deliberate and analytical in your reasoning before providing your final answer. Your "
        "answer (which is provided) should be taken as-is; the goal is to compute its log probability "
        "given the context. According to the user's task, you should provide your final answer in the "
        "format 'Answer: Yes' or 'Answer: No' or 'Answer: Unknown'.";
    return msg;
}

PromptTemplate qwen_probe_template() {
    return {"qwen",
            "Task: In the triple ({entity1}, ?, {entity2}), does the relation '{relation}' correctly "
            "complete it? Answer: Yes/No/Unknown"};
}

PromptTemplate llama_probe_template() {
    return {"llama",
            "Task: Given that the head entity is '{entity1}' and the tail entity is '{entity2}', is "
            "the relationship '{relation}'? Answer: Yes/No/Unknown"};
}

namespace {

std::size_t replace_all(std::string& text, std::string_view key, std::string_view value) {
    std::size_t n = 0, pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
        ++n;
    }
    return n;
}

}  // namespace

std::string render_probe_prompt(const PromptTemplate& tpl, const LabelTriple& query) {
    std::string user = tpl.user_pattern;
    std::size_t hits = 0;
    hits += replace_all(user, "{entity1}", query.subject) ? 1 : 0;
    hits += replace_all(user, "{entity2}", query.object) ? 1 : 0;
    hits += replace_all(user, "{relation}", query.relation) ? 1 : 0;
    if (hits != 3)
        throw TemplateError("template '" + tpl.name +
                            "' must mention {entity1}, {entity2} and {relation}");
    return probe_system_message() + "\n\n" + user;
}

// --- template validation ----------------------------------------------------

TemplateValidationReport validate_template(const BeliefOracle& oracle, const PromptTemplate& tpl,
                                           std::span<const LabeledExample> validation_set) {
    if (validation_set.empty()) throw DomainError("validation set is empty");
    TemplateValidationReport rep;
    rep.template_name = tpl.name;
    for (const LabeledExample& ex : validation_set) {
        // Rendering up front surfaces template errors even for backends that
        // do not consume prompts (the synthetic model).
        render_probe_prompt(tpl, ex.triple);
        ProbeResult r = oracle.probe(ex.triple);
        bool correct = ex.positive ? (r.argmax_choice == Choice::Yes)
                                   : (r.argmax_choice == Choice::No || r.argmax_choice == Choice::Unknown);
        auto& rel = rep.per_relation[ex.triple.relation];
        ++rel.total;
        ++rep.total;
        if (correct) {
            ++rel.correct;
            ++rep.correct;
        }
    }
    rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.total);
    return rep;
}

nlohmann::json TemplateValidationReport::to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [rel, acc] : per_relation)
        per[rel] = {{"correct", acc.correct},
                    {"total", acc.total},
                    {"accuracy", static_cast<double>(acc.correct) / static_cast<double>(acc.total)}};
    return {{"template", template_name},
            {"total", total},
            {"correct", correct},
            {"accuracy", accuracy},
            {"per_relation", std::move(per)}};
}

}  // namespace kgu
