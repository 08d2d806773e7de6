#pragma once

// Probing layer: calibrated Yes/No/Unknown answer distributions per triple,
// the admission rule that gates edges into supporting subgraphs, the prompt
// templates sent to remote backends, and template validation.
//
// The synthetic model emulates a probed language model: a ground-truth map
// from label triples to distributions, a default for absent triples, and
// optional seeded logit-space jitter. Identical (model spec, query) pairs
// always produce identical results, including under the jitter.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kgu {

struct LabelTriple {
    std::string subject, relation, object;
    auto operator<=>(const LabelTriple&) const = default;
};

enum class Choice { Yes, No, Unknown, Other };
std::string_view to_string(Choice c);
Choice choice_from_string(std::string_view s);  // ParseError on anything else

struct AnswerDistribution {
    double yes = 0.0, no = 0.0, unknown = 0.0, other = 0.0;

    auto operator<=>(const AnswerDistribution&) const = default;

    // Components non-negative, sum within 1e-9 of 1. Throws DomainError.
    void validate() const;

    // Ties break toward the first of Yes, No, Unknown, Other. The Yes-vs-No
    // tie at (0.5, 0.5, 0, 0) must resolve to Yes: that distribution is the
    // documented worst case that still admits at u* = 1.
    Choice argmax() const;

    // Shannon entropy in bits over {yes, no, unknown} renormalized to sum 1;
    // components below 1e-12 contribute zero. If all three named choices are
    // zero (other == 1), defined as 0.
    double entropy_bits() const;
};

struct ProbeResult {
    AnswerDistribution dist;
    Choice argmax_choice = Choice::Other;
    double entropy_bits = 0.0;
    bool yes_in_top5 = false;
};

ProbeResult make_probe_result(const AnswerDistribution& dist, bool yes_in_top5);

// argmax == Yes, Yes among the top-5 tokens, and entropy <= u_star.
// u_star outside (0, log2 3] throws DomainError.
bool admit(const ProbeResult& r, double u_star);

class BeliefOracle {
public:
    virtual ~BeliefOracle() = default;
    // Thread-safe; implementations must not mutate observable state.
    virtual ProbeResult probe(const LabelTriple& query) const = 0;
};

class SyntheticBeliefModel final : public BeliefOracle {
public:
    SyntheticBeliefModel() = default;
    SyntheticBeliefModel(std::map<LabelTriple, AnswerDistribution> facts, AnswerDistribution default_absent,
                         double noise_scale = 0.0, std::uint64_t noise_seed = 0);

    static SyntheticBeliefModel from_json(const nlohmann::json& j);
    static SyntheticBeliefModel load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    ProbeResult probe(const LabelTriple& query) const override;

    const std::map<LabelTriple, AnswerDistribution>& facts() const { return facts_; }
    const AnswerDistribution& default_absent() const { return default_absent_; }
    double noise_scale() const { return noise_scale_; }
    std::uint64_t noise_seed() const { return noise_seed_; }

    // Used by the unlearning simulator to derive perturbed models.
    void set_fact(const LabelTriple& t, const AnswerDistribution& d);

private:
    std::map<LabelTriple, AnswerDistribution> facts_;
    AnswerDistribution default_absent_{0.05, 0.85, 0.10, 0.0};
    double noise_scale_ = 0.0;
    std::uint64_t noise_seed_ = 0;
};

// --- prompt templates ------------------------------------------------------

struct PromptTemplate {
    std::string name;
    std::string user_pattern;  // must use {entity1}, {entity2}, {relation}
};

PromptTemplate qwen_probe_template();
PromptTemplate llama_probe_template();
const std::string& probe_system_message();

// System message + blank line + substituted user pattern.
// Throws TemplateError if a placeholder is missing from the pattern.
std::string render_probe_prompt(const PromptTemplate& tpl, const LabelTriple& query);

// --- template validation ----------------------------------------------------

struct LabeledExample {
    LabelTriple triple;
    bool positive = true;
};

struct RelationAccuracy {
    std::size_t correct = 0, total = 0;
};

struct TemplateValidationReport {
    std::string template_name;
    std::size_t total = 0, correct = 0;
    double accuracy = 0.0;
    std::map<std::string, RelationAccuracy> per_relation;
    nlohmann::json to_json() const;
};

// Positives count as correct when argmax is Yes; negatives when argmax is No
// or Unknown. Empty set throws DomainError; template errors propagate.
TemplateValidationReport validate_template(const BeliefOracle& oracle, const PromptTemplate& tpl,
                                           std::span<const LabeledExample> validation_set);

}  // namespace kgu
