#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "kgu/error.hpp"
#include "kgu/judge.hpp"
#include "kgu/util.hpp"

#include <nlohmann/json.hpp>

using namespace kgu;

namespace {

// Symmetric-split distribution with the requested entropy, so fixtures carry
// an internally consistent (dist, entropy) pair.
AnswerDistribution dist_with_entropy(double h) {
    double lo = 1.0 / 3.0, hi = 1.0;
    for (int i = 0; i < 100; ++i) {
        double mid = 0.5 * (lo + hi);
        double q = (1.0 - mid) / 2.0;
        double got = -mid * std::log2(mid);
        if (q > 1e-12) got -= 2.0 * q * std::log2(q);
        (got > h ? lo : hi) = mid;
    }
    double p = 0.5 * (lo + hi);
    return {p, (1.0 - p) / 2.0, (1.0 - p) / 2.0, 0.0};
}

using EdgeSpec = std::tuple<std::string, std::string, std::string, double>;

SupportingSubgraph make_sg(LabelTriple target, const std::vector<EdgeSpec>& rows) {
    SupportingSubgraph sg;
    sg.target = std::move(target);
    for (const auto& [s, r, o, h] : rows)
        sg.edges.push_back({{s, r, o}, h, dist_with_entropy(h)});
    return sg;
}

int score_of(const SupportingSubgraph& sg, const RubricConfig& rubric) {
    return rule_judge(sg, sg.target, rubric).score;
}

}  // namespace

TEST_CASE("worked example scores zero through five") {
    auto rubric = RubricConfig::defaults();

    auto rome = make_sg({"Rome", "located_in", "Europe"},
                        {{"Rome", "capital_of", "Italy", 0.08},
                         {"Italy", "located_in", "Europe", 0.12}});
    CHECK(score_of(rome, rubric) == 5);

    auto apple = make_sg({"Apple", "manufactures", "iPhone"},
                         {{"Apple", "produces", "iPhone", 0.35},
                          {"iPhone", "runs_on", "iOS", 0.15},
                          {"Apple", "develops", "iOS", 0.20}});
    CHECK(score_of(apple, rubric) == 4);

    auto einstein = make_sg({"Einstein", "lived_in", "USA"},
                            {{"Einstein", "worked_at", "Princeton_University", 0.55},
                             {"Princeton_University", "located_in", "New_Jersey", 0.30},
                             {"New_Jersey", "part_of", "USA", 0.25}});
    CHECK(score_of(einstein, rubric) == 3);

    auto tiger = make_sg({"Tiger", "hunts", "Lion"},
                         {{"Tiger", "belongs_to", "Felidae", 0.45},
                          {"Lion", "belongs_to", "Felidae", 0.40},
                          {"Felidae", "is_carnivorous", "True", 0.25}});
    CHECK(score_of(tiger, rubric) == 2);

    auto sun = make_sg({"Sun", "orbited_by", "Moon"},
                       {{"Sun", "larger_than", "Earth", 0.60},
                        {"Earth", "has_satellite", "Moon", 0.30}});
    CHECK(score_of(sun, rubric) == 1);

    auto water = make_sg({"Water", "extinguishes", "Fire"},
                         {{"Water", "contains", "Hydrogen", 0.25},
                          {"Tree", "produces", "Oxygen", 0.40},
                          {"Fire", "consumes", "Oxygen", 0.35}});
    CHECK(score_of(water, rubric) == 0);

    auto empty = make_sg({"a", "r", "b"}, {});
    CHECK(score_of(empty, rubric) == 0);
}

TEST_CASE("verdict explains its paths") {
    auto rubric = RubricConfig::defaults();
    auto rome = make_sg({"Rome", "located_in", "Europe"},
                        {{"Rome", "capital_of", "Italy", 0.08},
                         {"Italy", "located_in", "Europe", 0.12}});
    auto verdict = rule_judge(rome, rome.target, rubric);
    CHECK(verdict.direct_paths.empty());
    REQUIRE(verdict.support_paths.size() == 1);
    CHECK(verdict.support_paths[0].valid);
    CHECK(verdict.support_paths[0].rule == "capital_of,located_in->located_in");
    CHECK(verdict.support_paths[0].tier == Tier::Low);
    CHECK_FALSE(verdict.rationale.empty());
    CHECK(verdict.to_json().at("score").get<int>() == 5);

    LabelTriple other{"x", "y", "z"};
    CHECK_THROWS_AS(rule_judge(rome, other, rubric), DomainError);
}

TEST_CASE("tier boundaries are half open") {
    auto rubric = RubricConfig::defaults();
    CHECK(rubric.tier_of(0.0) == Tier::Low);
    CHECK(rubric.tier_of(0.2499) == Tier::Low);
    CHECK(rubric.tier_of(0.25) == Tier::ModeratelyLow);
    CHECK(rubric.tier_of(0.3499) == Tier::ModeratelyLow);
    CHECK(rubric.tier_of(0.35) == Tier::RelativelyHigh);
    CHECK(rubric.tier_of(0.5499) == Tier::RelativelyHigh);
    CHECK(rubric.tier_of(0.55) == Tier::High);
    CHECK(rubric.tier_of(1.58) == Tier::High);
}

TEST_CASE("duplicates collapse to minimum entropy and order is irrelevant") {
    auto rubric = RubricConfig::defaults();
    auto base = make_sg({"Rome", "located_in", "Europe"},
                        {{"Rome", "capital_of", "Italy", 0.08},
                         {"Italy", "located_in", "Europe", 0.12}});
    // A noisy duplicate of an existing edge must not change anything.
    auto noisy = make_sg(base.target,
                         {{"Italy", "located_in", "Europe", 0.12},
                          {"Rome", "capital_of", "Italy", 0.95},
                          {"Rome", "capital_of", "Italy", 0.08}});
    CHECK(score_of(noisy, rubric) == score_of(base, rubric));

    // The surviving copy is the confident one, not the first one seen.
    auto swapped = make_sg(base.target,
                           {{"Rome", "capital_of", "Italy", 0.95},
                            {"Rome", "capital_of", "Italy", 0.08},
                            {"Italy", "located_in", "Europe", 0.12}});
    auto verdict = rule_judge(swapped, swapped.target, rubric);
    CHECK(verdict.score == 5);
    REQUIRE(verdict.support_paths.size() == 1);
    CHECK(verdict.support_paths[0].tier == Tier::Low);
}

TEST_CASE("deleting an edge never raises the score") {
    auto rubric = RubricConfig::defaults();
    const std::string entities[] = {"A", "B", "C", "D", "E", "F"};
    const std::string relations[] = {"capital_of", "located_in", "worked_at", "part_of",
                                     "isKnownFor",  "owns",       "hasNeighbor", "isLocatedIn",
                                     "produces",    "manufactures"};
    const std::string targets[] = {"located_in", "isLocatedIn", "created", "lived_in",
                                   "owns",       "produces"};
    DetRng rng(60601);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<EdgeSpec> rows;
        int n_edges = 2 + static_cast<int>(rng.next_below(5));
        for (int e = 0; e < n_edges; ++e) {
            auto s = entities[rng.next_below(6)];
            auto o = entities[rng.next_below(6)];
            if (s == o) continue;
            rows.push_back({s, relations[rng.next_below(10)], o, 1.3 * rng.next_double()});
        }
        LabelTriple target{"A", targets[rng.next_below(6)], "B"};
        auto full = make_sg(target, rows);
        int full_score = score_of(full, rubric);
        for (std::size_t drop = 0; drop < rows.size(); ++drop) {
            auto pruned_rows = rows;
            pruned_rows.erase(pruned_rows.begin() + static_cast<std::ptrdiff_t>(drop));
            auto pruned = make_sg(target, pruned_rows);
            REQUIRE(score_of(pruned, rubric) <= full_score);
        }
    }
}

TEST_CASE("judge prompt pins the documented shape") {
    auto sg = make_sg({"Rome", "located_in", "Europe"},
                      {{"Rome", "capital_of", "Italy", 0.08},
                       {"Italy", "located_in", "Europe", 0.12}});
    auto prompt = render_judge_prompt(sg, sg.target);
    CHECK(prompt.rfind("You are a reasoning assistant", 0) == 0);
    CHECK(prompt.find("(Rome, capital_of, Italy) with entropy 0.080") != std::string::npos);
    CHECK(prompt.find("(Italy, located_in, Europe) with entropy 0.120") != std::string::npos);
    CHECK(prompt.find("Target Triple:\n(Rome, located_in, Europe)") != std::string::npos);
    CHECK(prompt.find("Final Confidence Score: <integer between 0 and 5>") != std::string::npos);
    // Entropy values are printed with exactly three decimals.
    auto one = make_sg({"a", "r", "b"}, {{"a", "q", "b", 1.0}});
    CHECK(render_judge_prompt(one, one.target).find("with entropy 1.000") != std::string::npos);
}

TEST_CASE("response parsing takes the last marker") {
    CHECK(parse_judge_response("Final Confidence Score: 5") == 5);
    CHECK(parse_judge_response("**Final Confidence Score: 4**") == 4);
    CHECK(parse_judge_response("final confidence score = 2") == 2);
    CHECK(parse_judge_response("FINAL CONFIDENCE SCORE:\n3") == 3);
    CHECK(parse_judge_response("I think Final Confidence Score: 1 but on reflection\n"
                               "Final Confidence Score: 0") == 0);
    CHECK_THROWS_AS(parse_judge_response("the score is probably three"), ParseError);
    CHECK_THROWS_AS(parse_judge_response("Final Confidence Score: 7"), ParseError);
    CHECK_THROWS_AS(parse_judge_response(""), ParseError);
    CHECK_THROWS_AS(parse_judge_response("Final Confidence Score: high"), ParseError);
}

TEST_CASE("parse inverts a compliant rendering") {
    for (int s = 0; s <= 5; ++s) {
        std::string reply = "Reasoning: the path composes cleanly.\n\nFinal Confidence Score: " +
                            std::to_string(s) + "\n";
        CHECK(parse_judge_response(reply) == s);
    }
}

TEST_CASE("agreement on perfectly correlated ratings") {
    std::vector<std::vector<double>> a{{0}, {1}, {2}, {3}};
    std::vector<std::vector<double>> b{{1}, {2}, {3}, {4}};
    auto rep = agreement(a, b);
    REQUIRE(rep.pearson.has_value());
    REQUIRE(rep.spearman.has_value());
    CHECK(*rep.pearson == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*rep.spearman == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.mean_a == std::vector<double>{0, 1, 2, 3});
    CHECK(rep.abs_gap == std::vector<double>{1, 1, 1, 1});
    CHECK(rep.note.empty());
}

TEST_CASE("agreement averages raters and ranks ties") {
    std::vector<std::vector<double>> a{{1, 1}, {1, 1}, {2, 2}};
    std::vector<std::vector<double>> b{{1}, {2}, {3}};
    auto rep = agreement(a, b);
    CHECK(rep.mean_a == std::vector<double>{1, 1, 2});
    // Tied means get average ranks: a -> (1.5, 1.5, 3) against (1, 2, 3).
    REQUIRE(rep.spearman.has_value());
    CHECK(*rep.spearman == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("agreement with degenerate input") {
    std::vector<std::vector<double>> flat{{2}, {2}, {2}};
    std::vector<std::vector<double>> vary{{1}, {2}, {3}};
    auto rep = agreement(flat, vary);
    CHECK_FALSE(rep.pearson.has_value());
    CHECK_FALSE(rep.spearman.has_value());
    CHECK_FALSE(rep.note.empty());
    auto j = rep.to_json();
    CHECK(j.at("pearson").is_null());

    CHECK_THROWS_AS(agreement({{1}}, {{1}, {2}}), DomainError);
    CHECK_THROWS_AS(agreement({{1}, {}}, {{1}, {2}}), DomainError);
    CHECK_THROWS_AS(agreement({}, {}), DomainError);
}

TEST_CASE("rubric behavior survives a json round trip") {
    auto rubric = RubricConfig::defaults();
    auto back = RubricConfig::from_json(rubric.to_json());
    CHECK(back.similar("produces", "manufactures"));
    CHECK(back.similar("manufactures", "produces"));
    CHECK(back.similar("produces", "produces"));
    CHECK_FALSE(back.similar("produces", "owns"));
    REQUIRE(back.implied({"capital_of", "located_in"}).has_value());
    CHECK(*back.implied({"capital_of", "located_in"}) == "located_in");
    CHECK_FALSE(back.implied({"located_in", "no_such"}).has_value());
    CHECK(back.tier_bounds == rubric.tier_bounds);
    CHECK(back.to_json() == rubric.to_json());
}

TEST_CASE("rubric validation") {
    auto rubric = RubricConfig::defaults();
    rubric.tier_bounds = {0.5, 0.35, 0.55};
    CHECK_THROWS_AS(rubric.validate(), DomainError);
    rubric = RubricConfig::defaults();
    rubric.tier_bounds = {-0.1, 0.35, 0.55};
    CHECK_THROWS_AS(rubric.validate(), DomainError);
    rubric = RubricConfig::defaults();
    rubric.compositions[{"only_one"}] = "broken";
    CHECK_THROWS_AS(rubric.validate(), DomainError);
    rubric = RubricConfig::defaults();
    rubric.compositions[{"a", "b", "c", "d"}] = "broken";
    CHECK_THROWS_AS(rubric.validate(), DomainError);
}
