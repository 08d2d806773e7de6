#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "kgu/calibration.hpp"
#include "kgu/error.hpp"
#include "kgu/util.hpp"

using namespace kgu;

namespace {

double entropy3(double a, double b, double c) {
    double h = 0.0;
    for (double p : {a, b, c})
        if (p > 1e-12) h -= p * std::log2(p);
    return h;
}

// Independent bisection on the same two feasibility curves, written from
// first principles; the library can only agree with it by being right.
double solve_hi(double u) {
    double lo = 1.0 / 3.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        double h = entropy3(mid, (1 - mid) / 2, (1 - mid) / 2);
        (h > u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double solve_lo(double u) {
    if (u <= 1.0) {
        double lo = 0.5, hi = 1.0;
        for (int i = 0; i < 200; ++i) {
            double mid = 0.5 * (lo + hi);
            double h = entropy3(mid, 1 - mid, 0.0);
            (h > u ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
    // This curve decreases in p: uniform at p = 1/3, one bit at p = 1/2.
    double lo = 1.0 / 3.0, hi = 0.5;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        double h = entropy3(mid, mid, 1 - 2 * mid);
        (h > u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Logits are t0 * log(p) for a near-binary true distribution, with labels
// drawn from p itself, so T = t0 is the exact NLL optimum in expectation.
std::vector<LogitRecord> synthetic_logits(double t0, int n, std::uint64_t seed) {
    DetRng rng(seed);
    std::vector<LogitRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double py = 0.15 + 0.7 * rng.next_double();
        double pn = (1.0 - py) * (1.0 - 1e-6);
        double pu = (1.0 - py) * 1e-6;
        LogitRecord rec;
        rec.z_yes = t0 * std::log(py);
        rec.z_no = t0 * std::log(pn);
        rec.z_unknown = t0 * std::log(pu);
        rec.positive = rng.next_double() < py;
        out.push_back(rec);
    }
    return out;
}

double grid_fit(const std::vector<LogitRecord>& recs) {
    double best_t = 1.0, best_nll = 1e300;
    for (double lt = std::log(0.05); lt <= std::log(20.0) + 1e-9; lt += 1e-4) {
        double t = std::exp(lt);
        double nll = calibration_nll(recs, t);
        if (nll < best_nll) {
            best_nll = nll;
            best_t = t;
        }
    }
    return best_t;
}

}  // namespace

TEST_CASE("entropy anchors") {
    CHECK(entropy_bits(0.5, 0.5, 0.0) == 1.0);
    CHECK(entropy_bits(1.0, 0.0, 0.0) == 0.0);
    CHECK(entropy_bits(1.0 / 3, 1.0 / 3, 1.0 / 3) == doctest::Approx(kLog2Of3).epsilon(1e-12));
    // A component below 1e-12 contributes exactly zero bits.
    CHECK(entropy_bits(0.5, 0.5, 1e-13) == 1.0);
    CHECK(entropy_bits(1.0 - 5e-13, 5e-13, 0.0) < 1e-11);
    CHECK_THROWS_AS(entropy_bits(0.5, 0.5, 0.2), DomainError);
    CHECK_THROWS_AS(entropy_bits(-0.1, 0.6, 0.5), DomainError);
}

TEST_CASE("entropy pinned values") {
    CHECK(entropy_bits(0.97, 0.02, 0.01) == doctest::Approx(0.22194073285321086).epsilon(1e-12));
    CHECK(entropy_bits(0.6, 0.3, 0.1) == doctest::Approx(1.295461844238322).epsilon(1e-12));
    CHECK(entropy_bits(0.95, 0.025, 0.025) == doctest::Approx(0.3363969571159562).epsilon(1e-12));
    CHECK(kLog2Of3 == doctest::Approx(1.584962500721156).epsilon(1e-15));
}

TEST_CASE("yes prob range matches an independent bisection") {
    for (double u : {0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0, 1.1, 1.3, 1.5, 1.58}) {
        YesProbRange band = yes_prob_range(u);
        CHECK(band.lo == doctest::Approx(solve_lo(u)).epsilon(1e-7));
        CHECK(band.hi == doctest::Approx(solve_hi(u)).epsilon(1e-7));
    }
    YesProbRange unit = yes_prob_range(1.0);
    CHECK(unit.lo == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(unit.hi == doctest::Approx(0.772908).epsilon(1e-5));
    // At the entropy ceiling the band collapses onto the uniform point.
    YesProbRange top = yes_prob_range(kLog2Of3);
    CHECK(top.lo == doctest::Approx(1.0 / 3).epsilon(1e-7));
    CHECK(top.hi == doctest::Approx(1.0 / 3).epsilon(1e-7));
    CHECK_THROWS_AS(yes_prob_range(0.0), DomainError);
    CHECK_THROWS_AS(yes_prob_range(1.6), DomainError);
}

TEST_CASE("admissible band table") {
    struct Row {
        double u, lo, hi;
    };
    const Row rows[] = {
        {0.10, 0.987, 0.989}, {0.15, 0.978, 0.982}, {0.20, 0.969, 0.974},
        {0.25, 0.958, 0.966}, {0.30, 0.947, 0.957}, {0.35, 0.934, 0.947},
        {0.40, 0.921, 0.937}, {0.45, 0.906, 0.927}, {0.50, 0.890, 0.916},
        {0.55, 0.873, 0.905}, {0.60, 0.854, 0.892}, {0.65, 0.833, 0.880},
        {0.70, 0.811, 0.867}, {0.75, 0.785, 0.853}, {0.80, 0.757, 0.838},
        {0.85, 0.724, 0.823}, {0.90, 0.684, 0.807}, {0.95, 0.631, 0.791},
        {1.00, 0.500, 0.773},
    };
    for (const Row& row : rows) {
        YesProbRange band = yes_prob_range(row.u);
        CHECK(std::fabs(band.lo - row.lo) <= 0.001);
        CHECK(std::fabs(band.hi - row.hi) <= 0.001);
    }
}

TEST_CASE("expected calibration error hand case") {
    // Two predictions at confidence 0.9, one correct: one occupied bin,
    // |0.5 - 0.9| = 0.4.
    std::vector<Prediction> preds{{0.9, true}, {0.9, false}};
    CHECK(expected_calibration_error(preds) == doctest::Approx(0.4).epsilon(1e-12));
    // Confidence 1.0 lands in the last bin rather than out of range.
    std::vector<Prediction> edge{{1.0, true}};
    CHECK(expected_calibration_error(edge) == 0.0);
    CHECK_THROWS_AS(expected_calibration_error(std::vector<Prediction>{}), DomainError);
    CHECK_THROWS_AS(expected_calibration_error(std::vector<Prediction>{{1.2, true}}), DomainError);
}

TEST_CASE("perfectly calibrated set scores under 0.02") {
    DetRng rng(99);
    std::vector<Prediction> preds;
    for (int i = 0; i < 20000; ++i) {
        double conf = rng.next_double();
        preds.push_back({conf, rng.next_double() < conf});
    }
    CHECK(expected_calibration_error(preds, 10) < 0.02);
}

TEST_CASE("reliability bins partition correctly") {
    std::vector<Prediction> preds{{0.05, false}, {0.15, true}, {0.95, true}, {1.0, true}};
    auto bins = reliability_bins(preds, 10);
    REQUIRE(bins.size() == 10);
    CHECK(bins[0].count == 1);
    CHECK(bins[1].count == 1);
    CHECK(bins[9].count == 2);
    CHECK(bins[9].accuracy == 1.0);
    CHECK(bins[9].mean_confidence == doctest::Approx(0.975));
    CHECK(bins[5].count == 0);
}

TEST_CASE("temperature fit matches a grid search oracle") {
    auto recs = synthetic_logits(2.0, 400, 11);
    auto report = fit_temperature(recs);
    double oracle = grid_fit(recs);
    CHECK(report.temperature == doctest::Approx(oracle).epsilon(2e-3));
}

TEST_CASE("temperature recovery within five percent") {
    for (double t0 : {0.5, 2.0, 5.0}) {
        auto recs = synthetic_logits(t0, 4000, 17);
        auto report = fit_temperature(recs);
        CHECK(std::fabs(report.temperature - t0) / t0 < 0.05);
        CHECK(report.ece_yes <= report.ece_yes_before + 1e-12);
        CHECK(report.ece_no <= report.ece_no_before + 1e-12);
    }
}

TEST_CASE("temperature fit input validation") {
    auto few = synthetic_logits(1.0, 9, 3);
    CHECK_THROWS_AS(fit_temperature(few), DomainError);
    auto recs = synthetic_logits(1.0, 40, 3);
    for (auto& r : recs) r.positive = true;
    CHECK_THROWS_AS(fit_temperature(recs), DomainError);
}

TEST_CASE("nll hand check") {
    LogitRecord pos{std::log(0.5), std::log(0.25), std::log(0.25), true};
    LogitRecord neg{std::log(0.5), std::log(0.25), std::log(0.25), false};
    std::vector<LogitRecord> recs{pos};
    CHECK(calibration_nll(recs, 1.0) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
    // Negatives are scored on the better of No and Unknown.
    recs = {neg};
    CHECK(calibration_nll(recs, 1.0) == doctest::Approx(-std::log(0.25)).epsilon(1e-12));
    // A huge temperature flattens everything toward uniform.
    CHECK(calibration_nll(recs, 1e6) == doctest::Approx(std::log(3.0)).epsilon(1e-3));
}

TEST_CASE("report round trips through json and writes bins") {
    auto recs = synthetic_logits(2.0, 400, 23);
    auto report = fit_temperature(recs);
    auto back = CalibrationReport::from_json(report.to_json());
    CHECK(back.temperature == report.temperature);
    CHECK(back.ece_yes == report.ece_yes);
    CHECK(back.ece_no_before == report.ece_no_before);
    CHECK(back.n_records == report.n_records);
    CHECK(back.bins_yes.size() == report.bins_yes.size());
    CHECK(back.to_json() == report.to_json());

    std::ostringstream csv;
    report.write_bins_csv(csv);
    std::string text = csv.str();
    auto lines = split(text, '\n');
    std::size_t filled = 0;
    for (auto line : lines)
        if (!line.empty()) ++filled;
    CHECK(filled == 21);  // header + 10 yes bins + 10 no bins
    CHECK(lines[0] == "split,bin_lo,bin_hi,mean_confidence,accuracy,count");
}
