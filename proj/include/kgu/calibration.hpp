#pragma once

// Numeric core for confidence handling: three-choice entropy, the feasible
// Yes-probability band for an entropy budget, temperature scaling fitted by
// NLL, and expected calibration error with reliability bins.

#include <array>
#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace kgu {

inline constexpr double kLog2Of3 = 1.5849625007211562;

// Shannon entropy in bits of (yes, no, unknown). Inputs must be non-negative
// and sum to 1 within 1e-9 (DomainError otherwise); components below 1e-12
// contribute zero.
double entropy_bits(double yes, double no, double unknown);

struct YesProbRange {
    double lo, hi;
};

// Feasible Yes-probability band over distributions with argmax Yes and
// entropy exactly u_star.
//   hi solves u* = H(p, (1-p)/2, (1-p)/2)            on p in [1/3, 1]
//   lo solves u* = H(p, 1-p, 0)     for u* <= 1      on p in [1/2, 1]
//      and     u* = H(p, p, 1-2p)   for u* in (1, log2 3] on p in [1/3, 1/2]
//      (the argmax-feasible minimum moves to the two-way-tie boundary once
//       the two-choice branch tops out at 1 bit).
// Bisection to 1e-9. u_star outside (0, log2 3] throws DomainError.
YesProbRange yes_prob_range(double u_star);

struct LogitRecord {
    double z_yes, z_no, z_unknown;
    bool positive;  // gold label of the probe
};

struct Prediction {
    double confidence;
    bool correct;
};

struct ReliabilityBin {
    double lo = 0.0, hi = 0.0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
    std::size_t count = 0;
};

// Equal-width bins over [0, 1]; confidence 1.0 lands in the last bin.
// ECE = sum_b (|b| / N) * |acc_b - conf_b|. Empty input throws DomainError.
double expected_calibration_error(std::span<const Prediction> predictions, int n_bins = 10);
std::vector<ReliabilityBin> reliability_bins(std::span<const Prediction> predictions, int n_bins = 10);

struct CalibrationReport {
    double temperature = 1.0;
    // ECE per argmax split at the fitted temperature, plus the T = 1 values
    // for comparison. Records whose argmax is Unknown belong to neither split.
    double ece_yes = 0.0, ece_no = 0.0;
    double ece_yes_before = 0.0, ece_no_before = 0.0;
    std::vector<ReliabilityBin> bins_yes, bins_no;
    std::size_t n_records = 0;

    nlohmann::json to_json() const;
    static CalibrationReport from_json(const nlohmann::json& j);
    void write_bins_csv(std::ostream& out) const;
};

// Fits T by golden-section search on ln T over [ln 0.05, ln 20] (relative
// tolerance 1e-4) minimizing mean NLL of the correct choice: p_yes for
// positives, max(p_no, p_unknown) for negatives, under softmax(z / T).
// Falls back to T = 1 if the search cannot beat it. Fewer than 10 records or
// single-label data throw DomainError.
CalibrationReport fit_temperature(std::span<const LogitRecord> records, int n_bins = 10);

// Mean NLL at a given temperature; exposed for tests and reporting.
double calibration_nll(std::span<const LogitRecord> records, double temperature);

std::array<double, 3> softmax3(double a, double b, double c);

}  // namespace kgu
