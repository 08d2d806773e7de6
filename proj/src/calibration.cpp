#include "kgu/calibration.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "kgu/error.hpp"
#include "kgu/util.hpp"

namespace kgu {

double entropy_bits(double yes, double no, double unknown) {
    for (double p : {yes, no, unknown})
        if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("entropy_bits: negative or non-finite component");
    double sum = yes + no + unknown;
    if (std::abs(sum - 1.0) > 1e-9)
        throw DomainError("entropy_bits: components sum to " + std::to_string(sum) + ", expected 1");
    double h = 0.0;
    for (double p : {yes, no, unknown})
        if (p > 1e-12) h -= p * std::log2(p);
    return h;
}

namespace {

// Entropy shapes used by the feasibility band; no sum validation needed here.
double h2(double p) {
    double h = 0.0;
    if (p > 1e-12) h -= p * std::log2(p);
    if (1.0 - p > 1e-12) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

double h_even_rest(double p) {
    double q = (1.0 - p) / 2.0;
    double h = 0.0;
    if (p > 1e-12) h -= p * std::log2(p);
    if (q > 1e-12) h -= 2.0 * q * std::log2(q);
    return h;
}

double h_tied_pair(double p) {
    double r = 1.0 - 2.0 * p;
    double h = 0.0;
    if (p > 1e-12) h -= 2.0 * p * std::log2(p);
    if (r > 1e-12) h -= r * std::log2(r);
    return h;
}

// f is monotone on [lo, hi]; solves f(p) = target to 1e-9.
template <typename F>
double bisect(F f, double lo, double hi, double target) {
    bool increasing = f(hi) > f(lo);
    for (int i = 0; i < 200 && hi - lo > 1e-9; ++i) {
        double mid = 0.5 * (lo + hi);
        bool below = f(mid) < target;
        if (below == increasing) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

YesProbRange yes_prob_range(double u_star) {
    if (!(u_star > 0.0) || u_star > kLog2Of3 + 1e-12)
        throw DomainError("yes_prob_range: u_star outside (0, log2 3]");
    double hi = bisect(h_even_rest, 1.0 / 3.0, 1.0, u_star);
    double lo = (u_star <= 1.0) ? bisect(h2, 0.5, 1.0, u_star)
                                : bisect(h_tied_pair, 1.0 / 3.0, 0.5, u_star);
    return {lo, hi};
}

std::array<double, 3> softmax3(double a, double b, double c) {
    double m = std::max({a, b, c});
    double ea = std::exp(a - m), eb = std::exp(b - m), ec = std::exp(c - m);
    double s = ea + eb + ec;
    return {ea / s, eb / s, ec / s};
}

double calibration_nll(std::span<const LogitRecord> records, double temperature) {
    double total = 0.0;
    for (const LogitRecord& r : records) {
        auto p = softmax3(r.z_yes / temperature, r.z_no / temperature, r.z_unknown / temperature);
        double like = r.positive ? p[0] : std::max(p[1], p[2]);
        total -= std::log(std::max(like, 1e-300));
    }
    return total / static_cast<double>(records.size());
}

std::vector<ReliabilityBin> reliability_bins(std::span<const Prediction> predictions, int n_bins) {
    if (n_bins < 1) throw DomainError("reliability_bins: n_bins must be >= 1");
    std::vector<ReliabilityBin> bins(static_cast<std::size_t>(n_bins));
    double width = 1.0 / n_bins;
    for (int i = 0; i < n_bins; ++i) {
        bins[i].lo = i * width;
        bins[i].hi = (i + 1) * width;
    }
    std::vector<double> conf_sum(n_bins, 0.0);
    std::vector<std::size_t> correct(n_bins, 0);
    for (const Prediction& p : predictions) {
        if (!(p.confidence >= 0.0 && p.confidence <= 1.0))
            throw DomainError("reliability_bins: confidence outside [0, 1]");
        int b = std::min(static_cast<int>(p.confidence * n_bins), n_bins - 1);
        ++bins[b].count;
        conf_sum[b] += p.confidence;
        if (p.correct) ++correct[b];
    }
    for (int i = 0; i < n_bins; ++i) {
        if (bins[i].count == 0) continue;
        bins[i].mean_confidence = conf_sum[i] / bins[i].count;
        bins[i].accuracy = static_cast<double>(correct[i]) / bins[i].count;
    }
    return bins;
}

double expected_calibration_error(std::span<const Prediction> predictions, int n_bins) {
    if (predictions.empty()) throw DomainError("expected_calibration_error: no predictions");
    auto bins = reliability_bins(predictions, n_bins);
    double ece = 0.0;
    for (const ReliabilityBin& b : bins)
        if (b.count)
            ece += (static_cast<double>(b.count) / predictions.size()) * std::abs(b.accuracy - b.mean_confidence);
    return ece;
}

namespace {

struct SplitPredictions {
    std::vector<Prediction> yes, no;
};

SplitPredictions split_by_argmax(std::span<const LogitRecord> records, double temperature) {
    SplitPredictions out;
    for (const LogitRecord& r : records) {
        auto p = softmax3(r.z_yes / temperature, r.z_no / temperature, r.z_unknown / temperature);
        int arg = 0;
        if (p[1] > p[arg]) arg = 1;
        if (p[2] > p[arg]) arg = 2;
        if (arg == 0)
            out.yes.push_back({p[0], r.positive});
        else if (arg == 1)
            out.no.push_back({p[1], !r.positive});
        // Unknown-argmax records belong to neither ECE split.
    }
    return out;
}

double ece_or_zero(std::span<const Prediction> preds, int n_bins) {
    return preds.empty() ? 0.0 : expected_calibration_error(preds, n_bins);
}

}  // namespace

CalibrationReport fit_temperature(std::span<const LogitRecord> records, int n_bins) {
    if (records.size() < 10)
        throw DomainError("fit_temperature: need at least 10 records, got " + std::to_string(records.size()));
    std::size_t positives = 0;
    for (const LogitRecord& r : records) positives += r.positive ? 1 : 0;
    if (positives == 0 || positives == records.size())
        throw DomainError("fit_temperature: records all carry the same label");

    // Golden-section on ln T.
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(0.05), b = std::log(20.0);
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = calibration_nll(records, std::exp(c));
    double fd = calibration_nll(records, std::exp(d));
    while (std::abs(b - a) > 1e-4 * std::max(1.0, std::abs(a) + std::abs(b))) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - invphi * (b - a);
            fc = calibration_nll(records, std::exp(c));
        } else {
            a = c; c = d; fc = fd;
            d = a + invphi * (b - a);
            fd = calibration_nll(records, std::exp(d));
        }
    }
    double fitted = std::exp(0.5 * (a + b));
    if (calibration_nll(records, fitted) > calibration_nll(records, 1.0)) fitted = 1.0;

    CalibrationReport rep;
    rep.temperature = fitted;
    rep.n_records = records.size();
    auto before = split_by_argmax(records, 1.0);
    rep.ece_yes_before = ece_or_zero(before.yes, n_bins);
    rep.ece_no_before = ece_or_zero(before.no, n_bins);
    auto after = split_by_argmax(records, fitted);
    rep.ece_yes = ece_or_zero(after.yes, n_bins);
    rep.ece_no = ece_or_zero(after.no, n_bins);
    rep.bins_yes = reliability_bins(after.yes, n_bins);
    rep.bins_no = reliability_bins(after.no, n_bins);
    return rep;
}

namespace {

nlohmann::json bins_to_json(const std::vector<ReliabilityBin>& bins) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ReliabilityBin& b : bins)
        arr.push_back({{"lo", b.lo},
                       {"hi", b.hi},
                       {"mean_confidence", b.mean_confidence},
                       {"accuracy", b.accuracy},
                       {"count", b.count}});
    return arr;
}

std::vector<ReliabilityBin> bins_from_json(const nlohmann::json& arr) {
    std::vector<ReliabilityBin> bins;
    for (const auto& j : arr)
        bins.push_back({j.at("lo").get<double>(), j.at("hi").get<double>(),
                        j.at("mean_confidence").get<double>(), j.at("accuracy").get<double>(),
                        j.at("count").get<std::size_t>()});
    return bins;
}

}  // namespace

nlohmann::json CalibrationReport::to_json() const {
    return {{"temperature", temperature},
            {"ece_yes", ece_yes},
            {"ece_no", ece_no},
            {"ece_yes_before", ece_yes_before},
            {"ece_no_before", ece_no_before},
            {"bins_yes", bins_to_json(bins_yes)},
            {"bins_no", bins_to_json(bins_no)},
            {"n_records", n_records}};
}

CalibrationReport CalibrationReport::from_json(const nlohmann::json& j) {
    CalibrationReport rep;
    rep.temperature = j.at("temperature").get<double>();
    rep.ece_yes = j.at("ece_yes").get<double>();
    rep.ece_no = j.at("ece_no").get<double>();
    rep.ece_yes_before = j.at("ece_yes_before").get<double>();
    rep.ece_no_before = j.at("ece_no_before").get<double>();
    rep.bins_yes = bins_from_json(j.at("bins_yes"));
    rep.bins_no = bins_from_json(j.at("bins_no"));
    rep.n_records = j.at("n_records").get<std::size_t>();
    return rep;
}

void CalibrationReport::write_bins_csv(std::ostream& out) const {
    out << "split,bin_lo,bin_hi,mean_confidence,accuracy,count\n";
    auto dump = [&](const char* split, const std::vector<ReliabilityBin>& bins) {
        for (const ReliabilityBin& b : bins)
            out << split << ',' << fmt_fixed(b.lo, 2) << ',' << fmt_fixed(b.hi, 2) << ','
                << fmt_fixed(b.mean_confidence, 6) << ',' << fmt_fixed(b.accuracy, 6) << ',' << b.count
                << '\n';
    };
    dump("yes", bins_yes);
    dump("no", bins_no);
}

}  // namespace kgu
