#include "qdelay/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "csv.hpp"

namespace qdelay {
namespace {

void check_lengths(std::span<const double> preds, std::span<const double> labels) {
    if (preds.size() != labels.size()) {
        throw std::invalid_argument("metrics: " + std::to_string(preds.size()) + " predictions vs " +
                                    std::to_string(labels.size()) + " labels");
    }
    if (preds.empty()) throw std::invalid_argument("metrics: no samples");
}

}  // namespace

double les_predict(const Sample& s) {
    if (s.features.empty()) throw std::invalid_argument("les_predict: sample has no features");
    return s.features.front();
}

double hol_predict(const Sample& s) {
    if (std::isnan(s.hol)) throw std::invalid_argument("hol_predict: sample carries no HOL delay");
    return s.hol;
}

double bias(std::span<const double> preds, std::span<const double> labels) {
    check_lengths(preds, labels);
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) sum += labels[i] - preds[i];
    return std::abs(sum / static_cast<double>(preds.size()));
}

double ase(std::span<const double> preds, std::span<const double> labels) {
    check_lengths(preds, labels);
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double e = labels[i] - preds[i];
        sum += e * e;
    }
    return sum / static_cast<double>(preds.size());
}

double mse_reduction(double candidate_ase, double baseline_ase) {
    if (!(baseline_ase > 0.0)) throw std::invalid_argument("mse_reduction: baseline ASE must be > 0");
    return 1.0 - candidate_ase / baseline_ase;
}

Calibration calibration(std::span<const GaussianMixture> mixtures, std::span<const double> labels, double eps_ub,
                        double eps_lb, double p_cl) {
    if (mixtures.size() != labels.size()) {
        throw std::invalid_argument("calibration: " + std::to_string(mixtures.size()) + " mixtures vs " +
                                    std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) throw std::invalid_argument("calibration: no samples");
    std::size_t above = 0, below = 0, inside = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto b = bounds(mixtures[i], eps_ub, eps_lb);
        const double center = mixtures[i].mean();
        const double x = confidence_interval(mixtures[i], p_cl);
        if (labels[i] > b.upper) ++above;
        if (labels[i] < b.lower) ++below;
        if (labels[i] >= center - x && labels[i] <= center + x) ++inside;
    }
    const double n = static_cast<double>(labels.size());
    return {static_cast<double>(above) / n, static_cast<double>(below) / n, static_cast<double>(inside) / n};
}

void to_json(nlohmann::json& j, const EvalReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j = {{"predictor", r.predictor},
         {"n_sample", r.n_sample},
         {"bias", r.bias},
         {"ase", r.ase},
         {"baseline", r.baseline},
         {"baseline_ase", r.baseline_ase},
         {"mse_reduction_vs_baseline", r.mse_reduction_vs_baseline},
         {"bound_violation_ub", opt(r.bound_violation_ub)},
         {"bound_violation_lb", opt(r.bound_violation_lb)},
         {"ci_coverage", opt(r.ci_coverage)}};
}

EvalReport make_report(const std::string& predictor, std::span<const double> preds, const Dataset& test) {
    const auto labels = test.labels();
    std::vector<double> les(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) les[i] = les_predict(test[i]);
    EvalReport r;
    r.predictor = predictor;
    r.n_sample = test.size();
    r.bias = bias(preds, labels);
    r.ase = ase(preds, labels);
    r.baseline = "les";
    r.baseline_ase = ase(les, labels);
    r.mse_reduction_vs_baseline = mse_reduction(r.ase, r.baseline_ase);
    return r;
}

void export_scatter(std::span<const double> preds, std::span<const double> labels, const std::string& path, std::size_t cap) {
    if (preds.size() != labels.size()) throw std::invalid_argument("export_scatter: length mismatch");
    csv::Writer w(path);
    w.line("label,prediction");
    const std::size_t n = preds.size();
    const std::size_t rows = std::min(n, cap);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = rows == n ? r : r * n / rows;
        w.row(labels[i], preds[i]);
    }
    w.close();
}

ScatterData read_scatter(const std::string& path) {
    csv::Reader reader(path);
    reader.expect_header({"label", "prediction"});
    ScatterData out;
    std::vector<double> f;
    while (reader.next(f)) {
        out.labels.push_back(f[0]);
        out.preds.push_back(f[1]);
    }
    return out;
}

void export_sample_path(std::span<const Sample> samples, std::span<const double> preds, std::span<const Band> bands,
                        const std::string& path) {
    if (samples.size() != preds.size() || samples.size() != bands.size()) {
        throw std::invalid_argument("export_sample_path: samples, predictions and bands differ in length");
    }
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return samples[a].arrival_time < samples[b].arrival_time; });
    csv::Writer w(path);
    w.line("arrival_time,label,mmse,lb,ub,ci_lo,ci_hi,lb_raw");
    for (std::size_t i : order) {
        const auto& b = bands[i];
        w.row(samples[i].arrival_time, samples[i].label, preds[i], std::max(0.0, b.lb), b.ub, preds[i] - b.ci_half_width,
              preds[i] + b.ci_half_width, b.lb);
    }
    w.close();
}

std::vector<SamplePathRow> read_sample_path(const std::string& path) {
    csv::Reader reader(path);
    reader.expect_header({"arrival_time", "label", "mmse", "lb", "ub", "ci_lo", "ci_hi", "lb_raw"});
    std::vector<SamplePathRow> rows;
    std::vector<double> f;
    while (reader.next(f)) rows.push_back({f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7]});
    return rows;
}

}  // namespace qdelay
