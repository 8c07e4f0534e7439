#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "qdelay/dataset.hpp"
#include "qdelay/mixture.hpp"

namespace qdelay {

/// LES predictor: the wait of the last customer to enter service.
double les_predict(const Sample& s);

/// HOL predictor: the elapsed wait of the head of the queue at arrival.
double hol_predict(const Sample& s);

/// |mean(label - prediction)|
double bias(std::span<const double> preds, std::span<const double> labels);

/// Mean squared prediction error.
double ase(std::span<const double> preds, std::span<const double> labels);

/// 1 - candidate / baseline. Baseline must be positive.
double mse_reduction(double candidate_ase, double baseline_ase);

struct Calibration {
    double violation_ub = 0.0;
    double violation_lb = 0.0;
    double coverage = 0.0;
};

Calibration calibration(std::span<const GaussianMixture> mixtures, std::span<const double> labels, double eps_ub,
                        double eps_lb, double p_cl);

struct EvalReport {
    std::string predictor;
    std::size_t n_sample = 0;
    double bias = 0.0;
    double ase = 0.0;
    std::string baseline = "les";
    double baseline_ase = 0.0;
    double mse_reduction_vs_baseline = 0.0;
    std::optional<double> bound_violation_ub;
    std::optional<double> bound_violation_lb;
    std::optional<double> ci_coverage;
};

void to_json(nlohmann::json& j, const EvalReport& r);

/// Point-prediction metrics against the LES baseline on the same samples.
EvalReport make_report(const std::string& predictor, std::span<const double> preds, const Dataset& test);

/// Scatter CSV (label,prediction); at most `cap` rows, evenly subsampled.
void export_scatter(std::span<const double> preds, std::span<const double> labels, const std::string& path,
                    std::size_t cap = 5000);

struct ScatterData {
    std::vector<double> labels;
    std::vector<double> preds;
};

ScatterData read_scatter(const std::string& path);

/// Per-customer distributional prediction for sample-path export.
struct Band {
    double lb = 0.0;
    double ub = 0.0;
    double ci_half_width = 0.0;
};

struct SamplePathRow {
    double arrival_time = 0.0;
    double label = 0.0;
    double mmse = 0.0;
    double lb = 0.0;
    double ub = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double lb_raw = 0.0;
};

/// Sample-path CSV: arrival_time,label,mmse,lb,ub,ci_lo,ci_hi,lb_raw. The `lb`
/// column is clamped at zero for display; `lb_raw` keeps the mixture quantile.
void export_sample_path(std::span<const Sample> samples, std::span<const double> preds, std::span<const Band> bands,
                        const std::string& path);

std::vector<SamplePathRow> read_sample_path(const std::string& path);

}  // namespace qdelay
