#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "qdelay/config.hpp"
#include "qdelay/dataset.hpp"
#include "qdelay/mdn.hpp"
#include "qdelay/neuralnet.hpp"

namespace qdelay {

namespace fs = std::filesystem;

/// Values implied by the configuration, recorded next to it in reports.
nlohmann::json derived_values(const RunConfig& cfg);

/// Simulates and writes <out>/customers.csv. Returns that path.
fs::path cmd_simulate(const RunConfig& cfg, const fs::path& out_dir);

/// Extracts h-histories from a customer CSV and writes <out>/train.csv and
/// <out>/test.csv. Throws ConfigError when the trace is too short.
void cmd_make_dataset(const fs::path& customers_csv, const RunConfig& cfg, const fs::path& out_dir);

using Model = std::variant<MseModel, MdnModel>;

Model load_model(const fs::path& path);
void save_model(const Model& model, const fs::path& path);
std::size_t model_h(const Model& model);
double predict_point(const Model& model, std::span<const double> features);

struct TrainOutcome {
    Model model;
    TrainHistory history;
};

/// Fits the configured model on a raw training set. The last
/// validation_fraction of the set (chronologically) is held out.
TrainOutcome train_model(const Dataset& train, const RunConfig& cfg);

/// Trains and writes <out>/model.json and <out>/loss_history.csv.
TrainOutcome cmd_train(const fs::path& train_csv, const RunConfig& cfg, const fs::path& out_dir);

enum class Baseline { les, hol, refined_hol };
Baseline baseline_from_string(const std::string& name);
std::string to_string(Baseline b);

struct EvalTarget {
    std::variant<fs::path, Baseline> predictor;  // model file or baseline
    /// Customer CSV supplying hol at arrival; required by the HOL baselines.
    std::optional<fs::path> customers_csv;
};

/// Writes <out>/report.json and <out>/scatter.csv, plus <out>/sample_path.csv
/// for distributional predictors. Returns the report document.
nlohmann::json cmd_evaluate(const EvalTarget& target, const fs::path& test_csv, const RunConfig& cfg,
                            const fs::path& out_dir);

/// Density of the trained h=1 MDN at the given LES values, written as
/// CSV columns les,w,pdf.
void export_pdf(const MdnModel& model, const std::vector<double>& les_values, const fs::path& path);

/// True when the mixture has two components of weight >= min_weight whose
/// means differ by more than sep times the smaller of their stds.
bool is_multimodal(const GaussianMixture& m, double min_weight = 0.2, double sep = 2.0);

const std::vector<std::string>& figure_ids();

/// End-to-end pipeline for one figure under <workdir>/<figure>. Writes
/// summary.json there and returns it.
nlohmann::json cmd_reproduce(const std::string& figure, const RunConfig& base, const fs::path& workdir);

/// Writes a JSON document with two-space indentation and a trailing newline.
void write_json(const nlohmann::json& j, const fs::path& path);
nlohmann::json read_json(const fs::path& path);

}  // namespace qdelay
