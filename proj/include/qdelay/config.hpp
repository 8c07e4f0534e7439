#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qdelay/analytic.hpp"
#include "qdelay/mdn.hpp"
#include "qdelay/neuralnet.hpp"
#include "qdelay/simulator.hpp"

namespace qdelay {

/// Resolved run configuration. The defaults describe the reference system:
/// 20 servers, traffic intensity 0.95, unit mean service, sinusoidal arrivals
/// with amplitude 0.5 and a 144-unit cycle, lognormal service with cv 1.
struct RunConfig {
    std::uint64_t seed = 1;

    struct Sim {
        int servers = 20;
        double rho = 0.95;
        std::optional<double> lambda_bar;  // overrides rho when set
        double mean_service = 1.0;
        std::string arrival = "sinusoidal";  // sinusoidal | onoff | poisson
        double alpha = 0.5;
        double period = 144.0;
        double cycle = 24.0;
        double duty = 0.75;
        std::string on_pattern = "deterministic";  // deterministic | poisson
        std::string service = "lognormal";          // lognormal | h2 | exponential
        double cv = 1.0;
        std::size_t customers = 0;  // 0: derived from the dataset size
        std::size_t warmup = 10000;
    } sim;

    struct Data {
        std::size_t h = 1;
        std::size_t n_train = 27000;
        std::size_t n_test = 5000;
        bool standardize = true;
    } dataset;

    struct Model {
        std::string type = "mse";  // mse | mdn
        std::vector<std::size_t> hidden{32, 32};
        std::string activation = "tanh";
        std::size_t K = 3;
        double sigma_floor = 1e-3;
        double learning_rate = 1e-3;
        std::size_t batch_size = 128;
        std::size_t max_epochs = 200;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        std::size_t patience = 10;
        double validation_fraction = 0.1;
        double clip_norm = 10.0;  // applied to MDN training only
    } model;

    struct Eval {
        double eps_ub = 0.05;
        double eps_lb = 0.05;
        double p_cl = 0.95;
    } eval;
};

/// Parses and validates a configuration document. Missing keys take their
/// defaults; unknown keys and invalid values raise ConfigError naming the key.
/// A report document (carrying a "config" object) is accepted as well.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Throws ConfigError naming the offending key.
void validate(const RunConfig& cfg);

/// Fully resolved configuration as JSON.
nlohmann::json to_json(const RunConfig& cfg);

/// Service rate mu = 1 / mean_service.
double service_rate(const RunConfig& cfg);
/// Average arrival rate: lambda_bar if set, else rho * c * mu.
double mean_arrival_rate(const RunConfig& cfg);

ArrivalProcess make_arrival(const RunConfig& cfg);
ServiceDistribution make_service(const RunConfig& cfg);
/// Customer count actually simulated.
std::size_t resolved_customers(const RunConfig& cfg);
SimConfig make_sim_config(const RunConfig& cfg);
TrainConfig make_train_config(const RunConfig& cfg);
MdnArchitecture make_mdn_architecture(const RunConfig& cfg);
HolPredictor make_hol_predictor(const RunConfig& cfg);

}  // namespace qdelay
