#include "qdelay/config.hpp"

#include <fstream>
#include <set>

#include "qdelay/error.hpp"

namespace qdelay {
namespace {

using nlohmann::json;

// Integers built in code are signed in nlohmann, parsed ones unsigned.
bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

class Section {
public:
    Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) throw ConfigError(name("") + ": expected an object");
    }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
                if (!is_count(v)) {
                    throw ConfigError(name(key) + ": expected a non-negative integer");
                }
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(name(key) + ": expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(name(key) + ": expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(name(key) + ": expected a string");
            }
            out = v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(name(key) + ": has the wrong type");
        }
    }

    void read_optional(const char* key, std::optional<double>& out) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        if (!j_.at(key).is_number()) throw ConfigError(name(key) + ": expected a number or null");
        out = j_.at(key).get<double>();
    }

    void read_widths(const char* key, std::vector<std::size_t>& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(name(key) + ": expected an array of layer widths");
        out.clear();
        for (const auto& w : v) {
            if (!is_count(w) || w.get<std::size_t>() == 0) throw ConfigError(name(key) + ": widths must be positive integers");
            out.push_back(w.get<std::size_t>());
        }
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError(name(key) + ": unknown key");
        }
    }

private:
    std::string name(const std::string& key) const {
        if (prefix_.empty()) return key.empty() ? "config" : key;
        return key.empty() ? prefix_ : prefix_ + "." + key;
    }

    const json& j_;
    std::string prefix_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& message) {
    if (!ok) throw ConfigError(key + ": " + message);
}

}  // namespace

RunConfig parse_config(const nlohmann::json& doc) {
    const json& j = (doc.is_object() && doc.contains("config") && doc.at("config").is_object()) ? doc.at("config") : doc;
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    RunConfig cfg;
    if (j.contains("seed")) {
        if (!is_count(j.at("seed"))) throw ConfigError("seed: expected a non-negative integer");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    json empty = json::object();
    auto section = [&](const char* key) -> const json& {
        return j.contains(key) ? j.at(key) : empty;
    };

    Section sim(section("sim"), "sim");
    sim.read("servers", cfg.sim.servers);
    sim.read("rho", cfg.sim.rho);
    sim.read_optional("lambda_bar", cfg.sim.lambda_bar);
    sim.read("mean_service", cfg.sim.mean_service);
    sim.read("arrival", cfg.sim.arrival);
    sim.read("alpha", cfg.sim.alpha);
    sim.read("period", cfg.sim.period);
    sim.read("cycle", cfg.sim.cycle);
    sim.read("duty", cfg.sim.duty);
    sim.read("on_pattern", cfg.sim.on_pattern);
    sim.read("service", cfg.sim.service);
    sim.read("cv", cfg.sim.cv);
    sim.read("customers", cfg.sim.customers);
    sim.read("warmup", cfg.sim.warmup);
    sim.finish();

    Section data(section("dataset"), "dataset");
    data.read("h", cfg.dataset.h);
    data.read("n_train", cfg.dataset.n_train);
    data.read("n_test", cfg.dataset.n_test);
    data.read("standardize", cfg.dataset.standardize);
    data.finish();

    Section model(section("model"), "model");
    model.read("type", cfg.model.type);
    model.read_widths("hidden", cfg.model.hidden);
    model.read("activation", cfg.model.activation);
    model.read("K", cfg.model.K);
    model.read("sigma_floor", cfg.model.sigma_floor);
    model.read("learning_rate", cfg.model.learning_rate);
    model.read("batch_size", cfg.model.batch_size);
    model.read("max_epochs", cfg.model.max_epochs);
    model.read("beta1", cfg.model.beta1);
    model.read("beta2", cfg.model.beta2);
    model.read("epsilon", cfg.model.epsilon);
    model.read("patience", cfg.model.patience);
    model.read("validation_fraction", cfg.model.validation_fraction);
    model.read("clip_norm", cfg.model.clip_norm);
    model.finish();

    Section ev(section("eval"), "eval");
    ev.read("eps_ub", cfg.eval.eps_ub);
    ev.read("eps_lb", cfg.eval.eps_lb);
    ev.read("p_cl", cfg.eval.p_cl);
    ev.finish();

    for (const auto& [key, _] : j.items()) {
        if (key != "seed" && key != "sim" && key != "dataset" && key != "model" && key != "eval") {
            throw ConfigError(key + ": unknown key");
        }
    }
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return parse_config(j);
}

void validate(const RunConfig& cfg) {
    const auto& s = cfg.sim;
    require(s.servers >= 1, "sim.servers", "must be >= 1");
    require(s.mean_service > 0.0, "sim.mean_service", "must be > 0");
    require(s.arrival == "sinusoidal" || s.arrival == "onoff" || s.arrival == "poisson", "sim.arrival",
            "must be one of sinusoidal, onoff, poisson");
    if (s.lambda_bar) {
        require(*s.lambda_bar > 0.0, "sim.lambda_bar", "must be > 0");
        require(*s.lambda_bar < s.servers / s.mean_service, "sim.lambda_bar", "implies traffic intensity >= 1");
    } else {
        require(s.rho > 0.0 && s.rho < 1.0, "sim.rho", "must lie in (0, 1)");
    }
    require(s.alpha >= 0.0 && s.alpha < 1.0, "sim.alpha", "must lie in [0, 1)");
    require(s.period > 0.0, "sim.period", "must be > 0");
    require(s.cycle > 0.0, "sim.cycle", "must be > 0");
    require(s.duty > 0.0 && s.duty <= 1.0, "sim.duty", "must lie in (0, 1]");
    require(s.on_pattern == "deterministic" || s.on_pattern == "poisson", "sim.on_pattern", "must be deterministic or poisson");
    require(s.service == "lognormal" || s.service == "h2" || s.service == "exponential", "sim.service",
            "must be one of lognormal, h2, exponential");
    require(s.cv > 0.0, "sim.cv", "must be > 0");
    if (s.service == "h2") require(s.cv > 1.0, "sim.cv", "h2 service requires cv > 1");

    const auto& d = cfg.dataset;
    require(d.h >= 1, "dataset.h", "must be >= 1");
    require(d.n_train >= 1, "dataset.n_train", "must be >= 1");
    require(d.n_test >= 1, "dataset.n_test", "must be >= 1");

    const auto& m = cfg.model;
    require(m.type == "mse" || m.type == "mdn", "model.type", "must be mse or mdn");
    require(m.activation == "tanh" || m.activation == "relu" || m.activation == "identity", "model.activation",
            "must be tanh, relu or identity");
    require(m.K >= 1, "model.K", "must be >= 1");
    require(m.sigma_floor > 0.0, "model.sigma_floor", "must be > 0");
    require(m.learning_rate > 0.0, "model.learning_rate", "must be > 0");
    require(m.batch_size >= 1, "model.batch_size", "must be >= 1");
    require(m.max_epochs >= 1, "model.max_epochs", "must be >= 1");
    require(m.beta1 >= 0.0 && m.beta1 < 1.0, "model.beta1", "must lie in [0, 1)");
    require(m.beta2 >= 0.0 && m.beta2 < 1.0, "model.beta2", "must lie in [0, 1)");
    require(m.epsilon > 0.0, "model.epsilon", "must be > 0");
    require(m.validation_fraction >= 0.0 && m.validation_fraction < 1.0, "model.validation_fraction", "must lie in [0, 1)");
    require(m.clip_norm >= 0.0, "model.clip_norm", "must be >= 0");

    const auto& e = cfg.eval;
    require(e.eps_ub > 0.0 && e.eps_ub < 1.0, "eval.eps_ub", "must lie in (0, 1)");
    require(e.eps_lb > 0.0 && e.eps_lb < 1.0, "eval.eps_lb", "must lie in (0, 1)");
    require(e.eps_ub + e.eps_lb < 1.0, "eval.eps_ub", "eps_ub + eps_lb must be < 1");
    require(e.p_cl > 0.0 && e.p_cl < 1.0, "eval.p_cl", "must lie in (0, 1)");
}

nlohmann::json to_json(const RunConfig& cfg) {
    const auto& s = cfg.sim;
    const auto& m = cfg.model;
    return {
        {"seed", cfg.seed},
        {"sim",
         {{"servers", s.servers},
          {"rho", s.rho},
          {"lambda_bar", s.lambda_bar ? json(*s.lambda_bar) : json(nullptr)},
          {"mean_service", s.mean_service},
          {"arrival", s.arrival},
          {"alpha", s.alpha},
          {"period", s.period},
          {"cycle", s.cycle},
          {"duty", s.duty},
          {"on_pattern", s.on_pattern},
          {"service", s.service},
          {"cv", s.cv},
          {"customers", s.customers},
          {"warmup", s.warmup}}},
        {"dataset",
         {{"h", cfg.dataset.h},
          {"n_train", cfg.dataset.n_train},
          {"n_test", cfg.dataset.n_test},
          {"standardize", cfg.dataset.standardize}}},
        {"model",
         {{"type", m.type},
          {"hidden", m.hidden},
          {"activation", m.activation},
          {"K", m.K},
          {"sigma_floor", m.sigma_floor},
          {"learning_rate", m.learning_rate},
          {"batch_size", m.batch_size},
          {"max_epochs", m.max_epochs},
          {"beta1", m.beta1},
          {"beta2", m.beta2},
          {"epsilon", m.epsilon},
          {"patience", m.patience},
          {"validation_fraction", m.validation_fraction},
          {"clip_norm", m.clip_norm}}},
        {"eval", {{"eps_ub", cfg.eval.eps_ub}, {"eps_lb", cfg.eval.eps_lb}, {"p_cl", cfg.eval.p_cl}}},
    };
}

double service_rate(const RunConfig& cfg) { return 1.0 / cfg.sim.mean_service; }

double mean_arrival_rate(const RunConfig& cfg) {
    return cfg.sim.lambda_bar ? *cfg.sim.lambda_bar : cfg.sim.rho * cfg.sim.servers * service_rate(cfg);
}

ArrivalProcess make_arrival(const RunConfig& cfg) {
    const double rate = mean_arrival_rate(cfg);
    const auto& s = cfg.sim;
    if (s.arrival == "sinusoidal") return SinusoidalNhpp{rate, s.alpha, s.period};
    if (s.arrival == "onoff") {
        return DeterministicOnOff{s.cycle, s.duty, rate / s.duty,
                                  s.on_pattern == "poisson" ? OnPattern::poisson : OnPattern::deterministic};
    }
    return HomogeneousPoisson{rate};
}

ServiceDistribution make_service(const RunConfig& cfg) {
    const auto& s = cfg.sim;
    if (s.service == "lognormal") return fit_lognormal(s.mean_service, s.cv);
    if (s.service == "h2") return fit_h2_balanced(s.mean_service, s.cv);
    return Exponential{1.0 / s.mean_service};
}

std::size_t resolved_customers(const RunConfig& cfg) {
    if (cfg.sim.customers > 0) return cfg.sim.customers;
    return cfg.sim.warmup + 2 * (cfg.dataset.n_train + cfg.dataset.n_test) + cfg.dataset.h;
}

SimConfig make_sim_config(const RunConfig& cfg) {
    SimConfig sc;
    sc.servers = cfg.sim.servers;
    sc.customers = resolved_customers(cfg);
    sc.warmup = cfg.sim.warmup;
    sc.arrival = make_arrival(cfg);
    sc.service = make_service(cfg);
    sc.seed = cfg.seed;
    return sc;
}

TrainConfig make_train_config(const RunConfig& cfg) {
    const auto& m = cfg.model;
    TrainConfig tc;
    tc.learning_rate = m.learning_rate;
    tc.batch_size = m.batch_size;
    tc.max_epochs = m.max_epochs;
    tc.beta1 = m.beta1;
    tc.beta2 = m.beta2;
    tc.epsilon = m.epsilon;
    tc.patience = m.patience;
    tc.validation_fraction = m.validation_fraction;
    tc.clip_norm = m.type == "mdn" ? m.clip_norm : 0.0;
    tc.seed = cfg.seed;
    return tc;
}

MdnArchitecture make_mdn_architecture(const RunConfig& cfg) {
    MdnArchitecture a;
    a.hidden = cfg.model.hidden;
    a.activation = activation_from_string(cfg.model.activation);
    a.K = cfg.model.K;
    a.sigma_floor = cfg.model.sigma_floor;
    return a;
}

HolPredictor make_hol_predictor(const RunConfig& cfg) {
    return HolPredictor(make_arrival(cfg), service_rate(cfg), cfg.sim.servers);
}

}  // namespace qdelay
