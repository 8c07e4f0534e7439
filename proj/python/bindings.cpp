#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qdelay/config.hpp"
#include "qdelay/error.hpp"
#include "qdelay/pipeline.hpp"
#include "qdelay/simulator.hpp"

namespace py = pybind11;
using namespace qdelay;
using nlohmann::json;

namespace {

RunConfig config_from(const std::string& text) {
    if (text.empty()) return RunConfig{};
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

template <class F>
py::array_t<double> column(const std::vector<CustomerRecord>& rs, F get) {
    py::array_t<double> a(static_cast<py::ssize_t>(rs.size()));
    auto v = a.mutable_unchecked<1>();
    for (std::size_t i = 0; i < rs.size(); ++i) v(i) = get(rs[i]);
    return a;
}

py::dict simulate_arrays(const std::string& config) {
    const SimOutput out = run(make_sim_config(config_from(config)));
    const auto& r = out.records;
    py::dict d;
    d["arrival_time"] = column(r, [](const auto& c) { return c.arrival_time; });
    d["service_start"] = column(r, [](const auto& c) { return c.service_start; });
    d["service_duration"] = column(r, [](const auto& c) { return c.service_duration; });
    d["wait"] = column(r, [](const auto& c) { return c.wait; });
    d["les"] = column(r, [](const auto& c) { return c.les; });
    d["hol"] = column(r, [](const auto& c) { return c.hol; });
    py::array_t<bool> warm(static_cast<py::ssize_t>(r.size()));
    auto w = warm.mutable_unchecked<1>();
    for (std::size_t i = 0; i < r.size(); ++i) w(i) = r[i].warmup;
    d["warmup"] = warm;
    d["completions"] = out.completions;
    return d;
}

py::tuple read_dataset(const fs::path& path) {
    const Dataset d = read_csv(path.string());
    const auto n = static_cast<py::ssize_t>(d.size()), h = static_cast<py::ssize_t>(d.h());
    py::array_t<double> t(n), x({n, h}), y(n);
    auto tv = t.mutable_unchecked<1>();
    auto xv = x.mutable_unchecked<2>();
    auto yv = y.mutable_unchecked<1>();
    for (py::ssize_t i = 0; i < n; ++i) {
        const Sample& s = d[i];
        tv(i) = s.arrival_time;
        yv(i) = s.label;
        for (py::ssize_t k = 0; k < h; ++k) xv(i, k) = s.features[k];
    }
    return py::make_tuple(t, x, y);
}

// stl.h would otherwise convert the variant itself.
struct LoadedModel {
    Model model;
};

std::vector<double> as_features(const Model& m, const std::vector<double>& f) {
    if (f.size() != model_h(m)) {
        throw std::invalid_argument("expected " + std::to_string(model_h(m)) + " features, got " + std::to_string(f.size()));
    }
    return f;
}

}  // namespace

PYBIND11_MODULE(_qdelay, m) {
    m.doc() = "Queueing-delay simulation, baselines and learned predictors";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("resolve_config", [](const std::string& c) { return to_json(config_from(c)).dump(); }, py::arg("config") = "");
    m.def("derived_values", [](const std::string& c) { return derived_values(config_from(c)).dump(); },
          py::arg("config") = "");

    m.def("simulate_arrays", &simulate_arrays, py::arg("config") = "");
    m.def("erlang_c",
          [](int servers, double lambda, double mu) {
              const ErlangC e = erlang_c_oracle(servers, lambda, mu);
              return py::dict(py::arg("p_wait") = e.p_wait, py::arg("mean_wait") = e.mean_wait,
                              py::arg("mean_wait_given_delayed") = e.mean_wait_given_delayed);
          },
          py::arg("servers"), py::arg("arrival_rate"), py::arg("service_rate"));
    m.def("read_dataset", &read_dataset, py::arg("path"));

    py::class_<GaussianMixture>(m, "GaussianMixture")
        .def(py::init<std::vector<double>, std::vector<double>, std::vector<double>>(), py::arg("weights"),
             py::arg("means"), py::arg("stds"))
        .def_property_readonly("weights", &GaussianMixture::weights)
        .def_property_readonly("means", &GaussianMixture::means)
        .def_property_readonly("stds", &GaussianMixture::stds)
        .def("pdf", &GaussianMixture::pdf)
        .def("log_pdf", &GaussianMixture::log_pdf)
        .def("cdf", &GaussianMixture::cdf)
        .def("quantile", &GaussianMixture::quantile)
        .def("mean", &GaussianMixture::mean)
        .def("variance", &GaussianMixture::variance)
        .def("bounds",
             [](const GaussianMixture& g, double eps_ub, double eps_lb) {
                 const Bounds b = bounds(g, eps_ub, eps_lb);
                 return py::make_tuple(b.lower, b.upper);
             },
             py::arg("eps_ub") = 0.05, py::arg("eps_lb") = 0.05)
        .def("confidence_interval", [](const GaussianMixture& g, double p) { return confidence_interval(g, p); },
             py::arg("p_cl") = 0.95)
        .def("is_multimodal", [](const GaussianMixture& g) { return is_multimodal(g); })
        .def("__len__", &GaussianMixture::size);

    py::class_<HolPredictor>(m, "HolPredictor")
        .def(py::init([](const std::string& c) { return make_hol_predictor(config_from(c)); }), py::arg("config") = "")
        .def("conditional_mean", &HolPredictor::conditional_mean, py::arg("t"), py::arg("w_hol"))
        .def("conditional_variance", &HolPredictor::conditional_variance, py::arg("t"), py::arg("w_hol"))
        .def("normal_approx", &HolPredictor::normal_approx, py::arg("t"), py::arg("w_hol"));

    py::class_<LoadedModel>(m, "Model")
        .def(py::init([](const fs::path& p) { return LoadedModel{load_model(p)}; }), py::arg("path"))
        .def_property_readonly("h", [](const LoadedModel& l) { return model_h(l.model); })
        .def_property_readonly(
            "type", [](const LoadedModel& l) { return std::holds_alternative<MdnModel>(l.model) ? "mdn" : "mse"; })
        .def("predict",
             [](const LoadedModel& l, const std::vector<double>& f) {
                 return predict_point(l.model, as_features(l.model, f));
             },
             py::arg("features"))
        .def("distribution",
             [](const LoadedModel& l, const std::vector<double>& f) {
                 if (!std::holds_alternative<MdnModel>(l.model)) {
                     throw std::invalid_argument("model is not distributional");
                 }
                 return predict_distribution(std::get<MdnModel>(l.model), as_features(l.model, f));
             },
             py::arg("features"));

    m.def("cmd_simulate", [](const std::string& c, const fs::path& out) { return cmd_simulate(config_from(c), out); },
          py::arg("config"), py::arg("out_dir"));
    m.def("cmd_make_dataset",
          [](const fs::path& customers, const std::string& c, const fs::path& out) {
              cmd_make_dataset(customers, config_from(c), out);
          },
          py::arg("customers"), py::arg("config"), py::arg("out_dir"));
    m.def("cmd_train",
          [](const fs::path& train, const std::string& c, const fs::path& out) {
              const TrainOutcome t = cmd_train(train, config_from(c), out);
              py::list epochs;
              for (const auto& e : t.history.epochs) epochs.append(py::make_tuple(e.epoch, e.train_loss, e.val_loss));
              return py::dict(py::arg("best_epoch") = t.history.best_epoch,
                              py::arg("best_val_loss") = t.history.best_val_loss, py::arg("epochs") = epochs);
          },
          py::arg("train"), py::arg("config"), py::arg("out_dir"));
    m.def("cmd_evaluate",
          [](const std::optional<fs::path>& model, const std::optional<std::string>& baseline, const fs::path& test,
             const std::string& c, const fs::path& out, const std::optional<fs::path>& customers) {
              if (model.has_value() == baseline.has_value()) {
                  throw std::invalid_argument("give exactly one of model and baseline");
              }
              EvalTarget target;
              if (model) {
                  target.predictor = *model;
              } else {
                  target.predictor = baseline_from_string(*baseline);
              }
              target.customers_csv = customers;
              return cmd_evaluate(target, test, config_from(c), out).dump();
          },
          py::arg("model"), py::arg("baseline"), py::arg("test"), py::arg("config"), py::arg("out_dir"),
          py::arg("customers"));
    m.def("cmd_reproduce",
          [](const std::string& figure, const std::string& c, const fs::path& workdir) {
              return cmd_reproduce(figure, config_from(c), workdir).dump();
          },
          py::arg("figure"), py::arg("config"), py::arg("workdir"));
    m.def("figure_ids", &figure_ids);
}
