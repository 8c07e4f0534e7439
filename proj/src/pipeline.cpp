#include "qdelay/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "csv.hpp"
#include "qdelay/analytic.hpp"
#include "qdelay/error.hpp"
#include "qdelay/eval.hpp"
#include "qdelay/simulator.hpp"

namespace qdelay {
namespace {

using nlohmann::json;

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void require_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw IoError("no such file '" + path.string() + "'");
}

std::string predictor_name(const Model& model) {
    if (std::holds_alternative<MseModel>(model)) return "mse_h" + std::to_string(model_h(model));
    return "mdn_h" + std::to_string(model_h(model));
}

// Samples read back from a dataset CSV do not carry hol; recover it from the
// customer trace by arrival time, which round-trips exactly through CSV.
Dataset attach_hol(const Dataset& test, const fs::path& customers_csv, std::size_t warmup) {
    require_file(customers_csv);
    const SimOutput sim = read_customer_csv(customers_csv.string(), warmup);
    const auto& recs = sim.records;
    std::vector<Sample> out = test.samples();
    for (auto& s : out) {
        auto it = std::lower_bound(recs.begin(), recs.end(), s.arrival_time,
                                   [](const CustomerRecord& r, double t) { return r.arrival_time < t; });
        if (it == recs.end() || it->arrival_time != s.arrival_time) {
            throw FormatError(customers_csv.string() + ": no customer arrives at " + csv::format_number(s.arrival_time) +
                              "; test set was built from a different trace");
        }
        s.hol = it->hol;
    }
    return Dataset(test.h(), std::move(out));
}

std::vector<Band> make_bands(std::span<const GaussianMixture> mixtures, const RunConfig& cfg) {
    std::vector<Band> bands;
    bands.reserve(mixtures.size());
    for (const auto& m : mixtures) {
        const Bounds b = bounds(m, cfg.eval.eps_ub, cfg.eval.eps_lb);
        bands.push_back({b.lower, b.upper, confidence_interval(m, cfg.eval.p_cl)});
    }
    return bands;
}

json summary_entry(const std::string& name, const std::string& dir, const json& doc) {
    json e = doc.at("report");
    e["name"] = name;
    e["dir"] = dir;
    return e;
}

}  // namespace

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": invalid JSON: " + e.what());
    }
}

json derived_values(const RunConfig& cfg) {
    const double mu = service_rate(cfg);
    const double lambda = mean_arrival_rate(cfg);
    json d = {{"lambda_bar", lambda},
              {"mu", mu},
              {"offered_load", lambda / (cfg.sim.servers * mu)},
              {"customers", resolved_customers(cfg)}};
    json arrival, service;
    to_json(arrival, make_arrival(cfg));
    to_json(service, make_service(cfg));
    d["arrival"] = arrival;
    d["service"] = service;
    return d;
}

fs::path cmd_simulate(const RunConfig& cfg, const fs::path& out_dir) {
    ensure_dir(out_dir);
    const SimOutput out = run(make_sim_config(cfg));
    const fs::path path = out_dir / "customers.csv";
    write_customer_csv(out, path.string());
    return path;
}

void cmd_make_dataset(const fs::path& customers_csv, const RunConfig& cfg, const fs::path& out_dir) {
    require_file(customers_csv);
    const SimOutput sim = read_customer_csv(customers_csv.string(), cfg.sim.warmup);
    const Dataset d = extract(sim, cfg.dataset.h);
    const std::size_t need = cfg.dataset.n_train + cfg.dataset.n_test;
    if (d.size() < need) {
        throw ConfigError("sim.customers: trace yields " + std::to_string(d.size()) + " samples with h=" +
                          std::to_string(cfg.dataset.h) + ", need " + std::to_string(need));
    }
    auto [train, test] = split_chronological(d, cfg.dataset.n_train, cfg.dataset.n_test);
    ensure_dir(out_dir);
    write_csv(train, (out_dir / "train.csv").string());
    write_csv(test, (out_dir / "test.csv").string());
}

Model load_model(const fs::path& path) {
    const json j = read_json(path);
    try {
        if (j.contains("head") && j.at("head").is_object()) return mdn_model_from_json(j);
        return mse_model_from_json(j);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": malformed model: " + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(path.string() + ": malformed model: " + e.what());
    }
}

void save_model(const Model& model, const fs::path& path) {
    json j;
    std::visit([&](const auto& m) { to_json(j, m); }, model);
    write_json(j, path);
}

std::size_t model_h(const Model& model) {
    return std::visit([](const auto& m) { return m.h; }, model);
}

double predict_point(const Model& model, std::span<const double> features) {
    if (const auto* m = std::get_if<MseModel>(&model)) return m->predict(features);
    return predict_mmse(std::get<MdnModel>(model), features);
}

TrainOutcome train_model(const Dataset& train, const RunConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("train_model: training set is empty");
    const std::size_t h = train.h();
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(cfg.model.validation_fraction * static_cast<double>(train.size())));
    auto [fit_set, val] = split_chronological(train, train.size() - n_val, n_val);
    if (fit_set.empty()) throw ConfigError("model.validation_fraction: leaves no samples to fit");

    const Standardizer st = cfg.dataset.standardize ? fit_standardizer(fit_set) : Standardizer::identity(h);
    const Dataset fit_std = apply(st, fit_set);
    const Dataset val_std = apply(st, val);
    const TrainConfig tc = make_train_config(cfg);
    RandomStream init(cfg.seed, StreamId::weight_init);

    if (cfg.model.type == "mse") {
        std::vector<std::size_t> widths{h};
        widths.insert(widths.end(), cfg.model.hidden.begin(), cfg.model.hidden.end());
        widths.push_back(1);
        Network net = init_network(widths, activation_from_string(cfg.model.activation), Activation::identity, init);
        // Start the output at the mean label so early epochs fit shape, not level.
        const auto labels = fit_set.labels();
        double mean = 0.0;
        for (double y : labels) mean += y;
        net.layers().back().bias[0] = mean / static_cast<double>(labels.size());
        TrainResult r = train_mse(std::move(net), fit_std, val_std, tc);
        return {MseModel{h, st, std::move(r.net)}, std::move(r.history)};
    }

    MdnModel model = make_mdn(h, make_mdn_architecture(cfg), init);
    model.standardizer = st;
    init_head_bias(model, fit_set.labels());
    MdnTrainResult r = train_mdn(std::move(model), fit_std, val_std, tc);
    return {std::move(r.model), std::move(r.history)};
}

TrainOutcome cmd_train(const fs::path& train_csv, const RunConfig& cfg, const fs::path& out_dir) {
    require_file(train_csv);
    const Dataset train = read_csv(train_csv.string(), cfg.dataset.h);
    TrainOutcome outcome = train_model(train, cfg);
    ensure_dir(out_dir);
    save_model(outcome.model, out_dir / "model.json");
    csv::Writer w((out_dir / "loss_history.csv").string());
    w.line("epoch,train_loss,val_loss");
    for (const auto& e : outcome.history.epochs) w.row(e.epoch, e.train_loss, e.val_loss);
    w.close();
    return outcome;
}

Baseline baseline_from_string(const std::string& name) {
    if (name == "les") return Baseline::les;
    if (name == "hol") return Baseline::hol;
    if (name == "refined-hol") return Baseline::refined_hol;
    throw ConfigError("baseline: unknown predictor '" + name + "' (expected les, hol or refined-hol)");
}

std::string to_string(Baseline b) {
    switch (b) {
        case Baseline::les: return "les";
        case Baseline::hol: return "hol";
        case Baseline::refined_hol: return "refined-hol";
    }
    return "les";
}

json cmd_evaluate(const EvalTarget& target, const fs::path& test_csv, const RunConfig& cfg, const fs::path& out_dir) {
    require_file(test_csv);
    Dataset test = read_csv(test_csv.string());
    if (test.empty()) throw FormatError(test_csv.string() + ": test set is empty");

    std::string name;
    std::vector<double> preds;
    std::vector<GaussianMixture> mixtures;
    json model_info = nullptr;

    if (const auto* model_path = std::get_if<fs::path>(&target.predictor)) {
        require_file(*model_path);
        const Model model = load_model(*model_path);
        if (model_h(model) != test.h()) {
            throw FormatError(test_csv.string() + ": test set has h=" + std::to_string(test.h()) + " but model expects h=" +
                              std::to_string(model_h(model)));
        }
        name = predictor_name(model);
        model_info = {{"type", std::holds_alternative<MseModel>(model) ? "mse" : "mdn"}, {"h", model_h(model)}};
        if (const auto* mdn = std::get_if<MdnModel>(&model)) {
            for (const auto& s : test.samples()) {
                mixtures.push_back(predict_distribution(*mdn, s.features));
                preds.push_back(mixtures.back().mean());
            }
        } else {
            for (const auto& s : test.samples()) preds.push_back(predict_point(model, s.features));
        }
    } else {
        const Baseline b = std::get<Baseline>(target.predictor);
        name = to_string(b);
        if (b == Baseline::les) {
            for (const auto& s : test.samples()) preds.push_back(les_predict(s));
        } else {
            if (!target.customers_csv) throw ConfigError("customers: the " + name + " baseline needs the customer CSV");
            test = attach_hol(test, *target.customers_csv, cfg.sim.warmup);
            if (b == Baseline::hol) {
                for (const auto& s : test.samples()) preds.push_back(hol_predict(s));
            } else {
                const HolPredictor hp = make_hol_predictor(cfg);
                const bool distributional = is_poisson_family(hp.arrival);
                for (const auto& s : test.samples()) {
                    if (distributional) {
                        mixtures.push_back(hp.normal_approx(s.arrival_time, s.hol));
                        preds.push_back(mixtures.back().mean());
                    } else {
                        preds.push_back(hp.conditional_mean(s.arrival_time, s.hol));
                    }
                }
            }
        }
    }

    EvalReport report = make_report(name, preds, test);
    const auto labels = test.labels();
    if (!mixtures.empty()) {
        const Calibration c = calibration(mixtures, labels, cfg.eval.eps_ub, cfg.eval.eps_lb, cfg.eval.p_cl);
        report.bound_violation_ub = c.violation_ub;
        report.bound_violation_lb = c.violation_lb;
        report.ci_coverage = c.coverage;
    }

    ensure_dir(out_dir);
    export_scatter(preds, labels, (out_dir / "scatter.csv").string());
    if (!mixtures.empty()) {
        const auto bands = make_bands(mixtures, cfg);
        export_sample_path(test.samples(), preds, bands, (out_dir / "sample_path.csv").string());
    }

    json rep;
    to_json(rep, report);
    json doc = {{"config", to_json(cfg)}, {"derived", derived_values(cfg)}, {"model", model_info}, {"report", rep}};
    write_json(doc, out_dir / "report.json");
    return doc;
}

void export_pdf(const MdnModel& model, const std::vector<double>& les_values, const fs::path& path) {
    if (model.h != 1) throw std::invalid_argument("export_pdf: model must have h=1");
    std::vector<GaussianMixture> mix;
    double hi = 0.0;
    for (double w1 : les_values) {
        mix.push_back(predict_distribution(model, std::span<const double>(&w1, 1)));
        hi = std::max(hi, mix.back().quantile(0.9995));
    }
    hi = std::max(hi, 1.0);
    constexpr int kPoints = 501;
    csv::Writer w(path.string());
    w.line("les,w,pdf");
    for (std::size_t k = 0; k < les_values.size(); ++k) {
        for (int i = 0; i < kPoints; ++i) {
            const double x = hi * i / (kPoints - 1);
            w.row(les_values[k], x, mix[k].pdf(x));
        }
    }
    w.close();
}

bool is_multimodal(const GaussianMixture& m, double min_weight, double sep) {
    const auto& wt = m.weights();
    const auto& mu = m.means();
    const auto& sd = m.stds();
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            if (wt[i] >= min_weight && wt[j] >= min_weight && std::abs(mu[i] - mu[j]) > sep * std::min(sd[i], sd[j])) {
                return true;
            }
        }
    }
    return false;
}

const std::vector<std::string>& figure_ids() {
    static const std::vector<std::string> ids{"fig2", "fig3", "fig4", "fig5", "fig6"};
    return ids;
}

namespace {

struct Preset {
    std::string arrival;
    std::string model;
    std::vector<std::size_t> hs;
    std::vector<Baseline> baselines;
};

Preset preset_for(const std::string& figure) {
    if (figure == "fig2") return {"onoff", "mse", {1, 25, 50}, {Baseline::les}};
    if (figure == "fig3") return {"sinusoidal", "mse", {1, 25, 50}, {Baseline::les, Baseline::hol, Baseline::refined_hol}};
    if (figure == "fig4") return {"sinusoidal", "mdn", {1}, {}};
    if (figure == "fig5" || figure == "fig6") return {"sinusoidal", "mdn", {50}, {}};
    throw ConfigError("figure: unknown id '" + figure + "' (expected fig2, fig3, fig4, fig5 or fig6)");
}

// Fixes sim.customers so every requested h yields enough samples. An explicit
// count is kept as is; the automatic one doubles until it suffices.
void settle_customers(RunConfig& cfg, std::size_t h_max) {
    const bool automatic = cfg.sim.customers == 0;
    RunConfig probe = cfg;
    probe.dataset.h = h_max;
    cfg.sim.customers = resolved_customers(probe);
    if (!automatic) return;
    const std::size_t need = cfg.dataset.n_train + cfg.dataset.n_test;
    for (int attempt = 0; attempt < 8; ++attempt) {
        const Dataset d = extract(run(make_sim_config(cfg)), h_max);
        if (d.size() >= need) return;
        cfg.sim.customers *= 2;
    }
    throw ConfigError("sim.customers: could not find a trace long enough for " + std::to_string(need) + " samples");
}

}  // namespace

json cmd_reproduce(const std::string& figure, const RunConfig& base, const fs::path& workdir) {
    const Preset p = preset_for(figure);
    RunConfig cfg = base;
    cfg.sim.arrival = p.arrival;
    cfg.model.type = p.model;
    validate(cfg);
    settle_customers(cfg, *std::max_element(p.hs.begin(), p.hs.end()));

    const fs::path dir = workdir / figure;
    ensure_dir(dir);
    write_json(to_json(cfg), dir / "config.json");
    const fs::path customers = cmd_simulate(cfg, dir);

    json runs = json::array();
    json extra = json::object();
    for (std::size_t h : p.hs) {
        RunConfig hcfg = cfg;
        hcfg.dataset.h = h;
        const std::string sub = "h" + std::to_string(h);
        const fs::path hdir = dir / sub;
        ensure_dir(hdir);
        write_json(to_json(hcfg), hdir / "config.json");
        cmd_make_dataset(customers, hcfg, hdir);
        const TrainOutcome trained = cmd_train(hdir / "train.csv", hcfg, hdir);
        const json doc = cmd_evaluate({hdir / "model.json", std::nullopt}, hdir / "test.csv", hcfg, hdir);
        json entry = summary_entry(doc.at("report").at("predictor").get<std::string>(), sub, doc);
        entry["epochs"] = trained.history.epochs.size();
        entry["best_epoch"] = trained.history.best_epoch;
        runs.push_back(entry);

        if (figure == "fig4") {
            const auto& mdn = std::get<MdnModel>(trained.model);
            const std::vector<double> les_values{5.0, 10.0, 15.0};
            export_pdf(mdn, les_values, dir / "pdf.csv");
            json mixtures = json::array();
            for (double w1 : les_values) {
                json m;
                to_json(m, predict_distribution(mdn, std::span<const double>(&w1, 1)));
                mixtures.push_back({{"les", w1}, {"mixture", m}});
            }
            write_json(mixtures, dir / "mixtures.json");
            const Dataset test = read_csv((hdir / "test.csv").string(), 1);
            std::size_t multimodal = 0;
            for (const auto& s : test.samples()) multimodal += is_multimodal(predict_distribution(mdn, s.features));
            extra["multimodal_test_inputs"] = multimodal;
        }
    }

    // Baselines are scored on the smallest-h test set.
    const std::string base_sub = "h" + std::to_string(p.hs.front());
    RunConfig bcfg = cfg;
    bcfg.dataset.h = p.hs.front();
    for (Baseline b : p.baselines) {
        const std::string sub = to_string(b);
        const json doc = cmd_evaluate({b, customers}, dir / base_sub / "test.csv", bcfg, dir / sub);
        runs.push_back(summary_entry(sub, sub, doc));
    }

    json summary = {{"figure", figure}, {"config", to_json(cfg)}, {"derived", derived_values(cfg)}, {"runs", runs}};
    for (auto& [k, v] : extra.items()) summary[k] = v;
    write_json(summary, dir / "summary.json");
    return summary;
}

}  // namespace qdelay
