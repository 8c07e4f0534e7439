// qdelay: simulate queues, build history datasets, train delay predictors,
// and evaluate them.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "qdelay/config.hpp"
#include "qdelay/error.hpp"
#include "qdelay/pipeline.hpp"

namespace fs = std::filesystem;
using namespace qdelay;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON configuration (a report.json is accepted too)");
    cmd->add_option("--seed", c.seed, "Override the configuration seed");
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
}

RunConfig resolve(const Common& c) {
    RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    validate(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Queueing delay prediction from waiting-time histories"};
    app.require_subcommand(1);

    Common sim_opts;
    auto* sim = app.add_subcommand("simulate", "Run the simulator and write customers.csv");
    add_common(sim, sim_opts);

    Common ds_opts;
    std::string ds_customers;
    std::optional<std::size_t> ds_h;
    auto* ds = app.add_subcommand("make-dataset", "Extract train.csv and test.csv from a customer trace");
    add_common(ds, ds_opts);
    ds->add_option("--customers", ds_customers, "Customer CSV from simulate")->required();
    ds->add_option("--history", ds_h, "History length (overrides dataset.h)");

    Common tr_opts;
    std::string tr_train;
    auto* tr = app.add_subcommand("train", "Train the configured model; writes model.json and loss_history.csv");
    add_common(tr, tr_opts);
    tr->add_option("--train", tr_train, "Training CSV from make-dataset")->required();

    Common ev_opts;
    std::string ev_model, ev_baseline, ev_test, ev_customers;
    auto* ev = app.add_subcommand("evaluate", "Score a model or baseline; writes report.json and figure CSVs");
    add_common(ev, ev_opts);
    auto* model_opt = ev->add_option("--model", ev_model, "Trained model JSON");
    auto* base_opt = ev->add_option("--baseline", ev_baseline, "Baseline predictor: les, hol or refined-hol");
    model_opt->excludes(base_opt);
    ev->add_option("--test", ev_test, "Test CSV from make-dataset")->required();
    ev->add_option("--customers", ev_customers, "Customer CSV (needed by hol and refined-hol)");

    Common rp_opts;
    std::string rp_figure;
    auto* rp = app.add_subcommand("reproduce", "Run a complete figure pipeline under <out>/<figure>");
    add_common(rp, rp_opts);
    rp->add_option("figure", rp_figure, "fig2, fig3, fig4, fig5 or fig6")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim) {
            const RunConfig cfg = resolve(sim_opts);
            std::cout << cmd_simulate(cfg, sim_opts.out).string() << '\n';
        } else if (*ds) {
            RunConfig cfg = resolve(ds_opts);
            if (ds_h) {
                cfg.dataset.h = *ds_h;
                validate(cfg);
            }
            cmd_make_dataset(ds_customers, cfg, ds_opts.out);
            std::cout << (fs::path(ds_opts.out) / "train.csv").string() << '\n'
                      << (fs::path(ds_opts.out) / "test.csv").string() << '\n';
        } else if (*tr) {
            RunConfig cfg = resolve(tr_opts);
            const TrainOutcome t = cmd_train(tr_train, cfg, tr_opts.out);
            std::printf("epochs %zu, best epoch %zu, best validation loss %.6g\n", t.history.epochs.size(),
                        t.history.best_epoch, t.history.best_val_loss);
        } else if (*ev) {
            if (ev_model.empty() == ev_baseline.empty()) throw ConfigError("evaluate: give exactly one of --model or --baseline");
            const RunConfig cfg = resolve(ev_opts);
            EvalTarget target;
            if (!ev_model.empty()) {
                target.predictor = fs::path(ev_model);
            } else {
                target.predictor = baseline_from_string(ev_baseline);
            }
            if (!ev_customers.empty()) target.customers_csv = fs::path(ev_customers);
            const auto doc = cmd_evaluate(target, ev_test, cfg, ev_opts.out);
            std::cout << doc.at("report").dump(2) << '\n';
        } else if (*rp) {
            const RunConfig cfg = resolve(rp_opts);
            const auto summary = cmd_reproduce(rp_figure, cfg, rp_opts.out);
            for (const auto& r : summary.at("runs")) {
                std::printf("%-12s ase %10.4f  mse_reduction_vs_les %7.4f\n", r.at("name").get<std::string>().c_str(),
                            r.at("ase").get<double>(), r.at("mse_reduction_vs_baseline").get<double>());
            }
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
