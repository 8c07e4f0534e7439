#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <sys/wait.h>

#include "qdelay/config.hpp"
#include "qdelay/error.hpp"
#include "qdelay/eval.hpp"
#include "qdelay/pipeline.hpp"

using namespace qdelay;
using nlohmann::json;

namespace {

fs::path workdir(const std::string& name) {
    const fs::path p = fs::path(QDELAY_TEST_TMP) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string config_error(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

RunConfig small_config(const std::string& type) {
    RunConfig cfg;
    cfg.sim.warmup = 1000;
    cfg.dataset.n_train = 3000;
    cfg.dataset.n_test = 500;
    cfg.dataset.h = 3;
    cfg.model.type = type;
    cfg.model.hidden = {8, 8};
    cfg.model.max_epochs = 4;
    return cfg;
}

// Every regular file under `a` exists under `b` with identical bytes.
bool same_tree(const fs::path& a, const fs::path& b) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), a);
        if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) return false;
        ++n;
    }
    return n > 0;
}

}  // namespace

TEST_CASE("defaults resolve to the reference system") {
    const RunConfig cfg = parse_config(json::object());
    CHECK(cfg.sim.servers == 20);
    CHECK(mean_arrival_rate(cfg) == doctest::Approx(19.0).epsilon(1e-15));
    CHECK(service_rate(cfg) == 1.0);
    const auto arrival = make_arrival(cfg);
    REQUIRE(std::holds_alternative<SinusoidalNhpp>(arrival));
    CHECK(std::get<SinusoidalNhpp>(arrival).period == 144.0);
    const auto service = make_service(cfg);
    CHECK(moments(service).cv == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(resolved_customers(cfg) == 10000 + 2 * 32000 + 1);

    RunConfig onoff = cfg;
    onoff.sim.arrival = "onoff";
    const auto a = std::get<DeterministicOnOff>(make_arrival(onoff));
    CHECK(a.on_rate == doctest::Approx(0.95 * 20 / 0.75).epsilon(1e-15));
    CHECK(a.cycle == 24.0);

    RunConfig direct = cfg;
    direct.sim.lambda_bar = 15.0;
    CHECK(mean_arrival_rate(direct) == 15.0);
}

TEST_CASE("config errors name the offending key") {
    CHECK(config_error({{"sim", {{"rhoo", 0.9}}}}).find("sim.rhoo") != std::string::npos);
    CHECK(config_error({{"simulation", json::object()}}).find("simulation") != std::string::npos);
    CHECK(config_error({{"sim", {{"rho", 1.0}}}}).find("sim.rho") != std::string::npos);
    CHECK(config_error({{"sim", {{"rho", "high"}}}}).find("sim.rho") != std::string::npos);
    CHECK(config_error({{"sim", {{"servers", -3}}}}).find("sim.servers") != std::string::npos);
    CHECK(config_error({{"sim", {{"lambda_bar", 25.0}}}}).find("sim.lambda_bar") != std::string::npos);
    CHECK(config_error({{"sim", {{"service", "h2"}, {"cv", 1.0}}}}).find("sim.cv") != std::string::npos);
    CHECK(config_error({{"sim", {{"arrival", "bursty"}}}}).find("sim.arrival") != std::string::npos);
    CHECK(config_error({{"dataset", {{"h", 0}}}}).find("dataset.h") != std::string::npos);
    CHECK(config_error({{"model", {{"type", "gbm"}}}}).find("model.type") != std::string::npos);
    CHECK(config_error({{"model", {{"hidden", {32, 0}}}}}).find("model.hidden") != std::string::npos);
    CHECK(config_error({{"eval", {{"eps_ub", 0.6}, {"eps_lb", 0.5}}}}).find("eval.eps_ub") != std::string::npos);
    CHECK(config_error({{"seed", -1}}).find("seed") != std::string::npos);
    CHECK(config_error(json::array()).find("config") != std::string::npos);
}

TEST_CASE("resolved config round-trips and reports are accepted as configs") {
    RunConfig cfg;
    cfg.seed = 42;
    cfg.sim.arrival = "onoff";
    cfg.sim.service = "h2";
    cfg.sim.cv = 2.0;
    cfg.model.type = "mdn";
    cfg.model.hidden = {16, 8, 4};
    cfg.dataset.h = 25;
    const json j = to_json(cfg);
    CHECK(j.at("sim").at("lambda_bar").is_null());
    CHECK(to_json(parse_config(j)) == j);
    const json report{{"config", j}, {"report", json::object()}};
    CHECK(to_json(parse_config(report)) == j);
}

TEST_CASE("load_config surfaces file problems") {
    const auto dir = workdir("config_files");
    CHECK_THROWS_AS(load_config((dir / "missing.json").string()), IoError);
    std::ofstream(dir / "broken.json") << "{\"sim\": ";
    CHECK_THROWS_AS(load_config((dir / "broken.json").string()), ConfigError);
}

TEST_CASE("pipeline stages produce the documented files") {
    const auto dir = workdir("pipeline_mse");
    const RunConfig cfg = small_config("mse");
    const auto customers = cmd_simulate(cfg, dir);
    CHECK(fs::exists(customers));
    cmd_make_dataset(customers, cfg, dir);
    const auto train = read_csv((dir / "train.csv").string(), 3);
    const auto test = read_csv((dir / "test.csv").string(), 3);
    CHECK(train.size() == 3000);
    CHECK(test.size() == 500);
    CHECK(train.samples().back().arrival_time < test.samples().front().arrival_time);

    const auto trained = cmd_train(dir / "train.csv", cfg, dir);
    CHECK(std::holds_alternative<MseModel>(trained.model));
    CHECK(slurp(dir / "loss_history.csv").rfind("epoch,train_loss,val_loss\n", 0) == 0);

    const auto doc = cmd_evaluate({dir / "model.json", std::nullopt}, dir / "test.csv", cfg, dir);
    CHECK(doc.at("report").at("predictor") == "mse_h3");
    CHECK(doc.at("report").at("n_sample") == 500);
    CHECK(doc.at("derived").at("lambda_bar") == 19.0);
    CHECK(doc.at("config") == to_json(cfg));
    CHECK(read_scatter((dir / "scatter.csv").string()).labels.size() == 500);
    CHECK_FALSE(fs::exists(dir / "sample_path.csv"));

    const auto les = cmd_evaluate({Baseline::les, std::nullopt}, dir / "test.csv", cfg, dir / "les");
    CHECK(les.at("report").at("mse_reduction_vs_baseline") == 0.0);
    const auto hol = cmd_evaluate({Baseline::hol, customers}, dir / "test.csv", cfg, dir / "hol");
    CHECK(hol.at("report").at("ase").get<double>() > 0.0);
    const auto refined = cmd_evaluate({Baseline::refined_hol, customers}, dir / "test.csv", cfg, dir / "refined");
    CHECK(refined.at("report").at("ci_coverage").is_number());
    CHECK(fs::exists(dir / "refined" / "sample_path.csv"));
    CHECK_THROWS_AS(cmd_evaluate({Baseline::hol, std::nullopt}, dir / "test.csv", cfg, dir / "x"), ConfigError);

    RunConfig wrong_h = cfg;
    wrong_h.dataset.h = 4;
    CHECK_THROWS_AS(cmd_train(dir / "train.csv", wrong_h, dir / "x"), FormatError);
    CHECK_THROWS_AS(cmd_train(dir / "nope.csv", cfg, dir / "x"), IoError);

    RunConfig greedy = cfg;
    greedy.dataset.n_train = 100000;
    try {
        cmd_make_dataset(customers, greedy, dir / "x");
        FAIL("expected a shortage error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("sim.customers") != std::string::npos);
    }
}

TEST_CASE("mdn pipeline writes a sample path and is reproducible from its report") {
    const auto a = workdir("pipeline_mdn_a");
    const auto b = workdir("pipeline_mdn_b");
    const RunConfig cfg = small_config("mdn");
    auto run_all = [](const RunConfig& c, const fs::path& dir) {
        const auto customers = cmd_simulate(c, dir);
        cmd_make_dataset(customers, c, dir);
        cmd_train(dir / "train.csv", c, dir);
        return cmd_evaluate({dir / "model.json", std::nullopt}, dir / "test.csv", c, dir);
    };
    const auto doc = run_all(cfg, a);
    CHECK(doc.at("report").at("bound_violation_ub").is_number());
    const auto rows = read_sample_path((a / "sample_path.csv").string());
    REQUIRE(rows.size() == 500);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].arrival_time >= rows[i - 1].arrival_time);

    // Rebuild from the config embedded in the report.
    const RunConfig again = parse_config(read_json(a / "report.json"));
    run_all(again, b);
    CHECK(same_tree(a, b));

    // A different seed changes the numbers but not the schema.
    RunConfig other = cfg;
    other.seed = 2;
    const auto c = workdir("pipeline_mdn_c");
    const auto doc2 = run_all(other, c);
    CHECK(slurp(a / "customers.csv") != slurp(c / "customers.csv"));
    CHECK(doc2.at("report").at("ase") != doc.at("report").at("ase"));
    for (const auto& [k, _] : doc.at("report").items()) CHECK(doc2.at("report").contains(k));
}

TEST_CASE("multimodality detector") {
    CHECK(is_multimodal(GaussianMixture({0.5, 0.5}, {0.0, 5.0}, {1.0, 2.0})));
    CHECK_FALSE(is_multimodal(GaussianMixture({0.5, 0.5}, {0.0, 1.5}, {1.0, 2.0})));
    CHECK_FALSE(is_multimodal(GaussianMixture({0.9, 0.1}, {0.0, 5.0}, {1.0, 1.0})));
    CHECK_FALSE(is_multimodal(GaussianMixture::normal(0.0, 1.0)));
}

TEST_CASE("unknown figures are rejected") {
    CHECK_THROWS_AS(cmd_reproduce("fig9", RunConfig{}, workdir("fig9")), ConfigError);
}

#ifdef QDELAY_CLI_PATH
namespace {

int cli(const std::string& args) {
    const std::string cmd = std::string(QDELAY_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("command-line tool: stages, determinism and exit codes") {
    const auto dir = workdir("cli");
    const auto cfg_path = dir / "config.json";
    write_json(to_json(small_config("mse")), cfg_path);
    const std::string c = " --config " + cfg_path.string();

    for (const std::string run : {"run1", "run2"}) {
        const auto out = (dir / run).string();
        REQUIRE(cli("simulate" + c + " --out " + out) == 0);
        REQUIRE(cli("make-dataset" + c + " --customers " + out + "/customers.csv --out " + out) == 0);
        REQUIRE(cli("train" + c + " --train " + out + "/train.csv --out " + out) == 0);
        REQUIRE(cli("evaluate" + c + " --model " + out + "/model.json --test " + out + "/test.csv --out " + out) == 0);
    }
    CHECK(same_tree(dir / "run1", dir / "run2"));

    REQUIRE(cli("simulate" + c + " --seed 9 --out " + (dir / "seeded").string()) == 0);
    CHECK(slurp(dir / "seeded" / "customers.csv") != slurp(dir / "run1" / "customers.csv"));

    // Validation problems exit with 1, file problems with 2.
    std::ofstream(dir / "bad.json") << R"({"sim": {"rho": 1.5}})";
    CHECK(cli("simulate --config " + (dir / "bad.json").string() + " --out " + (dir / "x").string()) == 1);
    CHECK(cli("simulate --config " + (dir / "absent.json").string()) == 2);
    CHECK(cli("train" + c + " --train " + (dir / "absent.csv").string()) == 2);
    CHECK(cli("evaluate" + c + " --baseline median --test " + (dir / "run1/test.csv").string()) == 1);
    CHECK(cli("evaluate" + c + " --test " + (dir / "run1/test.csv").string()) == 1);
    CHECK(cli("frobnicate") == 1);
    CHECK(cli("--help") == 0);
}
#endif
