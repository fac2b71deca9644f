#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "alm/io.hpp"

using namespace alm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli() {
    const char* p = std::getenv("ALM_CLI");
    REQUIRE_MESSAGE(p != nullptr, "ALM_CLI is not set");
    return p;
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("alm_cli_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json example() { return read_json(fs::path(ALM_SOURCE_DIR) / "data" / "example.json"); }

fs::path write_config(const fs::path& dir, const json& cfg) {
    const fs::path p = dir / "config.json";
    write_json(p, cfg);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string args(const fs::path& cfg, const fs::path& out, const std::string& cmd) {
    return "--config " + cfg.string() + " --out " + (out / "out").string() + " " + cmd;
}

}  // namespace

TEST_CASE("curves and build succeed on the example configuration") {
    const fs::path d = scratch("build");
    const fs::path cfg = write_config(d, example());
    CHECK(run(args(cfg, d, "curves")) == 0);
    const CurveSet c = curveset_from_json(read_json(d / "out" / "curves.json"));
    CHECK(c.discount_at(4.5) == doctest::Approx(std::exp(-4.5 * zero_rate({0.0003, 0.01, 0.07, 0.06}, 4.5))));
    CHECK(run(args(cfg, d, "build")) == 0);
    const ModelParams m = model_from_json(read_json(d / "out" / "model.json"));
    CHECK(m.dim() == 2);
    CHECK(m.grid("6m").n_points == 9);
}

TEST_CASE("usage and input errors exit with 2") {
    const fs::path d = scratch("usage");
    CHECK(run("") == 2);
    CHECK(run("--config " + (d / "missing.json").string() + " build") == 2);
    std::ofstream(d / "empty.json") << "";
    CHECK(run("--config " + (d / "empty.json").string() + " build") == 2);
    json cfg = example();
    cfg["surface"] = "no_such_surface.csv";
    CHECK(run(args(write_config(d, cfg), d, "calibrate")) == 2);
    cfg = example();
    cfg["mode"] = "sideways";
    CHECK(run(args(write_config(d, cfg), d, "build")) == 2);
}

TEST_CASE("numerical failures exit with 1") {
    const fs::path d = scratch("numerical");
    json cfg = example();
    cfg["enforce_ordering"] = true;
    CHECK(run(args(write_config(d, cfg), d, "build")) == 1);
    cfg = example();
    cfg["instruments"] = json::array({{{"type", "caplet"}, {"tenor", "6m"}, {"k", 8}, {"strike", 0.02}, {"damping", 0.5}},
                                      {{"type", "caplet"}, {"tenor", "6m"}, {"k", 8}, {"strike", 0.02}}});
    CHECK(run(args(write_config(d, cfg), d, "price")) == 1);
    const json out = read_json(d / "out" / "prices.json");
    REQUIRE(out.size() == 2);
    CHECK(out[0].at("error").at("type").get<std::string>() == "DomainError");
    CHECK(out[1].at("price_bp").get<double>() > 0.0);
}

TEST_CASE("price writes one record per instrument") {
    const fs::path d = scratch("price");
    json cfg = example();
    CHECK(run(args(write_config(d, cfg), d, "price")) == 0);
    const json out = read_json(d / "out" / "prices.json");
    CHECK(out.size() == cfg.at("instruments").size());
    cfg["instruments"] = json::array();
    CHECK(run(args(write_config(d, cfg), d, "price")) == 0);
    CHECK(read_json(d / "out" / "prices.json").empty());
}

TEST_CASE("mc output is reproducible and flags an undefined standard error") {
    const fs::path d = scratch("mc");
    json cfg = example();
    cfg["instruments"] = json::array({cfg["instruments"][0], cfg["instruments"][1]});
    cfg["mc"]["paths"] = 3000;
    const fs::path p = write_config(d, cfg);
    CHECK(run(args(p, d, "mc")) == 0);
    const std::string first = slurp(d / "out" / "mc.json");
    CHECK(run(args(p, d, "mc")) == 0);
    CHECK(slurp(d / "out" / "mc.json") == first);
    CHECK(run(args(p, d, "--seed 99 mc")) == 0);
    CHECK(slurp(d / "out" / "mc.json") != first);
    cfg["mc"]["paths"] = 1;
    CHECK(run(args(write_config(d, cfg), d, "mc")) == 0);
    const json one = read_json(d / "out" / "mc.json");
    CHECK_FALSE(one[0].at("std_error_defined").get<bool>());
    CHECK(one[0].at("std_error_bp").is_null());
}

TEST_CASE("correlation matrix has a unit diagonal") {
    const fs::path d = scratch("corr");
    CHECK(run(args(write_config(d, example()), d, "correlations")) == 0);
    const CsvTable t = read_csv(d / "out" / "correlations.csv");
    REQUIRE(t.rows.size() == 4);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(t.number(i, static_cast<int>(i) + 1) == 1.0);
        for (std::size_t j = 0; j < t.rows.size(); ++j)
            CHECK(t.number(i, static_cast<int>(j) + 1) == t.number(j, static_cast<int>(i) + 1));
    }
}

TEST_CASE("calibrate round trips a synthetic surface") {
    const fs::path d = scratch("calibrate");
    json cfg;
    json factor = {{"kind", "cirj"}, {"x0", 0.8}, {"lambda", 0.1}, {"theta", 0.8}, {"eta", 0.31}, {"nu", 0.05}, {"mu", 0.2}};
    cfg["spec"]["factors"] = json::array(
        {{{"kind", "cirj"}, {"x0", 0.5}, {"lambda", 0.1}, {"theta", 1.53}, {"eta", 0.266}, {"nu", 0.0}, {"mu", 0.0}},
         factor, factor});
    cfg["curves"] = {{"fine_step", 0.5},
                     {"terminal", 3.0},
                     {"ois", {{"beta0", 0.02}, {"beta1", -0.015}, {"beta2", 0.01}, {"gamma", 0.5}}},
                     {"tenors", {{"6m", {{"beta0", 0.024}, {"beta1", -0.015}, {"beta2", 0.01}, {"gamma", 0.5}}}}}};
    cfg["layout"] = {{"maturities", 2}, {"u_c", 0.0065}, {"v_tilde", {{"6m", 0.0075}}}};
    cfg["surface"] = "caplet_vols.csv";
    const fs::path p = write_config(d, cfg);
    CHECK(run(args(p, d, "build")) == 0);
    const ModelParams truth = model_from_json(read_json(d / "out" / "model.json"));
    write_text(d / "caplet_vols.csv", surface_csv(synthetic_surface(truth, {"6m"}, {1, 2}, {0.8, 1.0, 1.3})));
    cfg["spec"]["factors"][1]["eta"] = 0.25;
    cfg["spec"]["factors"][2]["x0"] = 1.1;
    CHECK(run(args(write_config(d, cfg), d, "calibrate")) == 0);
    const json rep = read_json(d / "out" / "calibration_report.json");
    CHECK(rep.at("converged").get<bool>());
    for (const json& f : rep.at("maturities")) CHECK(f.at("rms_vol").get<double>() < 1e-3);

    CapletSurface flat = read_surface_csv(d / "caplet_vols.csv");
    for (CapletQuote& q : flat.quotes) q.vol = 0.0;
    write_text(d / "caplet_vols.csv", surface_csv(flat));
    cfg["calibration"] = {{"max_iterations", 20}, {"restarts", 0}};
    CHECK(run(args(write_config(d, cfg), d, "calibrate")) == 1);
}
