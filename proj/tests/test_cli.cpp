#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "test_helpers.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
};

// Runs the built binary through the shell; stdout/stderr go to /dev/null so
// test output stays readable.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const std::string cmd =
        env_prefix + " " + std::string(CALCHRON_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult r;
    if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
    return r;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("calchron_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string curve_path() { return testutil::data_path("curves/demo9k.14c"); }
std::string model_path(const std::string& name) { return testutil::data_path("models/" + name); }

}  // namespace

TEST_CASE("calibrate writes density + hpd artifacts") {
    const fs::path dir = fresh_dir("calibrate");
    const std::string prefix = (dir / "cal").string();
    const auto r = run_cli("calibrate --x 5900 --sigma 50 --curve " + curve_path() + " --out " + prefix);
    REQUIRE(r.exit_code == 0);

    const calchron::DensityGrid g =
        calchron::parse_density_csv(calchron::read_file(prefix + "_density.csv"));
    double total = 0.0;
    for (double d : g.density) total += d * g.step;
    CHECK(std::abs(total - 1.0) < 1e-6);

    const auto j = nlohmann::json::parse(calchron::read_file(prefix + "_hpd.json"));
    CHECK(j["hpd68"]["achieved_mass"].get<double>() >= 0.68);
    CHECK(j["hpd95"]["achieved_mass"].get<double>() >= 0.95);
    CHECK(j["hpd95"]["intervals_cal_bp"].size() >= 1);
}

TEST_CASE("calibrate rejects bad input with exit 2") {
    CHECK(run_cli("calibrate --x 5900 --sigma -1 --curve " + curve_path()).exit_code == 2);
    CHECK(run_cli("calibrate --x 5900 --sigma 50 --curve /nonexistent.14c").exit_code == 2);
    CHECK(run_cli("calibrate --sigma 50 --curve " + curve_path()).exit_code == 2);  // missing --x
}

TEST_CASE("calibrate honors the grid step") {
    const fs::path dir = fresh_dir("step");
    const std::string prefix = (dir / "cal5").string();
    REQUIRE(run_cli("calibrate --x 5900 --sigma 50 --step 5 --curve " + curve_path() + " --out " +
                    prefix)
                .exit_code == 0);
    const calchron::DensityGrid g =
        calchron::parse_density_csv(calchron::read_file(prefix + "_density.csv"));
    CHECK(g.step == 5.0);
    double total = 0.0;
    for (double d : g.density) total += d * g.step;
    CHECK(std::abs(total - 1.0) < 1e-6);
}

TEST_CASE("curve files resolve through CALCHRON_CURVE_DIR") {
    const fs::path dir = fresh_dir("envdir");
    const std::string prefix = (dir / "cal").string();
    const std::string curves_dir = testutil::data_path("curves");
    const auto r = run_cli("calibrate --x 5900 --sigma 50 --curve demo9k.14c --out " + prefix,
                           "CALCHRON_CURVE_DIR=" + curves_dir);
    CHECK(r.exit_code == 0);
    CHECK(run_cli("calibrate --x 5900 --sigma 50 --curve demo9k.14c --out " + prefix).exit_code == 2);
}

TEST_CASE("run produces the full artifact set") {
    const fs::path dir = fresh_dir("run");
    const std::string out = (dir / "out").string();
    const auto r = run_cli("run --model " + model_path("minimal.json") + " --curve " + curve_path() +
                           " --iterations 30000 --burn-in 3000 --thin 5 --chains 2 --seed 9 " +
                           "--out-dir " + out);
    REQUIRE(r.exit_code == 0);

    for (const std::string f :
         {"manifest.json", "chain_0.csv", "chain_1.csv", "chain_0.meta.json", "chain_1.meta.json",
          "diagnostics.json", "diagnostics.txt", "marginal_theta_1.csv", "marginal_alpha_A.csv",
          "marginal_beta_A.csv", "hpd_theta_1.json", "hpd_alpha_A.json", "hpd_beta_A.json"}) {
        INFO(f);
        CHECK(fs::exists(fs::path(out) / f));
    }

    const auto manifest = nlohmann::json::parse(calchron::read_file(fs::path(out) / "manifest.json"));
    CHECK(manifest["model"]["sha256"].get<std::string>().size() == 64);
    CHECK(manifest["curve"]["sha256"].get<std::string>().size() == 64);
    CHECK(manifest["config"]["iterations"].get<long>() == 30000);

    const auto diag = nlohmann::json::parse(calchron::read_file(fs::path(out) / "diagnostics.json"));
    CHECK(diag["all_pass"].get<bool>());
}

TEST_CASE("rerunning with the same seed is byte-identical") {
    const fs::path dir = fresh_dir("replay");
    const std::string out1 = (dir / "a").string();
    const std::string out2 = (dir / "b").string();
    const std::string args = "run --model " + model_path("minimal.json") + " --curve " +
                             curve_path() +
                             " --iterations 8000 --burn-in 1000 --thin 4 --chains 2 --seed 33 "
                             "--no-gate --out-dir ";
    REQUIRE(run_cli(args + out1).exit_code == 0);
    REQUIRE(run_cli(args + out2).exit_code == 0);

    for (const std::string f : {"chain_0.csv", "chain_1.csv", "manifest.json", "chain_0.meta.json"}) {
        INFO(f);
        CHECK(calchron::read_file(fs::path(out1) / f) == calchron::read_file(fs::path(out2) / f));
    }
}

TEST_CASE("run exit codes distinguish gate, validation and infeasibility") {
    const fs::path dir = fresh_dir("codes");

    // Too-short run fails the diagnostics gate -> 3; --no-gate keeps it 0.
    const std::string short_args = "run --model " + model_path("minimal.json") + " --curve " +
                                   curve_path() +
                                   " --iterations 300 --burn-in 50 --thin 1 --chains 2 --seed 1 "
                                   "--out-dir " +
                                   (dir / "short").string();
    CHECK(run_cli(short_args).exit_code == 3);
    CHECK(run_cli(short_args + "_ng --no-gate").exit_code == 0);

    // Cyclic model -> validation failure 2.
    const fs::path cyclic = dir / "cyclic.json";
    calchron::write_file(cyclic, R"({
      "calendar_window": [7000, 6000],
      "contexts": [{"id": "B"}, {"id": "C"}],
      "relations": [{"older": "B", "younger": "C"}, {"older": "C", "younger": "B"}]
    })");
    CHECK(run_cli("run --model " + cyclic.string() + " --curve " + curve_path() + " --out-dir " +
                  (dir / "x").string())
              .exit_code == 2);

    // Window too narrow for the parameter chain -> infeasible 4.
    const fs::path narrow = dir / "narrow.json";
    calchron::write_file(narrow, R"({
      "calendar_window": [6500.4, 6500.0],
      "contexts": [{"id": "A", "determinations": [{"label": "t1", "x": 5742, "sigma": 30}]}]
    })");
    CHECK(run_cli("run --model " + narrow.string() + " --curve " + curve_path() + " --out-dir " +
                  (dir / "y").string())
              .exit_code == 4);

    // Unknown flag -> 2.
    CHECK(run_cli("run --model x --curve y --bogus-flag").exit_code == 2);
}

TEST_CASE("plot overlays densities into an SVG") {
    const fs::path dir = fresh_dir("plot");
    const std::string p1 = (dir / "a").string();
    const std::string p2 = (dir / "b").string();
    REQUIRE(run_cli("calibrate --x 5900 --sigma 50 --curve " + curve_path() + " --out " + p1)
                .exit_code == 0);
    REQUIRE(run_cli("calibrate --x 5850 --sigma 50 --curve " + curve_path() + " --out " + p2)
                .exit_code == 0);

    const std::string svg_path = (dir / "overlay.svg").string();
    const auto r = run_cli("plot --density " + p1 + "_density.csv " + p2 + "_density.csv --out " +
                           svg_path + " --labels first,second");
    REQUIRE(r.exit_code == 0);

    const std::string svg = calchron::read_file(svg_path);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("first") != std::string::npos);
    CHECK(svg.find("second") != std::string::npos);
    std::size_t polylines = 0;
    for (std::size_t at = svg.find("<polyline"); at != std::string::npos;
         at = svg.find("<polyline", at + 1))
        ++polylines;
    CHECK(polylines == 2);
}

TEST_CASE("plot rejects malformed input with exit 2") {
    const fs::path dir = fresh_dir("plotbad");
    const fs::path empty = dir / "empty.csv";
    calchron::write_file(empty, "");
    CHECK(run_cli("plot --density " + empty.string() + " --out " + (dir / "o.svg").string())
              .exit_code == 2);

    const fs::path junk = dir / "junk.csv";
    calchron::write_file(junk, "theta,density\n1,2\nnot,numbers\n");
    CHECK(run_cli("plot --density " + junk.string() + " --out " + (dir / "o.svg").string())
              .exit_code == 2);

    const fs::path ok = dir / "ok.csv";
    calchron::write_file(ok, "theta,density\n1,0.5\n2,0.5\n");
    CHECK(run_cli("plot --density " + ok.string() + " --out " + (dir / "o.svg").string() +
                  " --labels a,b,c")
              .exit_code == 2);
}
