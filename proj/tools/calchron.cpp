// calchron: Bayesian radiocarbon calibration and chronology CLI.
//
// Subcommands:
//   calibrate  single-determination calibration -> density CSV + HPD JSON
//   run        full model MCMC -> chains, diagnostics, marginals, manifest
//   plot       overlay density CSVs as an SVG

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "calchron/calchron.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_gate = 3;
constexpr int exit_infeasible = 4;

// --curve accepts a plain path, or a name resolved against CALCHRON_CURVE_DIR.
fs::path resolve_curve_path(const std::string& arg) {
    fs::path p(arg);
    if (fs::exists(p)) return p;
    if (const char* dir = std::getenv("CALCHRON_CURVE_DIR")) {
        const fs::path candidate = fs::path(dir) / p;
        if (fs::exists(candidate)) return candidate;
    }
    throw calchron::Error(calchron::errc::io_error, "curve file not found: " + arg);
}

calchron::CalibrationCurve load_curve(const std::string& arg) {
    const fs::path path = resolve_curve_path(arg);
    return calchron::CalibrationCurve::parse(calchron::read_file(path), path.stem().string());
}

std::string format_hpd(const calchron::HpdResult& h) {
    std::string s;
    for (std::size_t i = 0; i < h.intervals.size(); ++i) {
        if (i) s += " U ";
        char buf[96];
        std::snprintf(buf, sizeof(buf), "[%.1f, %.1f]", h.intervals[i].lo, h.intervals[i].hi);
        s += buf;
    }
    return s;
}

int cmd_calibrate(double x, double sigma, const std::string& curve_arg, double step,
                  const std::string& out_prefix) {
    const calchron::CalibrationCurve curve = load_curve(curve_arg);
    const calchron::DensityGrid density = calchron::calibrate_independent(x, sigma, curve, step);
    const calchron::HpdResult hpd68 = calchron::hpd(density, 0.68);
    const calchron::HpdResult hpd95 = calchron::hpd(density, 0.95);

    calchron::write_file(out_prefix + "_density.csv", calchron::density_csv(density));
    nlohmann::json j = {{"x", x},
                        {"sigma", sigma},
                        {"curve", curve.name()},
                        {"grid_step", step},
                        {"hpd68", calchron::hpd_json(hpd68)},
                        {"hpd95", calchron::hpd_json(hpd95)}};
    calchron::write_file(out_prefix + "_hpd.json", j.dump(2) + "\n");

    std::cout << "calibrated " << x << " +/- " << sigma << " BP against curve '" << curve.name()
              << "'\n";
    std::cout << "  68% HPD (cal BP): " << format_hpd(hpd68) << "\n";
    std::cout << "  95% HPD (cal BP): " << format_hpd(hpd95) << "\n";
    std::cout << "wrote " << out_prefix << "_density.csv, " << out_prefix << "_hpd.json\n";
    return exit_ok;
}

int cmd_run(const std::string& model_arg, const std::string& curve_arg,
            const calchron::SamplerConfig& config, const calchron::DiagnosticThresholds& thresholds,
            bool gate, double step, const std::string& out_dir) {
    const std::string model_text = calchron::read_file(model_arg);
    const fs::path curve_path = resolve_curve_path(curve_arg);
    const std::string curve_text = calchron::read_file(curve_path);

    const calchron::ChronModel model = calchron::ChronModel::parse(model_text);
    const calchron::CalibrationCurve curve =
        calchron::CalibrationCurve::parse(curve_text, curve_path.stem().string());

    fs::create_directories(out_dir);
    // Inputs are hashed into the manifest before sampling starts.
    const nlohmann::json manifest = calchron::run_manifest_json(
        model_arg, model_text, curve_path.string(), curve_text, config, thresholds, gate);
    calchron::write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

    const std::vector<calchron::ChainOutput> chains = calchron::run_sampler(model, curve, config);

    double wall = 0.0;
    for (const calchron::ChainOutput& c : chains) {
        wall = std::max(wall, c.wall_seconds);
        const std::string stem = "chain_" + std::to_string(c.chain_id);
        calchron::write_file(fs::path(out_dir) / (stem + ".csv"), calchron::chain_csv(c));
        calchron::write_file(fs::path(out_dir) / (stem + ".meta.json"),
                             calchron::chain_sidecar_json(c).dump(2) + "\n");
    }

    const calchron::DiagnosticsReport report = calchron::diagnose(chains, thresholds);
    calchron::write_file(fs::path(out_dir) / "diagnostics.json",
                         calchron::diagnostics_json(report).dump(2) + "\n");
    calchron::write_file(fs::path(out_dir) / "diagnostics.txt", report.table());

    // Pooled marginal + HPD per parameter.
    for (std::size_t p = 0; p < model.parameter_count(); ++p) {
        std::vector<double> pooled;
        for (const calchron::ChainOutput& c : chains) {
            const std::vector<double> col = c.column(p);
            pooled.insert(pooled.end(), col.begin(), col.end());
        }
        double lo = model.window().t_min;
        double hi = model.window().t_max;
        bool is_theta = false;
        for (const calchron::ThetaBinding& tb : model.theta_bindings())
            if (tb.slot == static_cast<int>(p)) is_theta = true;
        if (is_theta) {
            lo = std::max(lo, curve.min_cal_age());
            hi = std::min(hi, curve.max_cal_age());
        }
        const calchron::DensityGrid marginal = calchron::marginal_density(pooled, step, lo, hi);
        const std::string base = calchron::sanitize_label(model.parameter_labels()[p]);
        calchron::write_file(fs::path(out_dir) / ("marginal_" + base + ".csv"),
                             calchron::density_csv(marginal));
        nlohmann::json j = {{"parameter", model.parameter_labels()[p]},
                            {"mean", calchron::detail::mean(pooled)},
                            {"hpd68", calchron::hpd_json(calchron::hpd(marginal, 0.68))},
                            {"hpd95", calchron::hpd_json(calchron::hpd(marginal, 0.95))}};
        calchron::write_file(fs::path(out_dir) / ("hpd_" + base + ".json"), j.dump(2) + "\n");
    }

    std::cout << report.table() << "\n";
    std::cout << "sampled " << config.chains << " chains x " << chains.front().kept
              << " kept states; slowest chain " << wall << " s\n";
    std::cout << "outputs in " << out_dir << "/\n";

    if (gate && !report.all_pass) {
        std::cerr << "diagnostics gate failed (rerun longer, or pass --no-gate to keep going)\n";
        return exit_gate;
    }
    return exit_ok;
}

int cmd_plot(const std::vector<std::string>& density_files, const std::string& out_path,
             const std::string& labels_arg) {
    std::vector<calchron::DensityGrid> series;
    std::vector<std::string> labels;
    for (const std::string& f : density_files) {
        series.push_back(calchron::parse_density_csv(calchron::read_file(f)));
        labels.push_back(fs::path(f).stem().string());
    }
    if (!labels_arg.empty()) {
        labels.clear();
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = labels_arg.find(',', pos);
            labels.push_back(labels_arg.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (labels.size() != series.size())
            throw calchron::Error(calchron::errc::bad_argument,
                                  "--labels count does not match the number of density files");
    }
    calchron::write_file(out_path, calchron::density_overlay_svg(series, labels));
    std::cout << "wrote " << out_path << " (" << series.size() << " densities)\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian radiocarbon calibration and chronology engine"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("calchron ") + calchron::version_string);

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "calibrate one radiocarbon determination");
    double x = 0.0, sigma = 0.0, cal_step = 1.0;
    std::string cal_curve, cal_out = "calibrate";
    cal->add_option("--x", x, "radiocarbon age, BP")->required();
    cal->add_option("--sigma", sigma, "laboratory error, BP")->required();
    cal->add_option("--curve", cal_curve, "calibration curve file")->required();
    cal->add_option("--step", cal_step, "grid step, cal years (default 1)");
    cal->add_option("--out", cal_out, "output file prefix (default 'calibrate')");

    // run
    auto* run = app.add_subcommand("run", "run MCMC on a chronological model");
    std::string run_model, run_curve, run_out = "run_out";
    calchron::SamplerConfig config;
    calchron::DiagnosticThresholds thresholds;
    bool no_gate = false, no_adapt = false;
    double run_step = 1.0;
    run->add_option("--model", run_model, "model JSON file")->required();
    run->add_option("--curve", run_curve, "calibration curve file")->required();
    run->add_option("--iterations", config.iterations, "total sweeps per chain (default 50000)");
    run->add_option("--burn-in", config.burn_in, "sweeps discarded (default 10000)");
    run->add_option("--thin", config.thin, "keep every thin-th sweep (default 10)");
    run->add_option("--chains", config.chains, "independent chains (default 4)");
    run->add_option("--seed", config.seed, "master seed (default 1)");
    run->add_option("--proposal-sd", config.proposal_sd, "random-walk scale, cal years (default 30)");
    run->add_flag("--no-adapt", no_adapt, "disable burn-in proposal adaptation");
    run->add_option("--step", run_step, "marginal grid step, cal years (default 1)");
    run->add_option("--rhat-max", thresholds.rhat_max, "diagnostics gate: max R-hat (default 1.05)");
    run->add_option("--ess-min", thresholds.ess_min, "diagnostics gate: min ESS (default 400)");
    run->add_flag("--no-gate", no_gate, "exit 0 even when diagnostics fail");
    run->add_option("--out-dir", run_out, "output directory (default 'run_out')");

    // plot
    auto* plot = app.add_subcommand("plot", "overlay density CSVs as an SVG");
    std::vector<std::string> densities;
    std::string plot_out, plot_labels;
    plot->add_option("--density", densities, "density CSV file(s)")->required()->expected(-1);
    plot->add_option("--out", plot_out, "output SVG path")->required();
    plot->add_option("--labels", plot_labels, "comma-separated legend labels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }

    try {
        if (cal->parsed()) return cmd_calibrate(x, sigma, cal_curve, cal_step, cal_out);
        if (run->parsed()) {
            config.adapt = !no_adapt;
            config.validate();
            return cmd_run(run_model, run_curve, config, thresholds, !no_gate, run_step, run_out);
        }
        if (plot->parsed()) return cmd_plot(densities, plot_out, plot_labels);
    } catch (const calchron::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == calchron::errc::infeasible_model ? exit_infeasible : exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    }
    return exit_validation;
}
