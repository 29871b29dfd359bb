#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "calchron/diagnostics.hpp"
#include "calchron/error.hpp"
#include "calchron/inference.hpp"
#include "calchron/summary.hpp"
#include "calchron/version.hpp"

namespace calchron {

/// %.17g: enough digits that reading the text back reproduces the double.
inline std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(errc::io_error, "SHA-256 digest failed");
    static const char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0x0f];
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io_error, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errc::io_error, "cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(errc::io_error, "short write to '" + path.string() + "'");
}

/// One column per parameter label, one row per kept iteration.
inline std::string chain_csv(const ChainOutput& chain) {
    std::string out;
    for (std::size_t p = 0; p < chain.labels.size(); ++p) {
        if (p) out += ',';
        out += chain.labels[p];
    }
    out += '\n';
    for (std::size_t r = 0; r < chain.kept; ++r) {
        for (std::size_t p = 0; p < chain.n_params; ++p) {
            if (p) out += ',';
            out += fmt_full(chain.at(r, p));
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::json config_json(const SamplerConfig& c) {
    return {{"iterations", c.iterations}, {"burn_in", c.burn_in}, {"thin", c.thin},
            {"chains", c.chains},         {"seed", c.seed},       {"proposal_sd", c.proposal_sd},
            {"adapt", c.adapt}};
}

/// Sidecar for one chain: configuration, seeds and acceptance bookkeeping.
/// Carries no wall-clock data; reruns write identical sidecars.
inline nlohmann::json chain_sidecar_json(const ChainOutput& chain) {
    nlohmann::json accept = nlohmann::json::object();
    nlohmann::json sds = nlohmann::json::object();
    for (std::size_t p = 0; p < chain.labels.size(); ++p) {
        accept[chain.labels[p]] = chain.acceptance_rate[p];
        sds[chain.labels[p]] = chain.proposal_sd_used[p];
    }
    return {{"chain_id", chain.chain_id},
            {"chain_seed", chain.chain_seed},
            {"kept", chain.kept},
            {"config", config_json(chain.config)},
            {"acceptance_rate", accept},
            {"proposal_sd_used", sds}};
}

inline std::string density_csv(const DensityGrid& g) {
    std::string out = "theta_cal_bp,density\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        out += fmt_full(g.theta(i));
        out += ',';
        out += fmt_full(g.density[i]);
        out += '\n';
    }
    return out;
}

/// Reads a density CSV back (as written by density_csv; header optional).
/// Requires a uniform ascending grid.
inline DensityGrid parse_density_csv(std::string_view text) {
    std::vector<double> thetas;
    std::vector<double> dens;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos) continue;
        if (line[first] == '#') continue;
        std::string buf(line);
        for (char& ch : buf)
            if (ch == ',') ch = ' ';
        std::istringstream ss(buf);
        double t = 0.0, d = 0.0;
        if (!(ss >> t >> d)) {
            if (line_no == 1) continue;  // header row
            throw Error(errc::malformed_row,
                        "line " + std::to_string(line_no) + ": expected 'theta,density'");
        }
        thetas.push_back(t);
        dens.push_back(d);
    }
    if (thetas.size() < 2) throw Error(errc::malformed_row, "density CSV has fewer than 2 rows");
    DensityGrid g;
    g.lo = thetas.front();
    g.step = thetas[1] - thetas[0];
    if (!(g.step > 0.0)) throw Error(errc::malformed_row, "density grid must ascend");
    for (std::size_t i = 1; i < thetas.size(); ++i) {
        const double expect = g.lo + static_cast<double>(i) * g.step;
        if (std::abs(thetas[i] - expect) > 1e-6 * std::max(1.0, std::abs(expect)))
            throw Error(errc::malformed_row, "density grid is not uniform at row " + std::to_string(i + 1));
    }
    g.density = std::move(dens);
    return g;
}

inline nlohmann::json hpd_json(const HpdResult& h) {
    nlohmann::json intervals = nlohmann::json::array();
    for (const Interval& iv : h.intervals) intervals.push_back({iv.lo, iv.hi});
    return {{"probability", h.probability},
            {"achieved_mass", h.achieved_mass},
            {"intervals_cal_bp", intervals},
            {"total_width", h.total_width()}};
}

inline nlohmann::json diagnostics_json(const DiagnosticsReport& rep) {
    nlohmann::json params = nlohmann::json::array();
    for (const ParamDiagnostics& p : rep.params) {
        nlohmann::json j = {{"label", p.label},
                            {"ess", p.ess},
                            {"autocorr_time", p.autocorr_time},
                            {"degenerate", p.degenerate},
                            {"pass", p.pass}};
        if (std::isnan(p.rhat))
            j["rhat"] = nullptr;
        else
            j["rhat"] = p.rhat;
        params.push_back(std::move(j));
    }
    return {{"chains", rep.chains},
            {"kept_per_chain", rep.kept_per_chain},
            {"thresholds", {{"rhat_max", rep.thresholds.rhat_max}, {"ess_min", rep.thresholds.ess_min}}},
            {"suggested_thin", rep.suggested_thin},
            {"all_pass", rep.all_pass},
            {"parameters", params}};
}

inline nlohmann::json reproducibility_json(const ReproducibilityReport& rep) {
    nlohmann::json params = nlohmann::json::array();
    for (const ReproParam& p : rep.params)
        params.push_back({{"label", p.label},
                          {"delta_mean", p.delta_mean},
                          {"delta_hpd_low", p.delta_hpd_low},
                          {"delta_hpd_high", p.delta_hpd_high},
                          {"pass", p.pass}});
    return {{"tolerance_cal_years", rep.tolerance}, {"all_pass", rep.all_pass}, {"parameters", params}};
}

/// Everything needed to replay a run bit-exactly: input hashes, the full
/// sampler configuration and the tool version. Carries no clock data; two
/// runs of the same command produce identical manifests.
inline nlohmann::json run_manifest_json(const std::string& model_path, const std::string& model_text,
                                        const std::string& curve_path, const std::string& curve_text,
                                        const SamplerConfig& config,
                                        const DiagnosticThresholds& thresholds, bool gate_enabled) {
    return {{"tool", "calchron"},
            {"version", version_string},
            {"model", {{"path", model_path}, {"sha256", sha256_hex(model_text)}}},
            {"curve", {{"path", curve_path}, {"sha256", sha256_hex(curve_text)}}},
            {"config", config_json(config)},
            {"gate",
             {{"enabled", gate_enabled},
              {"rhat_max", thresholds.rhat_max},
              {"ess_min", thresholds.ess_min}}}};
}

/// File-name-safe version of a parameter label.
inline std::string sanitize_label(std::string_view label) {
    std::string out;
    out.reserve(label.size());
    for (char c : label) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '_' || c == '-';
        out += ok ? c : '_';
    }
    return out;
}

}  // namespace calchron
