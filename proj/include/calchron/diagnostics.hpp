#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "calchron/detail/stats.hpp"
#include "calchron/error.hpp"
#include "calchron/inference.hpp"
#include "calchron/summary.hpp"

namespace calchron {

namespace detail {

/// Average ranks (1-based, ties averaged) of the pooled values.
inline std::vector<double> average_ranks(const std::vector<double>& pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&pooled](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // mean of ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

/// Split-chain potential scale reduction on rank-normalized values. Each
/// chain is halved, pooled values are replaced by normal scores of their
/// ranks, and the classic between/within variance ratio is computed over the
/// half-chains. 1.0 means indistinguishable chains; values over ~1.05 flag
/// non-convergence. Invariant under monotone transformations of the values.
inline double r_hat(const std::vector<std::span<const double>>& chains) {
    if (chains.size() < 2)
        throw Error(errc::too_few_samples, "r_hat needs at least 2 chains");
    const std::size_t n = chains.front().size();
    for (const auto& c : chains)
        if (c.size() != n)
            throw Error(errc::shape_mismatch, "r_hat chains must share one length");
    if (n < 4) throw Error(errc::too_few_samples, "r_hat needs chain length >= 4");

    const std::size_t half = n / 2;
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
        halves.emplace_back(c.begin(), c.begin() + half);
        halves.emplace_back(c.end() - half, c.end());
    }

    // Pooled rank-normal scores.
    std::vector<double> pooled;
    for (const auto& h : halves) pooled.insert(pooled.end(), h.begin(), h.end());
    const std::vector<double> ranks = detail::average_ranks(pooled);
    const double S = static_cast<double>(pooled.size());
    std::size_t at = 0;
    for (auto& h : halves)
        for (double& v : h) v = detail::inv_normal_cdf((ranks[at++] - 0.375) / (S + 0.25));

    const std::size_t m = halves.size();
    std::vector<double> means(m);
    double w = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        means[j] = detail::mean(halves[j]);
        w += detail::variance(halves[j]);
    }
    w /= static_cast<double>(m);
    const double var_of_means = detail::variance(means);
    if (w <= 1e-300) return 1.0;  // all values tied: degenerate, flagged upstream

    const double n2 = static_cast<double>(half);
    const double var_plus = (n2 - 1.0) / n2 * w + var_of_means;
    return std::sqrt(var_plus / w);
}

/// Effective sample size via Geyer's initial-positive-sequence truncation:
/// N / (1 + 2 sum rho_k), summing autocorrelations while consecutive-lag
/// pairs stay positive. Clamped to (0, N]; a zero-variance sequence counts
/// as a single effective sample.
inline double ess(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 10) throw Error(errc::too_few_samples, "ess needs at least 10 samples");
    const double m = detail::mean(x);
    double c0 = 0.0;
    for (double v : x) c0 += (v - m) * (v - m);
    c0 /= static_cast<double>(n);
    if (c0 <= 1e-300) return 1.0;  // constant sequence

    auto rho = [&](std::size_t k) {
        double c = 0.0;
        for (std::size_t t = 0; t + k < n; ++t) c += (x[t] - m) * (x[t + k] - m);
        return c / (static_cast<double>(n) * c0);
    };

    double pair_sum = 0.0;
    for (std::size_t k = 0; k + 1 < n; k += 2) {
        const double gamma = rho(k) + rho(k + 1);
        if (gamma <= 0.0) break;
        pair_sum += gamma;
    }
    const double tau = std::max(2.0 * pair_sum - 1.0, 1e-9);
    return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

struct DiagnosticThresholds {
    double rhat_max = 1.05;
    double ess_min = 400.0;
};

struct ParamDiagnostics {
    std::string label;
    double rhat = std::numeric_limits<double>::quiet_NaN();  // NaN with one chain
    double ess = 0.0;             // summed over chains
    double autocorr_time = 0.0;   // kept-sample units, averaged over chains
    bool degenerate = false;
    bool pass = false;
};

struct DiagnosticsReport {
    std::vector<ParamDiagnostics> params;
    DiagnosticThresholds thresholds;
    std::size_t chains = 0;
    std::size_t kept_per_chain = 0;
    int suggested_thin = 1;  // extra thinning that would decorrelate kept samples
    bool all_pass = false;

    std::string table() const {
        std::ostringstream os;
        os << std::left << std::setw(22) << "parameter" << std::right << std::setw(9) << "R-hat"
           << std::setw(12) << "ESS" << std::setw(10) << "tau" << std::setw(8) << "pass" << "\n";
        for (const ParamDiagnostics& p : params) {
            os << std::left << std::setw(22) << p.label << std::right << std::fixed
               << std::setprecision(3) << std::setw(9);
            if (std::isnan(p.rhat))
                os << "n/a";
            else
                os << p.rhat;
            os << std::setprecision(1) << std::setw(12) << p.ess << std::setw(10) << p.autocorr_time
               << std::setw(8) << (p.pass ? "yes" : "NO");
            if (p.degenerate) os << "  (degenerate)";
            os << "\n";
        }
        os << (all_pass ? "diagnostics: all parameters pass" : "diagnostics: FAILURES present")
           << " (thresholds: R-hat < " << std::setprecision(2) << thresholds.rhat_max
           << ", ESS > " << std::setprecision(0) << thresholds.ess_min << ")\n";
        return os.str();
    }
};

/// Convergence/quality report over the chains of one run. R-hat needs at
/// least two chains; with a single chain the R-hat check is skipped and only
/// ESS gates the result.
inline DiagnosticsReport diagnose(const std::vector<ChainOutput>& chains,
                                  const DiagnosticThresholds& thresholds = {}) {
    if (chains.empty()) throw Error(errc::too_few_samples, "no chains to diagnose");
    const std::size_t P = chains.front().n_params;
    for (const ChainOutput& c : chains)
        if (c.n_params != P || c.labels != chains.front().labels)
            throw Error(errc::shape_mismatch, "chains disagree on the parameter set");

    DiagnosticsReport rep;
    rep.thresholds = thresholds;
    rep.chains = chains.size();
    rep.kept_per_chain = chains.front().kept;
    rep.all_pass = true;
    double max_tau = 1.0;

    for (std::size_t p = 0; p < P; ++p) {
        ParamDiagnostics d;
        d.label = chains.front().labels[p];

        std::vector<std::vector<double>> cols;
        for (const ChainOutput& c : chains) cols.push_back(c.column(p));

        bool degenerate = false;
        for (const auto& col : cols)
            if (detail::variance(col) <= 1e-300) degenerate = true;
        d.degenerate = degenerate;

        if (degenerate) {
            d.rhat = 1.0;
            d.ess = 1.0;
            d.autocorr_time = static_cast<double>(rep.kept_per_chain);
        } else {
            if (chains.size() >= 2) {
                std::vector<std::span<const double>> views;
                for (const auto& col : cols) views.emplace_back(col);
                d.rhat = r_hat(views);
            }
            double total_ess = 0.0;
            double tau_sum = 0.0;
            for (const auto& col : cols) {
                const double e = ess(col);
                total_ess += e;
                tau_sum += static_cast<double>(col.size()) / e;
            }
            d.ess = total_ess;
            d.autocorr_time = tau_sum / static_cast<double>(cols.size());
        }
        max_tau = std::max(max_tau, d.autocorr_time);

        const bool rhat_ok = std::isnan(d.rhat) || d.rhat < thresholds.rhat_max;
        d.pass = rhat_ok && d.ess > thresholds.ess_min && !d.degenerate;
        rep.all_pass = rep.all_pass && d.pass;
        rep.params.push_back(std::move(d));
    }
    rep.suggested_thin = static_cast<int>(std::ceil(max_tau));
    return rep;
}

/// Per-parameter posterior summary of one run (chains pooled), the unit the
/// cross-run reproducibility check compares. The histogram step defaults to
/// 5 cal years here: HPD endpoints on a 1-yr histogram are ragged at
/// realistic chain lengths, which would swamp the cross-run comparison with
/// binning noise.
struct RunSummaryTable {
    std::vector<std::string> labels;
    std::vector<double> mean;
    std::vector<double> hpd_low;   // outer envelope of the 95% HPD region
    std::vector<double> hpd_high;
};

inline RunSummaryTable summarize_run(const std::vector<ChainOutput>& chains, double step = 5.0,
                                     double probability = 0.95) {
    if (chains.empty()) throw Error(errc::too_few_samples, "no chains to summarize");
    RunSummaryTable t;
    t.labels = chains.front().labels;
    const std::size_t P = chains.front().n_params;
    for (std::size_t p = 0; p < P; ++p) {
        std::vector<double> pooled;
        for (const ChainOutput& c : chains) {
            const std::vector<double> col = c.column(p);
            pooled.insert(pooled.end(), col.begin(), col.end());
        }
        t.mean.push_back(detail::mean(pooled));
        const HpdResult h = hpd(marginal_density(pooled, step), probability);
        const Interval span = h.span();
        t.hpd_low.push_back(span.lo);
        t.hpd_high.push_back(span.hi);
    }
    return t;
}

struct ReproParam {
    std::string label;
    double delta_mean = 0.0;
    double delta_hpd_low = 0.0;
    double delta_hpd_high = 0.0;
    bool pass = false;
};

struct ReproducibilityReport {
    double tolerance = 0.0;  // cal years
    std::vector<ReproParam> params;
    bool all_pass = false;

    std::string table() const {
        std::ostringstream os;
        os << std::left << std::setw(22) << "parameter" << std::right << std::setw(12)
           << "d(mean)" << std::setw(12) << "d(hpd lo)" << std::setw(12) << "d(hpd hi)"
           << std::setw(8) << "pass" << "\n";
        for (const ReproParam& p : params)
            os << std::left << std::setw(22) << p.label << std::right << std::fixed
               << std::setprecision(2) << std::setw(12) << p.delta_mean << std::setw(12)
               << p.delta_hpd_low << std::setw(12) << p.delta_hpd_high << std::setw(8)
               << (p.pass ? "yes" : "NO") << "\n";
        os << (all_pass ? "reproducibility: all parameters within " : "reproducibility: FAILURES at ")
           << tolerance << " cal yr\n";
        return os.str();
    }
};

/// Largest pairwise disagreement across runs, per parameter, in posterior
/// mean and 95% HPD endpoints. Runs must describe the same parameter set.
inline ReproducibilityReport reproducibility_check(const std::vector<RunSummaryTable>& runs,
                                                   double tolerance) {
    if (runs.size() < 2)
        throw Error(errc::too_few_samples, "reproducibility_check needs at least 2 runs");
    const std::vector<std::string>& labels = runs.front().labels;
    for (const RunSummaryTable& r : runs)
        if (r.labels != labels)
            throw Error(errc::shape_mismatch, "runs disagree on the parameter set");

    ReproducibilityReport rep;
    rep.tolerance = tolerance;
    rep.all_pass = true;
    for (std::size_t p = 0; p < labels.size(); ++p) {
        ReproParam rp;
        rp.label = labels[p];
        for (std::size_t a = 0; a < runs.size(); ++a) {
            for (std::size_t b = a + 1; b < runs.size(); ++b) {
                rp.delta_mean = std::max(rp.delta_mean, std::abs(runs[a].mean[p] - runs[b].mean[p]));
                rp.delta_hpd_low =
                    std::max(rp.delta_hpd_low, std::abs(runs[a].hpd_low[p] - runs[b].hpd_low[p]));
                rp.delta_hpd_high =
                    std::max(rp.delta_hpd_high, std::abs(runs[a].hpd_high[p] - runs[b].hpd_high[p]));
            }
        }
        rp.pass = rp.delta_mean <= tolerance && rp.delta_hpd_low <= tolerance &&
                  rp.delta_hpd_high <= tolerance;
        rep.all_pass = rep.all_pass && rp.pass;
        rep.params.push_back(std::move(rp));
    }
    return rep;
}

}  // namespace calchron
