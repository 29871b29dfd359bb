#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "calchron/calibration_curve.hpp"
#include "calchron/error.hpp"
#include "calchron/inference.hpp"
#include "calchron/model.hpp"

namespace calchron {

/// Density evaluated on a uniform calendar-age grid, normalized so that
/// sum(density) * step == 1.
struct DensityGrid {
    double lo = 0.0;    // first grid point, cal BP
    double step = 1.0;  // cal years
    std::vector<double> density;

    std::size_t size() const { return density.size(); }
    double theta(std::size_t i) const { return lo + static_cast<double>(i) * step; }
    double hi() const { return theta(density.empty() ? 0 : density.size() - 1); }

    double mass(std::size_t i) const { return density[i] * step; }

    void normalize() {
        double total = 0.0;
        for (double d : density) total += d;
        if (!(total > 0.0) || !std::isfinite(total))
            throw Error(errc::bad_argument, "density grid has no positive finite mass");
        const double scale = 1.0 / (total * step);
        for (double& d : density) d *= scale;
    }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < density.size(); ++i) m += theta(i) * mass(i);
        return m;
    }
    double sd() const {
        const double m = mean();
        double v = 0.0;
        for (std::size_t i = 0; i < density.size(); ++i) {
            const double d = theta(i) - m;
            v += d * d * mass(i);
        }
        return std::sqrt(v);
    }
};

/// Total-variation distance between two densities on the same grid.
inline double tv_distance(const DensityGrid& a, const DensityGrid& b) {
    if (a.size() != b.size() || a.lo != b.lo || a.step != b.step)
        throw Error(errc::shape_mismatch, "tv_distance requires matching grids");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.density[i] - b.density[i]);
    return 0.5 * s * a.step;
}

/// Single-determination calibration on a grid spanning the curve domain:
/// exp(loglik_single) pointwise, normalized.
inline DensityGrid calibrate_independent(double x, double sigma, const CalibrationCurve& curve,
                                         double step = 1.0) {
    if (!(sigma > 0.0)) throw Error(errc::negative_sigma, "sigma must be > 0");
    if (!(step > 0.0)) throw Error(errc::bad_argument, "grid step must be > 0");
    DensityGrid g;
    g.lo = curve.min_cal_age();
    g.step = step;
    const std::size_t n =
        static_cast<std::size_t>(std::floor((curve.max_cal_age() - g.lo) / step)) + 1;
    g.density.resize(n);
    double max_ll = -std::numeric_limits<double>::infinity();
    std::vector<double> ll(n);
    for (std::size_t i = 0; i < n; ++i) {
        ll[i] = loglik_single(x, sigma, g.theta(i), curve);
        max_ll = std::max(max_ll, ll[i]);
    }
    for (std::size_t i = 0; i < n; ++i) g.density[i] = std::exp(ll[i] - max_ll);
    g.normalize();
    return g;
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
};

/// Highest-posterior-density region at a target mass. Multimodal densities
/// yield several disjoint intervals; interval ends sit on grid-cell edges.
struct HpdResult {
    double probability = 0.0;
    double achieved_mass = 0.0;
    std::vector<Interval> intervals;

    double total_width() const {
        double w = 0.0;
        for (const Interval& iv : intervals) w += iv.width();
        return w;
    }
    /// Outer envelope [min lo, max hi] of the region.
    Interval span() const {
        Interval s{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (const Interval& iv : intervals) {
            s.lo = std::min(s.lo, iv.lo);
            s.hi = std::max(s.hi, iv.hi);
        }
        return s;
    }
};

/// Greedy grid HPD: cells are taken in decreasing density order until the
/// accumulated mass reaches `probability`, then merged into intervals. On a
/// uniform grid this is the minimal grid-level region.
inline HpdResult hpd(const DensityGrid& grid, double probability) {
    if (!(probability > 0.0 && probability < 1.0))
        throw Error(errc::bad_argument, "hpd probability must be in (0, 1)");
    if (grid.density.empty()) throw Error(errc::bad_argument, "empty density grid");
    double total = 0.0;
    for (double d : grid.density) total += d * grid.step;
    if (std::abs(total - 1.0) > 1e-6)
        throw Error(errc::bad_argument, "hpd input density is not normalized");

    std::vector<std::size_t> idx(grid.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&grid](std::size_t a, std::size_t b) {
        return grid.density[a] > grid.density[b];
    });

    HpdResult res;
    res.probability = probability;
    std::vector<bool> selected(grid.size(), false);
    double cum = 0.0;
    for (std::size_t i : idx) {
        selected[i] = true;
        cum += grid.mass(i);
        if (cum >= probability) break;
    }
    res.achieved_mass = cum;

    const double half = grid.step / 2.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!selected[i]) continue;
        std::size_t j = i;
        while (j + 1 < grid.size() && selected[j + 1]) ++j;
        res.intervals.push_back({grid.theta(i) - half, grid.theta(j) + half});
        i = j;
    }
    return res;
}

/// Histogram of MCMC draws on an explicit grid. Samples within half a step
/// outside the bounds clamp into the edge bins. `smooth_sd` > 0 applies a
/// Gaussian kernel of that width (cal years) and renormalizes; HPD consumers
/// should stay unsmoothed.
inline DensityGrid marginal_density(std::span<const double> samples, double step, double lo,
                                    double hi, double smooth_sd = 0.0) {
    if (samples.size() < 100)
        throw Error(errc::too_few_samples,
                    "marginal_density needs >= 100 samples, got " + std::to_string(samples.size()));
    if (!(step > 0.0) || !(hi >= lo)) throw Error(errc::bad_argument, "bad grid bounds");
    DensityGrid g;
    g.lo = lo;
    g.step = step;
    const std::size_t n = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5)) + 1;
    g.density.assign(n, 0.0);
    for (double s : samples) {
        long k = std::lround((s - lo) / step);
        if (k < 0) k = 0;
        if (k >= static_cast<long>(n)) k = static_cast<long>(n) - 1;
        g.density[static_cast<std::size_t>(k)] += 1.0;
    }
    if (smooth_sd > 0.0) {
        const long radius = std::lround(4.0 * smooth_sd / step);
        std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
        for (long k = -radius; k <= radius; ++k)
            kernel[static_cast<std::size_t>(k + radius)] =
                std::exp(-0.5 * (k * step) * (k * step) / (smooth_sd * smooth_sd));
        std::vector<double> smoothed(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (g.density[i] == 0.0) continue;
            for (long k = -radius; k <= radius; ++k) {
                const long j = static_cast<long>(i) + k;
                if (j < 0 || j >= static_cast<long>(n)) continue;
                smoothed[static_cast<std::size_t>(j)] +=
                    g.density[i] * kernel[static_cast<std::size_t>(k + radius)];
            }
        }
        g.density = std::move(smoothed);
    }
    g.normalize();
    return g;
}

/// Bounds derived from the samples themselves, snapped to the step.
inline DensityGrid marginal_density(std::span<const double> samples, double step = 1.0,
                                    double smooth_sd = 0.0) {
    if (samples.size() < 100)
        throw Error(errc::too_few_samples,
                    "marginal_density needs >= 100 samples, got " + std::to_string(samples.size()));
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    const double lo = std::floor(*mn / step) * step;
    const double hi = std::ceil(*mx / step) * step;
    return marginal_density(samples, step, lo, hi, smooth_sd);
}

/// Exhaustive-integration posterior for small models; the ground truth the
/// sampler is audited against.
struct OracleResult {
    std::vector<std::string> labels;
    std::vector<DensityGrid> marginals;

    // Full joint table, normalized so sum * step^P == 1. Materialized only
    // up to joint_cell_cap cells; marginals are always available.
    std::vector<double> joint;
    std::vector<std::size_t> shape;
    bool joint_materialized = false;

    const DensityGrid& marginal_of(const std::string& label) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return marginals[i];
        throw Error(errc::bad_argument, "no oracle marginal for '" + label + "'");
    }
};

inline constexpr std::size_t oracle_max_cells = 100000000;  // 10^8
inline constexpr std::size_t joint_cell_cap = 10000000;     // 10^7

/// Evaluates exp(posterior_log) over the full product grid (theta slots on
/// window-intersect-curve-domain, boundary slots on the window) and returns
/// normalized marginals per parameter.
inline OracleResult grid_posterior_oracle(const ChronModel& model, const CalibrationCurve& curve,
                                          double step = 1.0) {
    const std::size_t P = model.parameter_count();
    if (P == 0 || P > 3)
        throw Error(errc::bad_argument,
                    "grid_posterior_oracle handles 1-3 parameters, model has " + std::to_string(P));
    if (!(step > 0.0)) throw Error(errc::bad_argument, "grid step must be > 0");

    std::vector<bool> is_theta(P, false);
    for (const ThetaBinding& tb : model.theta_bindings()) is_theta[static_cast<std::size_t>(tb.slot)] = true;

    std::vector<DensityGrid> grids(P);
    std::size_t cells = 1;
    for (std::size_t p = 0; p < P; ++p) {
        double lo = model.window().t_min;
        double hi = model.window().t_max;
        if (is_theta[p]) {
            lo = std::max(lo, curve.min_cal_age());
            hi = std::min(hi, curve.max_cal_age());
        }
        if (!(hi > lo))
            throw Error(errc::infeasible_model,
                        "window does not intersect curve domain for parameter " +
                            model.parameter_labels()[p]);
        grids[p].lo = lo;
        grids[p].step = step;
        const std::size_t n = static_cast<std::size_t>(std::floor((hi - lo) / step)) + 1;
        grids[p].density.assign(n, 0.0);
        if (cells > oracle_max_cells / n)
            throw Error(errc::grid_too_large, "product grid exceeds 10^8 cells");
        cells *= n;
    }

    OracleResult res;
    res.labels = model.parameter_labels();
    res.shape.resize(P);
    for (std::size_t p = 0; p < P; ++p) res.shape[p] = grids[p].size();
    res.joint_materialized = cells <= joint_cell_cap;
    if (res.joint_materialized) res.joint.assign(cells, 0.0);

    ParameterState state(P, 0.0);
    std::vector<std::size_t> idx(P, 0);
    for (std::size_t p = 0; p < P; ++p) state[p] = grids[p].theta(0);

    double ref = -std::numeric_limits<double>::infinity();  // log scale of accumulators
    double total = 0.0;
    std::size_t flat = 0;
    while (true) {
        const double lp = posterior_log(state, model, curve);
        if (std::isfinite(lp)) {
            if (!std::isfinite(ref)) ref = lp;
            if (lp > ref + 30.0) {
                const double down = std::exp(ref - lp);
                for (DensityGrid& g : grids)
                    for (double& d : g.density) d *= down;
                for (double& d : res.joint) d *= down;
                total *= down;
                ref = lp;
            }
            const double w = std::exp(lp - ref);
            total += w;
            for (std::size_t p = 0; p < P; ++p) grids[p].density[idx[p]] += w;
            if (res.joint_materialized) res.joint[flat] += w;
        }
        // Odometer: last slot spins fastest (row-major joint).
        std::size_t p = P;
        while (p > 0) {
            --p;
            if (++idx[p] < grids[p].size()) {
                state[p] = grids[p].theta(idx[p]);
                break;
            }
            idx[p] = 0;
            state[p] = grids[p].theta(0);
            if (p == 0) {
                p = P + 1;  // done marker
                break;
            }
        }
        ++flat;
        if (p == P + 1) break;
    }

    if (!(total > 0.0))
        throw Error(errc::infeasible_model, "posterior mass is zero over the entire grid");
    for (std::size_t p = 0; p < P; ++p) {
        for (double& d : grids[p].density) d /= total * step;
    }
    if (res.joint_materialized) {
        double joint_scale = total;
        for (std::size_t p = 0; p < P; ++p) joint_scale *= step;
        for (double& d : res.joint) d /= joint_scale;
    }
    res.marginals = std::move(grids);
    return res;
}

}  // namespace calchron
