#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "calchron/calibration_curve.hpp"
#include "calchron/detail/stats.hpp"
#include "calchron/error.hpp"
#include "calchron/model.hpp"

namespace calchron {

struct SamplerConfig {
    long iterations = 50000;   // total sweeps, burn-in included
    long burn_in = 10000;      // sweeps discarded from the start
    int thin = 10;             // keep one state per `thin` post-burn-in sweeps
    int chains = 4;
    std::uint64_t seed = 1;
    double proposal_sd = 30.0;  // random-walk scale, cal years
    bool adapt = true;          // tune proposal scales during burn-in only

    void validate() const {
        if (iterations <= 0) throw Error(errc::bad_argument, "iterations must be > 0");
        if (burn_in < 0 || burn_in >= iterations)
            throw Error(errc::bad_argument, "burn_in must satisfy 0 <= burn_in < iterations");
        if (thin < 1) throw Error(errc::bad_argument, "thin must be >= 1");
        if (chains < 1) throw Error(errc::bad_argument, "chains must be >= 1");
        if (!(proposal_sd > 0.0)) throw Error(errc::bad_argument, "proposal_sd must be > 0");
    }
};

/// Post-burn-in, thinned draws for one chain plus bookkeeping.
struct ChainOutput {
    int chain_id = 0;
    std::uint64_t chain_seed = 0;  // derived from (config.seed, chain_id)
    SamplerConfig config;
    std::vector<std::string> labels;
    std::size_t kept = 0;
    std::size_t n_params = 0;
    std::vector<double> samples;  // row-major, kept x n_params
    std::vector<double> acceptance_rate;   // per parameter, post-burn-in
    std::vector<double> proposal_sd_used;  // per parameter, frozen after burn-in
    double wall_seconds = 0.0;

    double at(std::size_t row, std::size_t col) const { return samples[row * n_params + col]; }
    std::span<const double> row(std::size_t r) const {
        return {samples.data() + r * n_params, n_params};
    }
    /// All kept values of one parameter, copied out column-wise.
    std::vector<double> column(std::size_t col) const {
        std::vector<double> out(kept);
        for (std::size_t r = 0; r < kept; ++r) out[r] = at(r, col);
        return out;
    }
};

/// Log N(x; mu(theta), sigma^2 + gamma(theta)^2) without the 2*pi constant:
///   -(x - mu)^2 / (2 sigma^2 + 2 gamma^2) - 0.5 * ln(sigma^2 + gamma^2).
/// The log-variance term stays because gamma varies with theta.
inline double loglik_single(double x, double sigma, double theta, const CalibrationCurve& curve) {
    const CurvePoint p = curve.at(theta);  // throws ThetaOutOfDomain
    const double var = sigma * sigma + p.gamma * p.gamma;
    const double resid = x - p.mu;
    return -resid * resid / (2.0 * var) - 0.5 * std::log(var);
}

/// Log prior of the ordering + phase structure: -inf when any ordering or
/// window constraint is violated, otherwise sum_j -n_j ln(alpha_j - beta_j).
inline double prior_log(const ParameterState& state, const ChronModel& model) {
    if (!model.constraint_set().satisfied(state)) return -std::numeric_limits<double>::infinity();
    double lp = 0.0;
    for (const PhaseTerm& ph : model.phase_terms()) {
        if (ph.n == 0) continue;
        const double span = state[static_cast<std::size_t>(ph.alpha)] -
                            state[static_cast<std::size_t>(ph.beta)];
        lp -= static_cast<double>(ph.n) * std::log(span);
    }
    return lp;
}

/// Unnormalized log posterior: prior_log plus the sum of per-determination
/// likelihood terms. A theta outside the curve domain counts as -inf so that
/// such proposals are rejected rather than raised mid-run.
inline double posterior_log(const ParameterState& state, const ChronModel& model,
                            const CalibrationCurve& curve) {
    double lp = prior_log(state, model);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    for (const ThetaBinding& tb : model.theta_bindings()) {
        const double theta = state[static_cast<std::size_t>(tb.slot)];
        if (!curve.contains(theta)) return -std::numeric_limits<double>::infinity();
        lp += loglik_single(tb.x, tb.sigma, theta, curve);
    }
    return lp;
}

/// Single-site random-walk Metropolis over the parameter index order.
/// Proposals are per-parameter Gaussian steps; anything landing at -inf
/// (constraint violation, curve domain, window) is rejected. With adapt on,
/// per-parameter scales are tuned toward 20-50% acceptance during burn-in and
/// frozen afterwards. Fully deterministic given (config.seed, chain_id).
inline ChainOutput run_chain(const ChronModel& model, const CalibrationCurve& curve,
                             const SamplerConfig& config, int chain_id) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const std::size_t P = model.parameter_count();
    const std::uint64_t init_seed = detail::mix_seed(config.seed, static_cast<std::uint64_t>(chain_id), 1);
    const std::uint64_t walk_seed = detail::mix_seed(config.seed, static_cast<std::uint64_t>(chain_id), 2);

    ParameterState state = feasible_init(model, curve, init_seed);  // throws InfeasibleModel
    double lp = posterior_log(state, model, curve);
    if (!std::isfinite(lp))
        throw Error(errc::infeasible_model, "initial state has zero posterior density");

    std::mt19937_64 rng(walk_seed);
    std::normal_distribution<double> step(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<double> sd(P, config.proposal_sd);
    const double sd_floor = 1e-3;
    const double sd_ceil = model.window().width();

    constexpr long adapt_batch = 50;  // sweeps per adaptation step
    std::vector<long> batch_accepts(P, 0);
    std::vector<long> accepts(P, 0);  // post-burn-in

    ChainOutput out;
    out.chain_id = chain_id;
    out.chain_seed = walk_seed;
    out.config = config;
    out.labels = model.parameter_labels();
    out.n_params = P;
    out.kept = static_cast<std::size_t>((config.iterations - config.burn_in) / config.thin);
    out.samples.reserve(out.kept * P);

    ParameterState proposal = state;
    for (long it = 0; it < config.iterations; ++it) {
        const bool in_burn = it < config.burn_in;
        for (std::size_t p = 0; p < P; ++p) {
            const double old = state[p];
            proposal = state;
            proposal[p] = old + sd[p] * step(rng);
            const double lp_new = posterior_log(proposal, model, curve);
            const double log_u = std::log(unif(rng));
            if (log_u < lp_new - lp) {
                state[p] = proposal[p];
                lp = lp_new;
                if (in_burn)
                    ++batch_accepts[p];
                else
                    ++accepts[p];
            }
        }
        if (in_burn && config.adapt && (it + 1) % adapt_batch == 0) {
            for (std::size_t p = 0; p < P; ++p) {
                const double rate = static_cast<double>(batch_accepts[p]) / adapt_batch;
                if (rate < 0.20)
                    sd[p] = std::max(sd_floor, sd[p] * 0.7);
                else if (rate > 0.50)
                    sd[p] = std::min(sd_ceil, sd[p] * 1.4);
                batch_accepts[p] = 0;
            }
        }
        if (!in_burn && (it - config.burn_in + 1) % config.thin == 0)
            out.samples.insert(out.samples.end(), state.begin(), state.end());
    }

    const long post = config.iterations - config.burn_in;
    out.acceptance_rate.resize(P);
    for (std::size_t p = 0; p < P; ++p)
        out.acceptance_rate[p] = static_cast<double>(accepts[p]) / static_cast<double>(post);
    out.proposal_sd_used = sd;
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Runs `config.chains` independent chains, each with its own seed and start
/// state derived from (config.seed, chain_id). Chains execute concurrently;
/// the result order is by chain_id regardless of completion order.
inline std::vector<ChainOutput> run_sampler(const ChronModel& model, const CalibrationCurve& curve,
                                            const SamplerConfig& config) {
    config.validate();
    std::vector<std::future<ChainOutput>> futures;
    futures.reserve(static_cast<std::size_t>(config.chains));
    for (int c = 0; c < config.chains; ++c)
        futures.push_back(std::async(std::launch::async, [&model, &curve, &config, c] {
            return run_chain(model, curve, config, c);
        }));
    std::vector<ChainOutput> out;
    out.reserve(futures.size());
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

}  // namespace calchron
