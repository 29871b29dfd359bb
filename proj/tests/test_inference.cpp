#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_helpers.hpp"

using calchron::ChainOutput;
using calchron::ChronModel;
using calchron::Error;
using calchron::errc;
using calchron::SamplerConfig;

namespace {

calchron::CalibrationCurve flat_curve(double mu, double gamma, double lo = 1000, double hi = 2000) {
    return calchron::CalibrationCurve::from_knots({{lo, mu, gamma}, {hi, mu, gamma}}, "flat");
}

// 99.9% chi-square quantile via the Wilson-Hilferty approximation.
double chi2_q999(double df) {
    const double z = 3.0902;  // Phi^-1(0.999)
    const double a = 2.0 / (9.0 * df);
    const double t = 1.0 - a + z * std::sqrt(a);
    return df * t * t * t;
}

}  // namespace

TEST_CASE("loglik_single matches the closed form") {
    const double half_log_2500 = 0.5 * std::log(2500.0);

    CHECK(calchron::loglik_single(5900, 50, 1500, flat_curve(5900, 0)) ==
          Catch::Approx(-half_log_2500).margin(1e-12));
    CHECK(calchron::loglik_single(5900, 50, 1500, flat_curve(5950, 0)) ==
          Catch::Approx(-0.5 - half_log_2500).margin(1e-12));
    // Curve error adds in quadrature: denominator 2*sigma^2 + 2*gamma^2.
    CHECK(calchron::loglik_single(5900, 50, 1500, flat_curve(5950, 50)) ==
          Catch::Approx(-0.25 - 0.5 * std::log(5000.0)).margin(1e-12));

    CHECK_THROWS_MATCHES(calchron::loglik_single(5900, 50, 999, flat_curve(5900, 0)), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == errc::theta_out_of_domain;
                         }));
}

TEST_CASE("prior_log is the phase term inside the feasible region, -inf outside") {
    const auto m = ChronModel::build(
        {7000, 5000}, {{"A", false, true, {{"t1", 5950, 30}, {"t2", 5940, 30}}}}, {});
    const auto a = static_cast<std::size_t>(m.slot_of("alpha_A"));
    const auto b = static_cast<std::size_t>(m.slot_of("beta_A"));
    const auto t1 = static_cast<std::size_t>(m.slot_of("t1"));
    const auto t2 = static_cast<std::size_t>(m.slot_of("t2"));

    calchron::ParameterState s(4);
    s[a] = 6000;
    s[b] = 5900;
    s[t1] = 5980;
    s[t2] = 5930;
    CHECK(calchron::prior_log(s, m) == Catch::Approx(-2.0 * std::log(100.0)).margin(1e-12));

    s[t2] = 5880;  // below beta: indicator kills the state
    CHECK(std::isinf(calchron::prior_log(s, m)));
    s[t2] = 6050;  // above alpha
    CHECK(std::isinf(calchron::prior_log(s, m)));
    s[t2] = 5930;
    s[a] = 5890;  // alpha below beta
    CHECK(std::isinf(calchron::prior_log(s, m)));
}

TEST_CASE("violating a strict theta ordering zeroes the prior") {
    const auto m = ChronModel::build(
        {7000, 5000},
        {{"E", true, true, {{"theta_6", 5900, 50}, {"theta_7", 5870, 50}, {"theta_8", 5850, 50}}}},
        {});
    calchron::ParameterState s(5);
    s[static_cast<std::size_t>(m.slot_of("alpha_E"))] = 6200;
    s[static_cast<std::size_t>(m.slot_of("beta_E"))] = 5600;
    s[static_cast<std::size_t>(m.slot_of("theta_6"))] = 6000;
    s[static_cast<std::size_t>(m.slot_of("theta_7"))] = 5900;
    s[static_cast<std::size_t>(m.slot_of("theta_8"))] = 5800;
    CHECK(std::isfinite(calchron::prior_log(s, m)));

    std::swap(s[static_cast<std::size_t>(m.slot_of("theta_6"))],
              s[static_cast<std::size_t>(m.slot_of("theta_7"))]);
    CHECK(std::isinf(calchron::prior_log(s, m)));
}

TEST_CASE("posterior_log adds prior and likelihood terms") {
    const auto curve = testutil::load_demo_curve();
    const auto m = testutil::load_model("minimal.json");
    const auto s = calchron::feasible_init(m, curve, 7);

    const double lp = calchron::posterior_log(s, m, curve);
    REQUIRE(std::isfinite(lp));
    const double expect =
        calchron::prior_log(s, m) +
        calchron::loglik_single(5000, 50, s[static_cast<std::size_t>(m.slot_of("theta_1"))], curve);
    CHECK(lp == Catch::Approx(expect).margin(1e-12));

    calchron::ParameterState bad = s;
    bad[static_cast<std::size_t>(m.slot_of("theta_1"))] = 1e9;
    CHECK(std::isinf(calchron::posterior_log(bad, m, curve)));
}

TEST_CASE("full model posterior equals an independent term-by-term recomputation") {
    const auto curve = testutil::load_demo_curve();
    const auto m = testutil::five_context_model(7500, 6000);
    const auto s = calchron::feasible_init(m, curve, 21);

    const double lp = calchron::posterior_log(s, m, curve);
    REQUIRE(std::isfinite(lp));

    // Recompute from the raw definition, bypassing prior_log/loglik_single.
    double expect = 0.0;
    for (const calchron::PhaseTerm& ph : m.phase_terms())
        expect -= ph.n * std::log(s[static_cast<std::size_t>(ph.alpha)] -
                                  s[static_cast<std::size_t>(ph.beta)]);
    for (const calchron::ThetaBinding& tb : m.theta_bindings()) {
        const auto p = curve.at(s[static_cast<std::size_t>(tb.slot)]);
        const double var = tb.sigma * tb.sigma + p.gamma * p.gamma;
        expect += -(tb.x - p.mu) * (tb.x - p.mu) / (2.0 * var) - 0.5 * std::log(var);
    }
    CHECK(lp == Catch::Approx(expect).margin(1e-9));
}

TEST_CASE("posterior_log does not depend on the context listing order") {
    const auto curve = testutil::load_demo_curve();
    const auto fwd = testutil::five_context_model();

    std::vector<calchron::Context> rev_contexts(fwd.contexts().rbegin(), fwd.contexts().rend());
    const auto rev = ChronModel::build(
        fwd.window(), std::move(rev_contexts),
        {{"I", "G", false}, {"G", "E", false}, {"E", "C", false}, {"C", "B", false}});

    const auto s_fwd = calchron::feasible_init(fwd, curve, 3);
    calchron::ParameterState s_rev(rev.parameter_count());
    for (std::size_t p = 0; p < fwd.parameter_count(); ++p)
        s_rev[static_cast<std::size_t>(rev.slot_of(fwd.parameter_labels()[p]))] = s_fwd[p];

    CHECK(calchron::posterior_log(s_fwd, fwd, curve) ==
          Catch::Approx(calchron::posterior_log(s_rev, rev, curve)).margin(1e-9));
}

TEST_CASE("an unconstrained theta on the identity curve samples its Gaussian posterior") {
    const auto curve = testutil::identity_curve();
    const auto m = ChronModel::build({5600, 4400}, {{"A", false, false, {{"t1", 5000, 50}}}}, {});
    SamplerConfig config;
    config.iterations = 50000;
    config.burn_in = 5000;
    config.thin = 5;
    config.chains = 1;
    config.seed = 31;

    const ChainOutput chain = calchron::run_chain(m, curve, config, 0);
    REQUIRE(chain.kept == 9000);
    const std::vector<double> draws = chain.column(0);
    CHECK(calchron::detail::mean(draws) == Catch::Approx(5000.0).margin(3.0));
    CHECK(calchron::detail::stddev(draws) == Catch::Approx(50.0).margin(2.5));
    CHECK(chain.acceptance_rate[0] > 0.15);
    CHECK(chain.acceptance_rate[0] < 0.60);
}

TEST_CASE("two ordered thetas match the grid oracle within 0.02 total variation") {
    const auto curve = testutil::load_demo_curve();
    const auto m = ChronModel::build(
        {6700, 6200}, {{"E", true, false, {{"t1", 5900, 50}, {"t2", 5850, 50}}}}, {});

    const calchron::OracleResult oracle = calchron::grid_posterior_oracle(m, curve, 1.0);

    SamplerConfig config;
    config.iterations = 2000000;
    config.burn_in = 20000;
    config.thin = 10;
    config.chains = 1;
    config.seed = 5;
    const ChainOutput chain = calchron::run_chain(m, curve, config, 0);

    for (std::size_t p = 0; p < 2; ++p) {
        const calchron::DensityGrid& om = oracle.marginals[p];
        const calchron::DensityGrid mm =
            calchron::marginal_density(chain.column(p), om.step, om.lo, om.hi());
        CHECK(calchron::tv_distance(om, mm) < 0.02);
    }
}

TEST_CASE("chains are bit-identical for identical (seed, config)") {
    const auto curve = testutil::load_demo_curve();
    const auto m = testutil::load_model("minimal.json");
    SamplerConfig config;
    config.iterations = 4000;
    config.burn_in = 500;
    config.thin = 3;
    config.seed = 77;

    const ChainOutput a = calchron::run_chain(m, curve, config, 2);
    const ChainOutput b = calchron::run_chain(m, curve, config, 2);
    CHECK(a.samples == b.samples);
    CHECK(a.acceptance_rate == b.acceptance_rate);
    CHECK(a.proposal_sd_used == b.proposal_sd_used);

    const ChainOutput other_chain = calchron::run_chain(m, curve, config, 3);
    CHECK(a.samples != other_chain.samples);
    SamplerConfig other_seed = config;
    other_seed.seed = 78;
    CHECK(a.samples != calchron::run_chain(m, curve, other_seed, 2).samples);
}

TEST_CASE("kept count is floor((iterations - burn_in) / thin)") {
    const auto curve = testutil::load_demo_curve();
    const auto m = testutil::load_model("minimal.json");
    SamplerConfig config;
    config.iterations = 107;
    config.burn_in = 10;
    config.thin = 9;
    const ChainOutput chain = calchron::run_chain(m, curve, config, 0);
    CHECK(chain.kept == 10);
    CHECK(chain.samples.size() == 10 * m.parameter_count());
}

TEST_CASE("run_sampler: ordered outputs, constraint audit, determinism, reduction") {
    const auto curve = testutil::load_demo_curve();
    const auto m = testutil::load_model("five_context_sequence.json");
    SamplerConfig config;
    config.iterations = 6000;
    config.burn_in = 1000;
    config.thin = 5;
    config.chains = 4;
    config.seed = 11;

    const std::vector<ChainOutput> chains = calchron::run_sampler(m, curve, config);
    REQUIRE(chains.size() == 4);
    for (int c = 0; c < 4; ++c) CHECK(chains[static_cast<std::size_t>(c)].chain_id == c);

    // Every stored state satisfies every emitted constraint.
    for (const ChainOutput& c : chains) {
        for (std::size_t r = 0; r < c.kept; ++r) {
            if (!m.constraint_set().satisfied(c.row(r)))
                FAIL("stored state violates constraints at chain " << c.chain_id << " row " << r);
        }
    }

    const std::vector<ChainOutput> again = calchron::run_sampler(m, curve, config);
    for (std::size_t c = 0; c < 4; ++c) CHECK(chains[c].samples == again[c].samples);

    SamplerConfig single = config;
    single.chains = 1;
    const std::vector<ChainOutput> one = calchron::run_sampler(m, curve, single);
    REQUIRE(one.size() == 1);
    CHECK(one[0].samples == calchron::run_chain(m, curve, single, 0).samples);
}

TEST_CASE("sampler raises InfeasibleModel when initialization cannot fit") {
    const auto curve = testutil::identity_curve();
    const auto m =
        ChronModel::build({5000.5, 5000.0}, {{"A", false, true, {{"t1", 5000.2, 30}}}}, {});
    SamplerConfig config;
    config.iterations = 100;
    config.burn_in = 10;
    CHECK_THROWS_MATCHES(calchron::run_chain(m, curve, config, 0), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == errc::infeasible_model;
                         }));
}

TEST_CASE("stationary distribution matches the posterior on a grid surrogate") {
    const auto curve = testutil::load_demo_curve();
    const auto m = ChronModel::build({6900, 6100}, {{"A", false, false, {{"t1", 5900, 50}}}}, {});

    const calchron::OracleResult oracle = calchron::grid_posterior_oracle(m, curve, 1.0);
    const calchron::DensityGrid& om = oracle.marginals[0];

    SamplerConfig config;
    config.iterations = 300000;
    config.burn_in = 5000;
    config.thin = 50;  // near-iid draws for the chi-square comparison
    config.chains = 1;
    config.seed = 101;
    const ChainOutput chain = calchron::run_chain(m, curve, config, 0);
    const std::vector<double> draws = chain.column(0);

    // Aggregate the oracle grid into ~25 equal-mass bins, then chi-square.
    const int K = 25;
    std::vector<double> edges;  // upper theta edge per bin (last = +inf)
    std::vector<double> probs;
    double cum = 0.0;
    double bin_mass = 0.0;
    for (std::size_t i = 0; i < om.size(); ++i) {
        bin_mass += om.mass(i);
        cum += om.mass(i);
        if (static_cast<int>(edges.size()) < K - 1 &&
            cum >= (static_cast<double>(edges.size()) + 1.0) / K) {
            edges.push_back(om.theta(i) + om.step / 2.0);
            probs.push_back(bin_mass);
            bin_mass = 0.0;
        }
    }
    edges.push_back(std::numeric_limits<double>::infinity());
    probs.push_back(bin_mass);

    std::vector<double> observed(probs.size(), 0.0);
    for (double d : draws) {
        std::size_t k = 0;
        while (d >= edges[k]) ++k;
        observed[k] += 1.0;
    }
    const double n = static_cast<double>(draws.size());
    double chi2 = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double expected = n * probs[k];
        REQUIRE(expected > 5.0);
        chi2 += (observed[k] - expected) * (observed[k] - expected) / expected;
    }
    INFO("chi2 = " << chi2 << " with " << probs.size() - 1 << " dof");
    CHECK(chi2 < chi2_q999(static_cast<double>(probs.size() - 1)));
}
