#include <catch2/catch_amalgamated.hpp>

#include "modelrisk/simulation.hpp"
#include "helpers.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace modelrisk;
using testutil::sv_spec;
using testutil::svcj_spec;
using testutil::svj_spec;
using testutil::svls_spec;
using testutil::svvg_spec;

TEST_CASE("degenerate variance gives deterministic vol") {
    ModelSpec s = sv_spec();
    s.diffusion.sigma_v = 1e-12;
    s.premia.eta_s = 0.0;
    PathConfig cfg;
    cfg.n_days = 5000;
    cfg.seed = 11;
    cfg.v0 = s.diffusion.theta;
    const double theta = s.diffusion.theta;
    const SimulatedDataset ds = simulate(s, cfg, {0.02});
    std::vector<double> dy(cfg.n_days);
    for (int t = 0; t < cfg.n_days; ++t) {
        REQUIRE(std::abs(ds.V[t] - theta) < 1e-6);
        dy[t] = ds.Y[t + 1] - ds.Y[t];
    }
    const double mu = (0.02 - 0.5 * theta) * kDailyDt;
    REQUIRE(std::abs(mean_of(dy) - mu) < 4.0 * std::sqrt(theta * kDailyDt / cfg.n_days));
    REQUIRE(std::abs(std::sqrt(variance_of(dy)) - std::sqrt(theta * kDailyDt)) <
            0.05 * std::sqrt(theta * kDailyDt));
}

TEST_CASE("ergodic mean of the variance process") {
    const ModelSpec s = sv_spec();
    PathConfig cfg;
    cfg.n_days = 100000;
    cfg.seed = 12;
    const SimulatedDataset ds = simulate(s, cfg, {0.02});
    const double vbar = mean_of(ds.V);
    const auto& d = s.diffusion;
    const double var_v = d.theta * d.sigma_v * d.sigma_v / (2.0 * d.kappa);
    // Integrated-autocorrelation standard error of the CIR time average.
    const double se = std::sqrt(2.0 * var_v / (d.kappa * cfg.n_days * kDailyDt));
    REQUIRE(std::abs(vbar - d.theta) < 4.0 * se);
}

TEST_CASE("jump-day frequency matches the Bernoulli intensity") {
    const ModelSpec s = svcj_spec();
    PathConfig cfg;
    cfg.n_days = 100000;
    cfg.seed = 13;
    const SimulatedDataset ds = simulate(s, cfg, {0.02});
    int k = 0;
    for (int n : ds.N) k += n;
    const double p = s.ajd.lambda * kDailyDt;
    REQUIRE(std::abs(double(k) / cfg.n_days - p) <
            3.0 * std::sqrt(p * (1.0 - p) / cfg.n_days));
    // Variance jumps are nonnegative and only occur on jump days.
    for (int t = 0; t < cfg.n_days; ++t) {
        if (ds.N[t] == 0) REQUIRE(ds.JV[t] == 0.0);
        REQUIRE(ds.JV[t] >= 0.0);
    }
}

TEST_CASE("determinism and SVCJ to SVJ nesting") {
    const ModelSpec j = svj_spec();
    ModelSpec c = svcj_spec();
    c.ajd.mu_v = 0.0;
    c.ajd.rho_j = 0.0;
    PathConfig cfg;
    cfg.n_days = 500;
    cfg.seed = 14;
    const SimulatedDataset a = simulate(j, cfg, {0.02});
    const SimulatedDataset b = simulate(j, cfg, {0.02});
    REQUIRE(a.Y == b.Y);
    REQUIRE(a.V == b.V);

    const SimulatedDataset n = simulate(c, cfg, {0.02});
    // mu_v = 0 skips the variance-jump draw, so the streams line up exactly.
    REQUIRE(n.Y == a.Y);
    REQUIRE(n.V == a.V);
}

TEST_CASE("stable sampler reduces to a Gaussian at alpha = 2") {
    const int n = 100000;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = sample_stable(2.0, 1.0, 1.0, 2000 + i);
    const double sd = std::sqrt(2.0); // alpha = 2 stable has variance 2 sigma^2
    std::sort(x.begin(), x.end());
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = norm_cdf(x[i] / sd);
        dmax = std::max(dmax, std::max(f - double(i) / n, double(i + 1) / n - f));
    }
    REQUIRE(kolmogorov_pvalue(dmax, n) > 0.01);
}

TEST_CASE("stable sampler empirical characteristic function") {
    const double alpha = 1.9268, sigma = 1.0, dt = 1.0;
    const int n = 200000;
    Rng rng(21);
    for (double u : {0.5, 1.0, 2.0}) {
        double s = 0.0, ss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = sigma * std::pow(dt, 1.0 / alpha) * stable_standard(alpha, 0.0, rng);
            const double re = std::cos(u * x);
            s += re;
            ss += re * re;
        }
        const double m = s / n;
        const double se = std::sqrt((ss / n - m * m) / n);
        const double target = std::exp(-std::pow(sigma * std::pow(dt, 1.0 / alpha) * u, alpha));
        REQUIRE(std::abs(m - target) < 3.0 * se + 1e-9);
    }
}

TEST_CASE("stable sampler sign symmetry for beta = 0") {
    const int n = 1000000;
    Rng rng(22);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += stable_standard(1.7, 0.0, rng) > 0.0 ? 1.0 : -1.0;
    REQUIRE(std::abs(s / n) < 3.0 / std::sqrt(double(n)));
}

TEST_CASE("GIG b -> 0 limit is gamma") {
    const double p = 2.0, a = 3.0;
    const int n = 100000;
    Rng rng(23);
    std::vector<double> x(n);
    for (auto& v : x) v = sample_gig(p, a, 0.0, rng);
    const double mean = p * 2.0 / a, var = p * 4.0 / (a * a);
    REQUIRE(std::abs(mean_of(x) - mean) < 4.0 * std::sqrt(var / n));
    REQUIRE(std::abs(variance_of(x) - var) / var < 0.05);
}

TEST_CASE("GIG moments match Bessel-function ratios") {
    const int n = 100000;
    Rng rng(24);
    for (auto [p, a, b] : {std::tuple{0.5, 2.0, 1.0}, {-0.5, 1.0, 3.0}, {2.0, 4.0, 0.5},
                           {37.0, 80.0, 0.02}}) {
        std::vector<double> x(n);
        for (auto& v : x) v = sample_gig(p, a, b, rng);
        const double om = std::sqrt(a * b);
        const auto kn = [&](double nu) { return std::cyl_bessel_k(std::abs(nu), om); };
        const double m1 = std::sqrt(b / a) * kn(p + 1.0) / kn(p);
        const double m2 = (b / a) * kn(p + 2.0) / kn(p);
        const double var = m2 - m1 * m1;
        REQUIRE(std::abs(mean_of(x) - m1) < 4.0 * std::sqrt(var / n));
        REQUIRE(std::abs(mean_of(x) - m1) / m1 < 0.02);
        REQUIRE(std::abs(variance_of(x) - var) / var < 0.1);
    }
}

TEST_CASE("GIG chi-square goodness of fit") {
    const double p = 1.3, a = 2.0, b = 1.5;
    const int n = 100000;
    Rng rng(25);
    std::vector<double> x(n);
    for (auto& v : x) v = sample_gig(p, a, b, rng);
    std::sort(x.begin(), x.end());
    // 40 equal-count bins; expected mass from Simpson integration of the
    // unnormalized density over each bin, normalized by the total.
    const int bins = 40;
    const auto dens = [&](double t) {
        return std::pow(t, p - 1.0) * std::exp(-0.5 * (a * t + b / t));
    };
    const auto simpson = [&](double lo, double hi) {
        const int m = 200;
        double sum = dens(lo) + dens(hi);
        for (int i = 1; i < m; ++i) sum += dens(lo + (hi - lo) * i / m) * (i % 2 ? 4.0 : 2.0);
        return sum * (hi - lo) / (3.0 * m);
    };
    std::vector<double> edges{x.front() * 0.999};
    for (int i = 1; i < bins; ++i) edges.push_back(x[i * n / bins]);
    edges.push_back(x.back() * 1.001);
    double total = 0.0;
    std::vector<double> mass(bins);
    for (int i = 0; i < bins; ++i) {
        mass[i] = simpson(edges[i], edges[i + 1]);
        total += mass[i];
    }
    double chi2 = 0.0;
    for (int i = 0; i < bins; ++i) {
        const double expect = n * mass[i] / total;
        const double obs = double(n) / bins;
        chi2 += (obs - expect) * (obs - expect) / expect;
    }
    // 1% critical value of chi-square with 39 degrees of freedom.
    REQUIRE(chi2 < 62.43);
}

TEST_CASE("GIG rejects invalid parameter regions") {
    Rng rng(26);
    REQUIRE_THROWS_AS(sample_gig(2.0, -1.0, 1.0, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(sample_gig(-1.0, 1.0, 0.0, rng), std::invalid_argument);
}

TEST_CASE("MC oracle degenerate price and CLT scaling") {
    ModelSpec s = sv_spec();
    s.diffusion.theta = 1e-30;
    s.diffusion.sigma_v = 1e-16;
    s.premia = {0.0, 0.0};
    PricingInputs in;
    in.Y0 = std::log(100.0);
    in.V0 = 1e-32;
    in.r = 0.02;
    in.tau = 30.0 / 252.0;
    in.K = 95.0;
    const auto [price, se] = mc_price_oracle(s, in, 2000, 1, 31);
    REQUIRE(std::abs(price - (100.0 - 95.0 * std::exp(-in.r * in.tau))) < 1e-9);
    REQUIRE(se < 1e-9);

    ModelSpec h = sv_spec();
    h.premia = {0.0, 0.0};
    in.V0 = h.diffusion.theta;
    const auto [p1, se1] = mc_price_oracle(h, in, 20000, 2, 32);
    const auto [p2, se2] = mc_price_oracle(h, in, 80000, 2, 32);
    REQUIRE(std::abs(se1 / se2 - 2.0) < 0.3);
    REQUIRE(std::abs(p1 - p2) < 4.0 * se1);
}

TEST_CASE("synthetic option prices follow the AR(1) error law") {
    ModelSpec s = sv_spec();
    PathConfig cfg;
    cfg.n_days = 4000;
    cfg.seed = 33;
    cfg.with_options = true;
    const SimulatedDataset ds = simulate(s, cfg, {0.02});
    REQUIRE(ds.F.size() == ds.Y.size());
    std::vector<double> e(ds.C.size());
    for (std::size_t t = 0; t < e.size(); ++t) e[t] = ds.C[t] - ds.F[t];
    // Lag-1 autocorrelation close to rho_c, marginal sd close to stationary sd.
    std::vector<double> e0(e.begin(), e.end() - 1), e1(e.begin() + 1, e.end());
    REQUIRE(std::abs(pearson_corr(e0, e1) - s.perr.rho_c) < 0.03);
    const double stat_sd = s.perr.sigma_c / std::sqrt(1.0 - s.perr.rho_c * s.perr.rho_c);
    REQUIRE(std::abs(std::sqrt(variance_of(e)) - stat_sd) / stat_sd < 0.15);
}

TEST_CASE("simulate validates inputs") {
    ModelSpec bad = sv_spec();
    bad.diffusion.kappa = -1.0;
    PathConfig cfg;
    REQUIRE_THROWS_AS(simulate(bad, cfg, {0.02}), std::invalid_argument);
    cfg.n_days = 0;
    REQUIRE_THROWS_AS(simulate(sv_spec(), cfg, {0.02}), std::invalid_argument);
    cfg.n_days = 10;
    REQUIRE_THROWS_AS(simulate(sv_spec(), cfg, {0.02, 0.02}), std::invalid_argument);
}
