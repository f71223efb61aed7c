#include <catch2/catch_amalgamated.hpp>

#include "modelrisk/pricing.hpp"
#include "modelrisk/simulation.hpp"
#include "helpers.hpp"

#include <cmath>
#include <complex>

using namespace modelrisk;
using testutil::mjd_spec;
using testutil::sv_spec;
using testutil::svcj_spec;
using testutil::svj_spec;
using testutil::svls_spec;
using testutil::svvg_spec;

namespace {

double bs_call(double s, double k, double r, double tau, double sigma) {
    const double sq = sigma * std::sqrt(tau);
    const double d1 = (std::log(s / k) + (r + 0.5 * sigma * sigma) * tau) / sq;
    return s * norm_cdf(d1) - k * std::exp(-r * tau) * norm_cdf(d1 - sq);
}

PricingInputs base_inputs() {
    PricingInputs in;
    in.Y0 = std::log(100.0);
    in.V0 = 0.0347;
    in.r = 0.02;
    in.tau = 30.0 / 252.0;
    in.K = 100.0;
    return in;
}

} // namespace

TEST_CASE("characteristic function equals one at u = 0") {
    const PricingInputs in = base_inputs();
    for (const ModelSpec& s :
         {sv_spec(), svj_spec(), svcj_spec(), svvg_spec(), svls_spec(), mjd_spec()}) {
        const Complex phi = characteristic_fn(s, in, Complex(0.0, 0.0));
        REQUIRE(std::abs(phi - Complex(1.0, 0.0)) < 1e-14);
    }
}

TEST_CASE("cf_terms vanish at u = 0 and reject invalid Q reversion") {
    const ModelSpec s = sv_spec();
    const CFTerms t = cf_terms(s, 0.5, Complex(0.0, 0.0));
    REQUIRE(std::abs(t.b) < 1e-14);
    REQUIRE(std::abs(t.c) < 1e-14);

    ModelSpec bad = sv_spec();
    bad.premia.eta_v = bad.diffusion.kappa + 0.1;
    REQUIRE_THROWS_AS(cf_terms(bad, 0.5, Complex(1.0, 0.0)), std::invalid_argument);
}

TEST_CASE("CF modulus bound and conjugate symmetry") {
    const PricingInputs in = base_inputs();
    for (const ModelSpec& s : {sv_spec(), svj_spec(), svcj_spec(), svvg_spec(), svls_spec()}) {
        for (double u : {0.1, 1.0, 5.0, 25.0, 120.0}) {
            const Complex a = characteristic_fn(s, in, Complex(u, 0.0));
            const Complex b = characteristic_fn(s, in, Complex(-u, 0.0));
            // |phi| carries the huge e^{iuY0} rotation; modulus must be <= 1.
            REQUIRE(std::abs(a) <= 1.0 + 1e-12);
            REQUIRE(std::abs(b - std::conj(a)) < 1e-12 * (1.0 + std::abs(a)));
        }
    }
}

TEST_CASE("SV characteristic function matches a Q-measure Monte Carlo") {
    ModelSpec s = sv_spec();
    PricingInputs in = base_inputs();
    in.V0 = s.diffusion.theta;
    const double u = 2.0;
    const Complex phi = characteristic_fn(s, in, Complex(u, 0.0));

    const int n = 200000;
    PathConfig cfg;
    cfg.n_days = 30;
    cfg.substeps = 10;
    cfg.measure = Measure::Q;
    cfg.y0 = in.Y0;
    cfg.v0 = in.V0;
    double sre = 0.0, sim = 0.0, ssre = 0.0, ssim = 0.0;
    for (int i = 0; i < n; ++i) {
        cfg.seed = 1000 + i;
        const SimulatedDataset ds = simulate(s, cfg, {in.r});
        const double y = ds.Y.back();
        const double re = std::cos(u * y), im = std::sin(u * y);
        sre += re;
        sim += im;
        ssre += re * re;
        ssim += im * im;
    }
    const double mre = sre / n, mim = sim / n;
    const double se_re = std::sqrt((ssre / n - mre * mre) / n);
    const double se_im = std::sqrt((ssim / n - mim * mim) / n);
    REQUIRE(std::abs(mre - phi.real()) < 3.0 * se_re + 2e-3);
    REQUIRE(std::abs(mim - phi.imag()) < 3.0 * se_im + 2e-3);
}

TEST_CASE("Black-Scholes limit of the CF and the price") {
    ModelSpec s = sv_spec();
    s.diffusion.sigma_v = 1e-8;
    s.diffusion.rho = 0.0;
    s.premia.eta_v = 0.0;
    PricingInputs in = base_inputs();
    const double theta = s.diffusion.theta;
    in.V0 = theta;

    for (double u : {0.5, 2.0, 7.0}) {
        const Complex phi = characteristic_fn(s, in, Complex(u, 0.0));
        const Complex bs = std::exp(Complex(0.0, u) * (in.Y0 + (in.r - 0.5 * theta) * in.tau) -
                                    0.5 * u * u * theta * in.tau);
        REQUIRE(std::abs(phi - bs) < 1e-6);
    }
    const double price = price_call(s, in);
    REQUIRE(std::abs(price - bs_call(100.0, in.K, in.r, in.tau, std::sqrt(theta))) < 1e-3);
}

TEST_CASE("zero-strike call equals spot") {
    ModelSpec s = sv_spec();
    s.premia.eta_v = 0.0;
    PricingInputs in = base_inputs();
    in.K = 1e-8 * 100.0;
    REQUIRE(std::abs(price_call(s, in) - 100.0) < 1e-6 * 100.0);
}

TEST_CASE("no-arbitrage bounds and monotonicity") {
    ModelSpec s = sv_spec();
    PricingInputs in = base_inputs();
    double prev = std::numeric_limits<double>::infinity();
    for (double k : {70.0, 85.0, 100.0, 115.0, 130.0}) {
        in.K = k;
        const double p = price_call(s, in);
        REQUIRE(p >= std::max(100.0 - k * std::exp(-in.r * in.tau), 0.0) - 1e-7);
        REQUIRE(p <= 100.0 + 1e-7);
        REQUIRE(p < prev);
        prev = p;
    }
    in.K = 100.0;
    prev = 0.0;
    for (double v : {0.01, 0.03, 0.06, 0.12}) {
        in.V0 = v;
        const double p = price_call(s, in);
        REQUIRE(p > prev);
        prev = p;
    }
}

TEST_CASE("Heston price matches the Monte-Carlo oracle") {
    ModelSpec s = sv_spec();
    s.premia = {0.0, 0.0};
    PricingInputs in = base_inputs();
    in.V0 = s.diffusion.theta;
    const double cf_price = price_call(s, in);
    const auto [mc, se] = mc_price_oracle(s, in, 200000, 10, 7);
    REQUIRE(std::abs(cf_price - mc) < 3.0 * se + 5e-3);
}

TEST_CASE("quadrature refinement stays within the reported error") {
    ModelSpec s = svcj_spec();
    PricingInputs in = base_inputs();
    QuadratureConfig quad;
    const PriceResult coarse = price_call_with_error(s, in, quad);
    quad.abs_tol *= 0.5;
    quad.u_max *= 2.0;
    const PriceResult fine = price_call_with_error(s, in, quad);
    REQUIRE(std::abs(coarse.price - fine.price) <= coarse.quad_error + 1e-12);
}

TEST_CASE("price_series equals a loop of price_call bit for bit") {
    ModelSpec s = svj_spec();
    const double tau = 30.0 / 252.0;
    std::vector<double> Y, V, r;
    for (int t = 0; t < 10; ++t) {
        Y.push_back(std::log(100.0) + 0.002 * t);
        V.push_back(0.02 + 0.003 * t);
        r.push_back(0.015 + 0.0002 * t);
    }
    const std::vector<double> series = price_series(s, Y, V, r, tau);
    for (int t = 0; t < 10; ++t) {
        PricingInputs in;
        in.Y0 = Y[t];
        in.V0 = V[t];
        in.r = r[t];
        in.tau = tau;
        in.K = atm_forward_strike(std::exp(Y[t]), r[t], tau);
        REQUIRE(series[t] == price_call(s, in));
    }
    // Constant inputs give constant outputs.
    const std::vector<double> cy(5, Y[0]), cv(5, V[0]), cr(5, r[0]);
    const std::vector<double> cs = price_series(s, cy, cv, cr, tau);
    for (double p : cs) REQUIRE(p == cs[0]);
}

TEST_CASE("PriceTable matches direct pricing at the ATM-forward strike") {
    for (const ModelSpec& s : {sv_spec(), svj_spec(), svcj_spec(), svvg_spec(), svls_spec()}) {
        const double tau = 30.0 / 252.0;
        const PriceTable table(s, tau, {0.01, 0.0347, 0.09});
        for (double v : {0.012, 0.0347, 0.08}) {
            for (double spot : {90.0, 140.0}) {
                for (double r : {0.0, 0.03}) {
                    PricingInputs in;
                    in.Y0 = std::log(spot);
                    in.V0 = v;
                    in.r = r;
                    in.tau = tau;
                    in.K = atm_forward_strike(spot, r, tau);
                    const double direct = price_call(s, in);
                    REQUIRE(std::abs(table.price(spot, v) - direct) < 1e-6 * spot);
                }
            }
        }
    }
}

TEST_CASE("MJD pricing uses the constant-volatility diffusion term") {
    ModelSpec s = mjd_spec();
    s.ajd.lambda = 0.0; // pure diffusion: must equal Black-Scholes
    PricingInputs in = base_inputs();
    const double price = price_call(s, in);
    REQUIRE(std::abs(price - bs_call(100.0, in.K, in.r, in.tau, s.sigma_mjd_q)) < 1e-6);
}

TEST_CASE("nonconvergent quadrature raises instead of returning garbage") {
    ModelSpec s = sv_spec();
    PricingInputs in = base_inputs();
    QuadratureConfig quad;
    quad.abs_tol = 1e-16;
    quad.max_panels = 10;
    REQUIRE_THROWS_AS(price_call(s, in, quad), std::runtime_error);
}
