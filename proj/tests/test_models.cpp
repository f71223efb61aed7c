#include <catch2/catch_amalgamated.hpp>

#include "modelrisk/models.hpp"
#include "modelrisk/rng.hpp"
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

TEST_CASE("jump CF component vanishes at u = 0 for every kind") {
    for (const ModelSpec& s :
         {sv_spec(), svj_spec(), svcj_spec(), svvg_spec(), svls_spec(), mjd_spec()}) {
        const Complex v = jump_cf_component(s, Complex(0.0, 0.0));
        REQUIRE(std::abs(v) < 1e-14);
    }
}

TEST_CASE("degenerate jump laws give zero component") {
    ModelSpec s = svj_spec();
    s.ajd.mu_j_q = 0.0;
    s.ajd.sigma_j = 0.0;
    REQUIRE(std::abs(jump_cf_component(s, Complex(1.7, 0.0))) < 1e-14);
    s = svj_spec();
    s.ajd.lambda = 0.0;
    REQUIRE(std::abs(jump_cf_component(s, Complex(1.7, 0.0))) < 1e-14);
}

TEST_CASE("SVVG component matches a Monte-Carlo characteristic function") {
    ModelSpec s = svvg_spec();
    const double nu = s.vg.nu, gq = s.vg.gamma_q, sq = s.vg.sigma_q;
    const double t = 1.0 / 252.0, u = 1.0;
    const Complex target = std::exp(-t * jump_cf_component(s, Complex(u, 0.0)));

    Rng rng(101);
    const int n = 1000000;
    double sum_re = 0.0, sum_im = 0.0, ss_re = 0.0, ss_im = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gamma(t / nu, nu);
        const double x = gq * g + sq * std::sqrt(g) * rng.normal();
        const double re = std::cos(u * x), im = std::sin(u * x);
        sum_re += re;
        sum_im += im;
        ss_re += re * re;
        ss_im += im * im;
    }
    const double m_re = sum_re / n, m_im = sum_im / n;
    const double se_re = std::sqrt((ss_re / n - m_re * m_re) / n);
    const double se_im = std::sqrt((ss_im / n - m_im * m_im) / n);
    REQUIRE(std::abs(m_re - target.real()) < 3.0 * se_re + 1e-9);
    REQUIRE(std::abs(m_im - target.imag()) < 3.0 * se_im + 1e-9);
}

TEST_CASE("drift compensator closed forms") {
    REQUIRE(drift_compensator(sv_spec()) == 0.0);

    ModelSpec j = svj_spec();
    const double expect =
        j.ajd.lambda * (1.0 - std::exp(j.ajd.mu_j_q + 0.5 * j.ajd.sigma_j * j.ajd.sigma_j));
    REQUIRE(drift_compensator(j) == Catch::Approx(expect).epsilon(1e-14));

    ModelSpec c = svcj_spec();
    c.ajd.mu_v = 0.0;
    REQUIRE(drift_compensator(c) == drift_compensator(j));

    // Finite-moment log-stable: sigma^alpha * sec(pi alpha / 2), negative for
    // alpha in (1,2).
    ModelSpec ls = svls_spec();
    const double comp = drift_compensator(ls);
    const double expect_ls =
        std::pow(ls.ls.sigma, ls.ls.alpha) / std::cos(0.5 * M_PI * ls.ls.alpha);
    REQUIRE(comp == Catch::Approx(expect_ls).epsilon(1e-10));
    REQUIRE(comp < 0.0);
}

TEST_CASE("SVCJ with zero variance jumps nests SVJ bit-for-bit") {
    ModelSpec c = svcj_spec();
    c.ajd.mu_v = 0.0;
    c.ajd.rho_j = 0.0;
    ModelSpec j = svj_spec();
    for (double u : {0.3, 1.0, 2.5, 17.0}) {
        const Complex uu(u, -1.0);
        REQUIRE(jump_cf_component(c, uu) == jump_cf_component(j, uu));
    }
}

TEST_CASE("Hermitian symmetry on the real axis") {
    for (const ModelSpec& s : {svj_spec(), svcj_spec(), svvg_spec(), mjd_spec()}) {
        for (double u : {0.5, 2.0, 11.0}) {
            const Complex a = std::conj(jump_cf_component(s, Complex(u, 0.0)));
            const Complex b = jump_cf_component(s, Complex(-u, 0.0));
            REQUIRE(std::abs(a - b) < 1e-13 * (1.0 + std::abs(a)));
        }
    }
}

TEST_CASE("validate_spec flags violations by name") {
    REQUIRE(validate_spec(sv_spec()).empty());

    ModelSpec bad = sv_spec();
    bad.diffusion.rho = 1.5;
    auto v = validate_spec(bad);
    REQUIRE(v.size() == 1);
    REQUIRE(v[0].find("rho") != std::string::npos);

    ModelSpec badq = svcj_spec();
    badq.premia.eta_v = badq.diffusion.kappa + 1.0;
    v = validate_spec(badq);
    REQUIRE(v.size() == 1);
    REQUIRE(v[0].find("eta_v") != std::string::npos);
}

TEST_CASE("prior defaults") {
    const PriorSet p = PriorSet::defaults();
    REQUIRE(p.at("sigma_v2").family == PriorFamily::InvGammaAB);
    REQUIRE(p.at("sigma_v2").a == 2.5);
    REQUIRE(p.at("sigma_v2").b == 0.1);
    REQUIRE(p.at("lambda").family == PriorFamily::Beta);
    REQUIRE(p.at("lambda").a == 2.0);
    REQUIRE(p.at("lambda").b == 40.0);
    REQUIRE(p.at("alpha").family == PriorFamily::Uniform);
    REQUIRE(p.at("alpha").a == 1.0);
    REQUIRE(p.at("alpha").b == 2.0);
    REQUIRE(p.at("kappa").family == PriorFamily::TruncNormalPos);
    REQUIRE_THROWS_AS(p.at("bogus"), std::invalid_argument);
}

TEST_CASE("model spec config round trip") {
    for (const ModelSpec& s :
         {sv_spec(), svj_spec(), svcj_spec(), svvg_spec(), svls_spec(), mjd_spec()}) {
        const std::string text = model_spec_to_config(s);
        const ModelSpec back = model_spec_from_config(parse_config(text));
        REQUIRE(model_spec_to_config(back) == text);
        REQUIRE(back.kind == s.kind);
        REQUIRE(back.diffusion.kappa == s.diffusion.kappa);
        REQUIRE(back.perr.sigma_c == s.perr.sigma_c);
    }
}

TEST_CASE("config rejects unknown and malformed keys") {
    std::string text = model_spec_to_config(sv_spec());
    REQUIRE_THROWS_AS(model_spec_from_config(parse_config(text + "jumps.lambda = 1\n")),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(model_spec_from_config(parse_config(text + "nonsense.key = 1\n")),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(parse_config("just a line without equals\n"), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_config("a.b = 1\na.b = 2\n"), std::invalid_argument);
    // Comments and blank lines are fine.
    const ConfigMap cfg = parse_config("# header\n\nmodel.kind = SV # inline\n");
    REQUIRE(cfg.at("model.kind") == "SV");
}

TEST_CASE("prior config round trip and errors") {
    PriorSet p = PriorSet::defaults();
    p.priors["kappa"] = Prior{PriorFamily::Normal, 1.0, 9.0};
    const std::string text = prior_set_to_config(p);
    const PriorSet back = prior_set_from_config(parse_config(text));
    REQUIRE(prior_set_to_config(back) == text);
    REQUIRE(back.at("kappa").family == PriorFamily::Normal);
    REQUIRE(back.at("kappa").b == 9.0);

    REQUIRE_THROWS_AS(prior_set_from_config(parse_config("prior.bogus = normal(0,1)\n")),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(prior_set_from_config(parse_config("prior.kappa = cauchy(0,1)\n")),
                      std::invalid_argument);
}

TEST_CASE("VG branch-cut domain error") {
    ModelSpec s = svvg_spec();
    // On the imaginary axis u = -iw the argument is 1 - w*gamma_q*nu - w^2 sigma_q^2 nu / 2,
    // which turns negative for large w.
    REQUIRE_THROWS_AS(jump_cf_component(s, Complex(0.0, -40.0)), std::domain_error);
}
