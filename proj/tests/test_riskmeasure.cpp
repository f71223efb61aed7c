#include <catch2/catch_amalgamated.hpp>

#include "modelrisk/riskmeasure.hpp"
#include "modelrisk/rng.hpp"

#include <cmath>
#include <vector>

using namespace modelrisk;

TEST_CASE("es_of_samples exact discrete cases") {
    REQUIRE(es_of_samples({3.0, 3.0, 3.0, 3.0}, 0.5) == 3.0);
    REQUIRE(es_of_samples({-4.5, -4.5}, 0.25) == 4.5);

    // {-20,...,-1}, eta = 0.10: eta N = 2, ES = (20 + 19)/2.
    std::vector<double> x;
    for (int i = -20; i <= -1; ++i) x.push_back(i);
    REQUIRE(es_of_samples(x, 0.10) == Catch::Approx(19.5).margin(1e-14));

    // Fractional tail: N = 10, eta = 0.25 -> eta N = 2.5.
    std::vector<double> y{-10, -8, -6, -4, -2, 1, 2, 3, 4, 5};
    REQUIRE(es_of_samples(y, 0.25) ==
            Catch::Approx((10.0 + 8.0 + 0.5 * 6.0) / 2.5).margin(1e-14));

    REQUIRE_THROWS_AS(es_of_samples({}, 0.05), std::invalid_argument);
    REQUIRE_THROWS_AS(es_of_samples({1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("es_of_samples matches the analytic normal ES") {
    Rng rng(51);
    const int n = 100000;
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal();
    const double eta = 0.05;
    const double analytic = norm_pdf(inv_norm_cdf(eta)) / eta;
    REQUIRE(std::abs(es_of_samples(x, eta) - analytic) / analytic < 0.01);
}

TEST_CASE("es_of_samples is nonincreasing in eta") {
    Rng rng(52);
    std::vector<double> x(2000);
    for (auto& v : x) v = rng.normal() * 3.0 - 1.0;
    double prev = std::numeric_limits<double>::infinity();
    for (double eta : {0.01, 0.05, 0.1, 0.25, 0.5}) {
        const double es = es_of_samples(x, eta);
        REQUIRE(es <= prev + 1e-12);
        prev = es;
    }
}

TEST_CASE("adjusted posterior centering and mirroring") {
    const std::vector<double> draws{1.0, 2.0, 3.0};
    const auto lng = adjusted_posterior(draws, Position::Long);
    const auto sht = adjusted_posterior(draws, Position::Short);
    REQUIRE(lng == std::vector<double>{-1.0, 0.0, 1.0});
    for (std::size_t i = 0; i < lng.size(); ++i) REQUIRE(lng[i] == -sht[i]);
    REQUIRE(std::abs(mean_of(lng)) < 1e-12);
    REQUIRE(std::abs(mean_of(sht)) < 1e-12);
}

TEST_CASE("per_day symmetry, skew and the normal oracle") {
    const std::vector<double> sym{-2, -1, 0, 1, 2};
    const PerDay p = per_day(sym, 0.4);
    REQUIRE(p.per_long == p.per_short);

    const PerDay skew = per_day({0.0, 0.0, 0.0, 10.0}, 0.25);
    REQUIRE(skew.per_short > skew.per_long);

    Rng rng(53);
    const double sigma = 4.0, eta = 0.05;
    std::vector<double> x(100000);
    for (auto& v : x) v = 7.0 + sigma * rng.normal();
    const double analytic = sigma * norm_pdf(inv_norm_cdf(eta)) / eta;
    REQUIRE(std::abs(per_day(x, eta).per - analytic) / analytic < 0.01);
}

TEST_CASE("tmr_day hand enumeration and trivial cases") {
    const std::vector<double> draws{9.0, 10.0, 11.0};
    const TmrDay m = tmr_day(draws, 12.0, 1.0 / 3.0);
    REQUIRE(m.tmr_long == Catch::Approx(3.0).margin(1e-14));
    REQUIRE(m.tmr_short == Catch::Approx(1.0).margin(1e-14));
    REQUIRE(m.tmr == Catch::Approx(2.0).margin(1e-14));

    // C at the posterior mean: tmr equals per, so msr is zero.
    const TmrDay c = tmr_day(draws, 10.0, 1.0 / 3.0);
    const PerDay p = per_day(draws, 1.0 / 3.0);
    REQUIRE(msr_day(c.tmr, p.per) == Catch::Approx(0.0).margin(1e-14));

    // Degenerate draws equal to C.
    const TmrDay z = tmr_day({5.0, 5.0, 5.0}, 5.0, 0.4);
    REQUIRE(z.tmr == 0.0);
}

TEST_CASE("risk report identities hold to machine precision") {
    Rng rng(54);
    const int days = 100, n = 400;
    std::vector<std::vector<double>> draws(days);
    std::vector<double> market(days);
    for (int t = 0; t < days; ++t) {
        draws[t].resize(n);
        const double center = 20.0 + 5.0 * rng.normal();
        for (auto& v : draws[t]) v = center + 2.0 * rng.normal();
        market[t] = center + 4.0 * rng.normal();
    }
    const RiskReport rep = risk_series(draws, market, 0.05);
    REQUIRE(rep.days.size() == std::size_t(days));
    for (int t = 0; t < days; ++t) {
        const DayRisk& d = rep.days[t];
        REQUIRE(std::abs(d.per - 0.5 * (d.per_long + d.per_short)) < 1e-12);
        REQUIRE(std::abs(d.tmr - 0.5 * (d.tmr_long + d.tmr_short)) < 1e-12);
        REQUIRE(std::abs(d.msr - (d.tmr - d.per)) < 1e-12);
        REQUIRE(std::abs(d.tmr_long - (d.per_long + d.msr)) < 1e-12);
        REQUIRE(std::abs(d.tmr_short - (d.per_short + d.msr)) < 1e-12);
        // Day op equivalence.
        const PerDay p = per_day(draws[t], 0.05);
        const TmrDay m = tmr_day(draws[t], market[t], 0.05);
        REQUIRE(d.per == p.per);
        REQUIRE(d.tmr == m.tmr);
    }
}

TEST_CASE("translation and scaling behaviour") {
    Rng rng(55);
    std::vector<double> draws(500);
    for (auto& v : draws) v = 10.0 + 3.0 * rng.normal();
    const double c = 11.5, eta = 0.05;
    const PerDay p0 = per_day(draws, eta);
    const TmrDay m0 = tmr_day(draws, c, eta);

    std::vector<double> shifted = draws;
    for (auto& v : shifted) v += 100.0;
    const PerDay p1 = per_day(shifted, eta);
    const TmrDay m1 = tmr_day(shifted, c + 100.0, eta);
    REQUIRE(std::abs(p1.per - p0.per) < 1e-10);
    REQUIRE(std::abs(m1.tmr - m0.tmr) < 1e-10);

    std::vector<double> scaled = draws;
    for (auto& v : scaled) v *= 3.0;
    const PerDay p2 = per_day(scaled, eta);
    const TmrDay m2 = tmr_day(scaled, 3.0 * c, eta);
    REQUIRE(std::abs(p2.per - 3.0 * p0.per) < 1e-10);
    REQUIRE(std::abs(m2.tmr - 3.0 * m0.tmr) < 1e-10);
}

TEST_CASE("PER positivity and degeneracy") {
    REQUIRE(per_day({4.0, 4.0, 4.0, 4.0}, 0.25).per == 0.0);
    Rng rng(56);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> draws(50);
        for (auto& v : draws) v = rng.normal();
        REQUIRE(per_day(draws, 0.1).per > 0.0);
    }
}

TEST_CASE("median point estimator is available") {
    const std::vector<double> draws{1.0, 2.0, 100.0};
    REQUIRE(posterior_center(draws, PointEstimator::Median) == 2.0);
    const auto adj = adjusted_posterior(draws, Position::Long, PointEstimator::Median);
    REQUIRE(adj == std::vector<double>{-1.0, 0.0, 98.0});
}
