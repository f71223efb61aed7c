#include <catch2/catch_amalgamated.hpp>

#include "modelrisk/math_util.hpp"
#include "modelrisk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace modelrisk;

TEST_CASE("philox determinism and substreams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng c(42), d(43);
    int equal = 0;
    for (int i = 0; i < 100; ++i) equal += (c.next_u64() == d.next_u64());
    REQUIRE(equal == 0);

    Rng base(7);
    Rng s1 = base.substream(5);
    Rng s2 = base.substream(5);
    Rng s3 = base.substream(6);
    REQUIRE(s1.next_u64() == s2.next_u64());
    REQUIRE(s1.next_u64() != s3.next_u64());
}

TEST_CASE("uniform draws lie strictly inside (0,1) with correct mean") {
    Rng rng(1);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    const double se = 1.0 / std::sqrt(12.0 * n);
    REQUIRE(std::abs(sum / n - 0.5) < 3.0 * se);
}

TEST_CASE("normal sampler moments and tails") {
    Rng rng(2);
    const int n = 200000;
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal();
    REQUIRE(std::abs(mean_of(x)) < 3.0 / std::sqrt(double(n)));
    REQUIRE(std::abs(variance_of(x) - 1.0) < 3.0 * std::sqrt(2.0 / n));
    // KS against the standard normal.
    std::sort(x.begin(), x.end());
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = norm_cdf(x[i]);
        dmax = std::max(dmax, std::max(f - double(i) / n, double(i + 1) / n - f));
    }
    REQUIRE(kolmogorov_pvalue(dmax, n) > 0.01);
}

TEST_CASE("gamma sampler moments") {
    Rng rng(3);
    const int n = 100000;
    for (double shape : {0.4, 1.0, 2.5, 9.0}) {
        std::vector<double> x(n);
        for (auto& v : x) v = rng.gamma(shape, 2.0);
        const double mean = shape * 2.0, var = shape * 4.0;
        const double se_mean = std::sqrt(var / n);
        REQUIRE(std::abs(mean_of(x) - mean) < 4.0 * se_mean);
        REQUIRE(std::abs(variance_of(x) - var) / var < 0.1);
    }
}

TEST_CASE("inverse gamma in the (A,B) convention") {
    // Density ~ x^{-(A+2)/2} exp(-B/(2x)): standard shape A/2, rate B/2.
    Rng rng(4);
    const int n = 200000;
    const double A = 10.0, B = 20.0;
    std::vector<double> x(n);
    for (auto& v : x) v = rng.inv_gamma_ab(A, B);
    const double shape = A / 2.0, rate = B / 2.0;
    const double mean = rate / (shape - 1.0);
    const double var = rate * rate / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0));
    REQUIRE(std::abs(mean_of(x) - mean) < 4.0 * std::sqrt(var / n));
    REQUIRE(std::abs(variance_of(x) - var) / var < 0.1);
}

TEST_CASE("beta and student-t samplers") {
    Rng rng(5);
    const int n = 100000;
    std::vector<double> x(n);
    for (auto& v : x) v = rng.beta(2.0, 40.0);
    const double mean = 2.0 / 42.0;
    const double var = 2.0 * 40.0 / (42.0 * 42.0 * 43.0);
    REQUIRE(std::abs(mean_of(x) - mean) < 4.0 * std::sqrt(var / n));

    for (auto& v : x) v = rng.student_t(6.0);
    REQUIRE(std::abs(mean_of(x)) < 0.02);
    REQUIRE(std::abs(variance_of(x) - 1.5) < 0.1);
}

TEST_CASE("inv_norm_cdf inverts norm_cdf") {
    for (double p : {1e-10, 1e-4, 0.025, 0.3, 0.5, 0.7, 0.975, 1.0 - 1e-4}) {
        REQUIRE(std::abs(norm_cdf(inv_norm_cdf(p)) - p) < 1e-12);
    }
    REQUIRE_THROWS_AS(inv_norm_cdf(0.0), std::domain_error);
}
