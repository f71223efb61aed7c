// Model comparison and regression analysis: DIC, log Bayes factors via the
// stabilized harmonic mean, KS and bootstrap residual normality tests,
// Diebold-Mariano and Clark-West forecast comparisons, OLS with robust
// standard errors, forecasting features, and PELT change-point detection.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "modelrisk/math_util.hpp"
#include "modelrisk/models.hpp"
#include "modelrisk/rng.hpp"

namespace modelrisk {

// ---------------------------------------------------------------------------
// Information criteria and evidence
// ---------------------------------------------------------------------------

struct DicResult {
    double dic, d_bar, p_d;
};

inline DicResult dic_detail(const std::vector<double>& loglik_draws,
                            double loglik_at_posterior_mean) {
    if (loglik_draws.empty()) throw std::invalid_argument("dic: empty draws");
    double d_bar = 0.0;
    for (double ll : loglik_draws) d_bar += -2.0 * ll;
    d_bar /= static_cast<double>(loglik_draws.size());
    const double p_d = d_bar - (-2.0 * loglik_at_posterior_mean);
    return {d_bar + p_d, d_bar, p_d};
}

inline double dic(const std::vector<double>& loglik_draws, double loglik_at_posterior_mean) {
    return dic_detail(loglik_draws, loglik_at_posterior_mean).dic;
}

struct LogMarginal {
    double value;
    double jackknife_spread;
};

/// Stabilized harmonic-mean estimate of the log marginal likelihood with a
/// leave-one-out spread as an instability diagnostic.
inline LogMarginal log_marginal_likelihood(const std::vector<double>& loglik_draws) {
    const std::size_t n = loglik_draws.size();
    if (n < 2) throw std::invalid_argument("log_marginal_likelihood: need at least 2 draws");
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = -loglik_draws[i];
    const double log_s = logsumexp(w);
    const double value = std::log(static_cast<double>(n)) - log_s;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = std::exp(w[i] - log_s);
        const double log_s_i = log_s + std::log1p(-std::min(frac, 1.0 - 1e-15));
        const double v = std::log(static_cast<double>(n - 1)) - log_s_i;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {value, hi - lo};
}

struct LogBayesFactor {
    double value;
    bool unstable; // jackknife spread above 1.0 for either model
};

inline LogBayesFactor log_bayes_factor_detail(const std::vector<double>& loglik_m1,
                                              const std::vector<double>& loglik_m2) {
    const LogMarginal a = log_marginal_likelihood(loglik_m1);
    const LogMarginal b = log_marginal_likelihood(loglik_m2);
    return {a.value - b.value, a.jackknife_spread > 1.0 || b.jackknife_spread > 1.0};
}

inline double log_bayes_factor(const std::vector<double>& loglik_m1,
                               const std::vector<double>& loglik_m2) {
    return log_bayes_factor_detail(loglik_m1, loglik_m2).value;
}

// ---------------------------------------------------------------------------
// Residual normality tests
// ---------------------------------------------------------------------------

struct TestResult {
    double statistic;
    double pvalue;
};

/// One-sample Kolmogorov-Smirnov test against the standard normal.
inline TestResult ks_test(std::vector<double> residuals) {
    const std::size_t n = residuals.size();
    if (n < 20) throw std::invalid_argument("ks_test: need at least 20 observations");
    std::sort(residuals.begin(), residuals.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = norm_cdf(residuals[i]);
        d = std::max(d, std::max(f - double(i) / n, double(i + 1) / n - f));
    }
    return {d, kolmogorov_pvalue(d, n)};
}

/// Parametric-bootstrap p-value for the KS statistic: the null distribution
/// is simulated by resampling standard-normal sets of the same size.
inline double abadie_pvalue(const std::vector<double>& residuals, int n_boot,
                            std::uint64_t seed) {
    const std::size_t n = residuals.size();
    if (n < 20) throw std::invalid_argument("abadie_pvalue: need at least 20 observations");
    if (n_boot < 500) throw std::invalid_argument("abadie_pvalue: need at least 500 resamples");
    const double observed = ks_test(residuals).statistic;
    Rng root(seed);
    int exceed = 0;
    std::vector<double> sample(n);
    for (int b = 0; b < n_boot; ++b) {
        Rng rng = root.substream(b);
        for (auto& x : sample) x = rng.normal();
        if (ks_test(sample).statistic >= observed) ++exceed;
    }
    return static_cast<double>(exceed) / n_boot;
}

// ---------------------------------------------------------------------------
// Forecast-comparison tests
// ---------------------------------------------------------------------------

namespace detail {

/// Newey-West long-run variance of a series with Bartlett weights.
inline double newey_west_lrv(const std::vector<double>& x, int lag) {
    const std::size_t n = x.size();
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    s /= n;
    for (int j = 1; j <= lag; ++j) {
        double g = 0.0;
        for (std::size_t t = j; t < n; ++t) g += (x[t] - m) * (x[t - j] - m);
        g /= n;
        s += 2.0 * (1.0 - double(j) / (lag + 1)) * g;
    }
    return s;
}

} // namespace detail

/// Diebold-Mariano test on the loss differential, two-sided normal p-value,
/// Newey-West variance with lag floor(T^{1/3}).
inline TestResult dm_test(const std::vector<double>& loss1, const std::vector<double>& loss2) {
    if (loss1.size() != loss2.size() || loss1.size() < 30)
        throw std::invalid_argument("dm_test: need equal lengths >= 30");
    const std::size_t n = loss1.size();
    std::vector<double> d(n);
    for (std::size_t t = 0; t < n; ++t) d[t] = loss1[t] - loss2[t];
    const double lag = std::floor(std::cbrt(double(n)));
    const double lrv = detail::newey_west_lrv(d, static_cast<int>(lag));
    double scale = 0.0;
    for (double v : d) scale += v * v;
    if (lrv <= 1e-14 * std::max(1.0, scale / n))
        throw std::domain_error("dm_test: zero-variance loss differential");
    const double stat = mean_of(d) / std::sqrt(lrv / n);
    return {stat, 2.0 * norm_cdf(-std::abs(stat))};
}

/// Clark-West test for nested models; adj_term is the per-observation
/// squared difference of fitted values. One-sided p-value for the
/// alternative that the large model improves on the small one.
inline TestResult cw_test(const std::vector<double>& loss_small,
                          const std::vector<double>& loss_large,
                          const std::vector<double>& adj_term) {
    if (loss_small.size() != loss_large.size() || loss_small.size() != adj_term.size() ||
        loss_small.size() < 30)
        throw std::invalid_argument("cw_test: need equal lengths >= 30");
    const std::size_t n = loss_small.size();
    std::vector<double> f(n);
    double scale = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        f[t] = loss_small[t] - loss_large[t] + adj_term[t];
        scale += f[t] * f[t];
    }
    if (scale / n < 1e-28) return {0.0, 0.5}; // models identical: adjustment cancels exactly
    const double lag = std::floor(std::cbrt(double(n)));
    const double lrv = detail::newey_west_lrv(f, static_cast<int>(lag));
    if (lrv <= 1e-14 * std::max(1.0, scale / n))
        throw std::domain_error("cw_test: zero-variance adjusted differential");
    const double stat = mean_of(f) / std::sqrt(lrv / n);
    return {stat, norm_cdf(-stat)};
}

// ---------------------------------------------------------------------------
// OLS with heteroskedasticity-robust standard errors
// ---------------------------------------------------------------------------

enum class SeMode { White, Classic };

struct RegressionResult {
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> pvalues;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    std::vector<double> residuals;
};

inline RegressionResult ols(const std::vector<double>& y,
                            const std::vector<std::vector<double>>& x_rows,
                            SeMode se_mode = SeMode::White) {
    const std::size_t n = y.size();
    if (n == 0 || x_rows.size() != n) throw std::invalid_argument("ols: size mismatch");
    const std::size_t k = x_rows.front().size();
    if (n <= k) throw std::invalid_argument("ols: more regressors than observations");
    Eigen::MatrixXd x(n, k);
    Eigen::VectorXd yy(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (x_rows[i].size() != k) throw std::invalid_argument("ols: ragged design matrix");
        for (std::size_t j = 0; j < k; ++j) x(i, j) = x_rows[i][j];
        yy(i) = y[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(k))
        throw std::domain_error("ols: rank-deficient design matrix");
    const Eigen::VectorXd beta = qr.solve(yy);
    const Eigen::VectorXd e = yy - x * beta;
    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
    Eigen::MatrixXd cov;
    if (se_mode == SeMode::White) {
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
        for (std::size_t i = 0; i < n; ++i)
            meat += e(i) * e(i) * x.row(i).transpose() * x.row(i);
        cov = xtx_inv * meat * xtx_inv;
    } else {
        cov = xtx_inv * (e.squaredNorm() / double(n - k));
    }
    RegressionResult out;
    const double ybar = yy.mean();
    const double tss = (yy.array() - ybar).matrix().squaredNorm();
    const double rss = e.squaredNorm();
    out.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
    out.adj_r2 = 1.0 - (1.0 - out.r2) * double(n - 1) / double(n - k);
    for (std::size_t j = 0; j < k; ++j) {
        out.coefficients.push_back(beta(j));
        const double se = std::sqrt(std::max(0.0, cov(j, j)));
        out.std_errors.push_back(se);
        out.pvalues.push_back(se > 0.0 ? 2.0 * norm_cdf(-std::abs(beta(j) / se)) : 0.0);
    }
    out.residuals.assign(e.data(), e.data() + n);
    return out;
}

// ---------------------------------------------------------------------------
// Forecasting-regression features: IV, C_PV, DDelta, Gamma, Theta/100, H_L,
// DSPXV, C_PP, evaluated one day ahead of the target. Row i holds the
// features of day i+1 and is meant to predict the response at day i+2.
// ---------------------------------------------------------------------------

struct FeatureMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;
};

inline FeatureMatrix
build_forecast_features(const std::map<std::string, std::vector<double>>& columns) {
    const auto col = [&](const std::string& name) -> const std::vector<double>& {
        auto it = columns.find(name);
        if (it == columns.end())
            throw std::invalid_argument("build_forecast_features: missing column " + name);
        return it->second;
    };
    const auto& iv = col("iv");
    const auto& cvol = col("call_volume");
    const auto& pvol = col("put_volume");
    const auto& delta = col("delta");
    const auto& gamma = col("gamma");
    const auto& theta = col("theta");
    const auto& high = col("high");
    const auto& low = col("low");
    const auto& spxv = col("spxv");
    const auto& cp = col("call_price");
    const auto& pp = col("put_price");
    const std::size_t n = iv.size();
    for (const auto& [name, c] : columns)
        if (c.size() != n)
            throw std::invalid_argument("build_forecast_features: column " + name +
                                        " length mismatch");
    if (n < 2) throw std::invalid_argument("build_forecast_features: need at least 2 rows");
    FeatureMatrix out;
    out.names = {"const", "IV", "C_PV", "DDelta", "Gamma", "Theta", "H_L", "DSPXV", "C_PP"};
    for (std::size_t t = 1; t < n; ++t) {
        out.rows.push_back({1.0,
                            iv[t],
                            (cvol[t] - pvol[t]) / 1e5,
                            delta[t] - delta[t - 1],
                            gamma[t],
                            theta[t] / 100.0,
                            high[t] - low[t],
                            (spxv[t] - spxv[t - 1]) / 1e8,
                            cp[t] - pp[t]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// PELT change-point detection, Gaussian mean-shift cost
// ---------------------------------------------------------------------------

struct Segmentation {
    std::vector<std::size_t> change_points; // first index of each new segment
    std::vector<double> segment_means;
    std::vector<double> segment_stds;
    double penalty = 0.0;
};

/// Exact penalized optimal partitioning via PELT. Cost of a segment is its
/// residual sum of squares around the segment mean; default penalty is
/// 2 * var(series) * log n.
inline Segmentation detect_change_points(const std::vector<double>& series,
                                         double penalty = -1.0) {
    const std::size_t n = series.size();
    if (n < 10) throw std::invalid_argument("detect_change_points: need at least 10 points");
    if (penalty < 0.0)
        penalty = 2.0 * variance_of(series) * std::log(static_cast<double>(n));
    std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s1[i + 1] = s1[i] + series[i];
        s2[i + 1] = s2[i] + series[i] * series[i];
    }
    const auto cost = [&](std::size_t a, std::size_t b) { // segment (a, b] 0-based half-open
        const double len = static_cast<double>(b - a);
        const double sum = s1[b] - s1[a];
        return s2[b] - s2[a] - sum * sum / len;
    };
    std::vector<double> f(n + 1, 0.0);
    f[0] = -penalty;
    std::vector<std::size_t> prev(n + 1, 0);
    std::vector<std::size_t> candidates{0};
    for (std::size_t t = 1; t <= n; ++t) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_tau = 0;
        for (std::size_t tau : candidates) {
            const double v = f[tau] + cost(tau, t) + penalty;
            if (v < best) {
                best = v;
                best_tau = tau;
            }
        }
        f[t] = best;
        prev[t] = best_tau;
        std::vector<std::size_t> kept;
        for (std::size_t tau : candidates)
            if (f[tau] + cost(tau, t) <= f[t]) kept.push_back(tau);
        kept.push_back(t);
        candidates = std::move(kept);
    }
    std::vector<std::size_t> breaks;
    for (std::size_t t = n; t > 0; t = prev[t]) breaks.push_back(prev[t]);
    std::reverse(breaks.begin(), breaks.end()); // segment starts, first is 0
    Segmentation seg;
    seg.penalty = penalty;
    for (std::size_t i = 0; i < breaks.size(); ++i) {
        const std::size_t a = breaks[i];
        const std::size_t b = i + 1 < breaks.size() ? breaks[i + 1] : n;
        if (a != 0) seg.change_points.push_back(a);
        std::vector<double> piece(series.begin() + a, series.begin() + b);
        seg.segment_means.push_back(mean_of(piece));
        seg.segment_stds.push_back(piece.size() > 1 ? std::sqrt(variance_of(piece)) : 0.0);
    }
    return seg;
}

// ---------------------------------------------------------------------------
// Standardized residuals from posterior means
// ---------------------------------------------------------------------------

struct ResidualSeries {
    std::vector<double> return_residuals;
    std::vector<double> vol_residuals; // empty for MJD
};

/// Standardized one-step residuals of the discretized dynamics, evaluated at
/// posterior-mean parameters and latent paths.
inline ResidualSeries compute_residuals(const ModelSpec& spec, const std::vector<double>& Y,
                                        const std::vector<double>& r,
                                        const std::vector<double>& V,
                                        const std::vector<double>& JY,
                                        const std::vector<double>& JV) {
    const std::size_t T = JY.size();
    if (Y.size() != T + 1 || V.size() != T + 1 || r.size() < T || JV.size() != T)
        throw std::invalid_argument("compute_residuals: length mismatch");
    const double comp = drift_compensator(spec);
    ResidualSeries out;
    const bool mjd = spec.kind == ModelKind::MJD;
    for (std::size_t t = 0; t < T; ++t) {
        const double v = std::max(V[t], 1e-12);
        const double drift =
            (r[t] - 0.5 * v + comp + spec.premia.eta_s * v) * kDailyDt;
        out.return_residuals.push_back(
            (Y[t + 1] - Y[t] - drift - JY[t]) / std::sqrt(v * kDailyDt));
        if (!mjd) {
            const double vdrift = spec.diffusion.kappa * (spec.diffusion.theta - v) * kDailyDt;
            out.vol_residuals.push_back(
                (V[t + 1] - V[t] - vdrift - JV[t]) /
                (spec.diffusion.sigma_v * std::sqrt(v * kDailyDt)));
        }
    }
    return out;
}

} // namespace modelrisk
