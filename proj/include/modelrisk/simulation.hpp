// Euler-discretized path simulation under the physical and risk-neutral
// measures, synthetic option-price generation, and exact samplers for the
// jump building blocks (alpha-stable, generalized inverse Gaussian).
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "modelrisk/math_util.hpp"
#include "modelrisk/models.hpp"
#include "modelrisk/pricing.hpp"
#include "modelrisk/rng.hpp"

namespace modelrisk {

enum class Measure { P, Q };

struct PathConfig {
    int n_days = 252;
    int substeps = 1;
    std::uint64_t seed = 0;
    Measure measure = Measure::P;
    double y0 = std::log(1400.0);
    double v0 = -1.0; // <= 0 means start at theta
    bool with_options = false;
    double option_tau = 30.0 / 252.0;
};

struct SimulatedDataset {
    std::vector<double> Y; // n_days + 1
    std::vector<double> V; // n_days + 1 (constant (sigma_mjd^Q)^2 for MJD)
    std::vector<double> JY, JV; // per-day jump increments, n_days
    std::vector<int> N;         // AJD jump flags, n_days
    std::vector<double> G;      // VG time changes, n_days
    std::vector<double> U;      // LS auxiliaries (CMS angles), n_days
    std::vector<double> r;      // n_days + 1
    std::vector<double> F;      // model prices (with_options only)
    std::vector<double> C;      // market prices = F + AR(1) error
    int truncation_count = 0;   // substeps where V was floored at 0
};

// ---------------------------------------------------------------------------
// Alpha-stable sampling (Chambers-Mallows-Stuck), S1 parameterization:
// E[e^{iuX}] = exp(-|u|^alpha (1 - i beta sign(u) tan(pi alpha/2))) for the
// standard variate; alpha in (1, 2].
// ---------------------------------------------------------------------------

inline double stable_standard(double alpha, double beta, Rng& rng) {
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::invalid_argument("stable_standard: alpha must lie in (1, 2]");
    const double u = M_PI * (rng.uniform() - 0.5);
    const double w = rng.exponential();
    const double tn = std::tan(0.5 * M_PI * alpha);
    const double b = std::atan(beta * tn) / alpha;
    const double s = std::pow(1.0 + beta * beta * tn * tn, 0.5 / alpha);
    return s * std::sin(alpha * (u + b)) / std::pow(std::cos(u), 1.0 / alpha) *
           std::pow(std::cos(u - alpha * (u + b)) / w, (1.0 - alpha) / alpha);
}

/// One alpha-stable increment over dt with scale sigma: sigma dt^{1/alpha}
/// times a standard variate (symmetric by default).
inline double sample_stable(double alpha, double sigma, double dt, std::uint64_t seed,
                            double beta = 0.0) {
    Rng rng(seed);
    return sigma * std::pow(dt, 1.0 / alpha) * stable_standard(alpha, beta, rng);
}

// ---------------------------------------------------------------------------
// Generalized inverse Gaussian: density ~ x^{p-1} exp(-(a x + b/x)/2).
// The density of t = log x is strictly log-concave, so a box-plus-
// exponential-tails envelope built from the mode and the 1/e points gives a
// universal rejection sampler.
// ---------------------------------------------------------------------------

inline double sample_gig(double p, double a, double b, Rng& rng) {
    if (!(a > 0.0) || b < 0.0)
        throw std::invalid_argument("sample_gig: need a > 0 and b >= 0");
    if (b == 0.0) {
        if (!(p > 0.0)) throw std::invalid_argument("sample_gig: b = 0 requires p > 0");
        return rng.gamma(p, 2.0 / a);
    }
    // log-density of t = log x, shifted so the mode value is 0. The mode
    // solves a x^2 - 2 p x - b = 0; the conjugate form avoids the
    // catastrophic cancellation of p + sqrt(p^2 + ab) when p < 0 and ab is
    // many orders of magnitude below p^2.
    const double disc = std::sqrt(p * p + a * b);
    const double x_mode = p > 0.0 ? (p + disc) / a : b / (disc - p);
    const double t_mode = std::log(x_mode);
    // Evaluate a e^t and b e^{-t} fully in log space: b can be denormal
    // (log b near -744), where direct products lose precision or overflow
    // through the e^{-t} factor.
    const double la = std::log(a), lb = std::log(b);
    const double peak = p * t_mode - 0.5 * (std::exp(la + t_mode) + std::exp(lb - t_mode));
    const auto logf = [&](double t) {
        return p * t - 0.5 * (std::exp(la + t) + std::exp(lb - t)) - peak;
    };
    // Bisection for the 1/e points on each side of the mode.
    const auto solve = [&](double dir) {
        double step = 1.0;
        while (logf(t_mode + dir * step) > -1.0) step *= 2.0;
        double lo = step * 0.5 < 1.0 ? 0.0 : step * 0.5, hi = step;
        for (int i = 0; i < 60; ++i) {
            const double mid = 0.5 * (lo + hi);
            (logf(t_mode + dir * mid) > -1.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    const double wl = solve(-1.0), wr = solve(1.0);
    // Envelope: height 1 on [t_mode - wl, t_mode + wr], exponential tails with
    // rates 1/wl and 1/wr (valid by log-concavity through the chord bound).
    const double area_box = wl + wr;
    const double area_tail_l = wl / M_E, area_tail_r = wr / M_E;
    const double total = area_box + area_tail_l + area_tail_r;
    for (;;) {
        const double pick = rng.uniform() * total;
        double t, log_env;
        if (pick < area_box) {
            t = t_mode - wl + rng.uniform() * (wl + wr);
            log_env = 0.0;
        } else if (pick < area_box + area_tail_l) {
            const double e = rng.exponential();
            t = t_mode - wl * (1.0 + e);
            log_env = -1.0 - e;
        } else {
            const double e = rng.exponential();
            t = t_mode + wr * (1.0 + e);
            log_env = -1.0 - e;
        }
        if (std::log(rng.uniform()) < logf(t) - log_env) return std::exp(t);
    }
}

inline double sample_gig(double p, double a, double b, std::uint64_t seed) {
    Rng rng(seed);
    return sample_gig(p, a, b, rng);
}

// ---------------------------------------------------------------------------
// Path simulation
// ---------------------------------------------------------------------------

namespace detail {

/// One day's jump draw (J^Y, J^V, flag/aux) for the given spec and measure.
struct DayJump {
    double jy = 0.0, jv = 0.0;
    int n = 0;
    double g = 0.0, u = 0.0;
};

inline DayJump draw_day_jump(const ModelSpec& spec, Measure m, Rng& rng) {
    DayJump out;
    switch (spec.kind) {
    case ModelKind::SV:
        break;
    case ModelKind::MJD:
    case ModelKind::SVJ:
    case ModelKind::SVCJ: {
        const AJDJumpParams& j = spec.ajd;
        out.n = rng.bernoulli(std::min(1.0, j.lambda * kDailyDt)) ? 1 : 0;
        if (out.n) {
            // No draw when mu_v = 0 so the SVCJ stream nests SVJ exactly.
            if (spec.kind == ModelKind::SVCJ && j.mu_v != 0.0)
                out.jv = rng.exponential() * j.mu_v;
            const double mu = (m == Measure::P ? j.mu_j_p : j.mu_j_q) + j.rho_j * out.jv;
            out.jy = mu + j.sigma_j * rng.normal();
        }
        break;
    }
    case ModelKind::SVVG: {
        const VGJumpParams& j = spec.vg;
        out.g = rng.gamma(kDailyDt / j.nu, j.nu);
        const double gamma = m == Measure::P ? j.gamma_p : j.gamma_q;
        const double sigma = m == Measure::P ? j.sigma_p : j.sigma_q;
        out.jy = gamma * out.g + sigma * std::sqrt(out.g) * rng.normal();
        break;
    }
    case ModelKind::SVLS: {
        const LSJumpParams& j = spec.ls;
        out.u = M_PI * (rng.uniform() - 0.5);
        const double w = rng.exponential();
        const double tn = std::tan(0.5 * M_PI * j.alpha);
        const double beta = LSJumpParams::beta_fixed;
        const double bb = std::atan(beta * tn) / j.alpha;
        const double s = std::pow(1.0 + beta * beta * tn * tn, 0.5 / j.alpha);
        const double z = s * std::sin(j.alpha * (out.u + bb)) /
                         std::pow(std::cos(out.u), 1.0 / j.alpha) *
                         std::pow(std::cos(out.u - j.alpha * (out.u + bb)) / w,
                                  (1.0 - j.alpha) / j.alpha);
        out.jy = j.sigma * std::pow(kDailyDt, 1.0 / j.alpha) * z;
        break;
    }
    }
    return out;
}

} // namespace detail

inline SimulatedDataset simulate(const ModelSpec& spec, const PathConfig& cfg,
                                 const std::vector<double>& rates) {
    {
        const auto violations = validate_spec(spec);
        if (!violations.empty())
            throw std::invalid_argument("simulate: invalid spec: " + violations.front());
    }
    if (cfg.n_days < 1 || cfg.substeps < 1)
        throw std::invalid_argument("simulate: need n_days >= 1 and substeps >= 1");
    if (rates.size() != 1 && rates.size() != static_cast<std::size_t>(cfg.n_days) + 1)
        throw std::invalid_argument("simulate: rate path must have length 1 or n_days+1");

    const int T = cfg.n_days;
    const bool mjd = spec.kind == ModelKind::MJD;
    const double comp = drift_compensator(spec);
    const double h = kDailyDt / cfg.substeps;
    SimulatedDataset ds;
    ds.Y.assign(T + 1, 0.0);
    ds.V.assign(T + 1, 0.0);
    ds.JY.assign(T, 0.0);
    ds.JV.assign(T, 0.0);
    ds.N.assign(T, 0);
    ds.G.assign(T, 0.0);
    ds.U.assign(T, 0.0);
    ds.r.assign(T + 1, 0.0);
    for (int t = 0; t <= T; ++t) ds.r[t] = rates.size() == 1 ? rates[0] : rates[t];

    ds.Y[0] = cfg.y0;
    ds.V[0] = mjd ? spec.sigma_mjd_q * spec.sigma_mjd_q
                  : (cfg.v0 > 0.0 ? cfg.v0 : spec.diffusion.theta);

    Rng root(cfg.seed);
    Rng diff_rng = root.substream(1);
    Rng jump_rng = root.substream(2);
    Rng err_rng = root.substream(3);

    const DiffusionParams& d = spec.diffusion;
    const double kq = mjd ? 0.0 : spec.kappa_q();
    const double ktheta = mjd ? 0.0 : d.kappa * d.theta;
    const double rho_c1 = std::sqrt(1.0 - d.rho * d.rho);

    for (int t = 0; t < T; ++t) {
        double y = ds.Y[t], v = ds.V[t];
        const double rt = ds.r[t];
        for (int s = 0; s < cfg.substeps; ++s) {
            const double vp = std::max(v, 0.0);
            if (v < 0.0) ++ds.truncation_count;
            const double z1 = diff_rng.normal();
            double drift = rt - 0.5 * vp + comp;
            if (cfg.measure == Measure::P) drift += spec.premia.eta_s * vp;
            y += drift * h + std::sqrt(vp * h) * z1;
            if (!mjd) {
                const double z2 = d.rho * z1 + rho_c1 * diff_rng.normal();
                const double vdrift = cfg.measure == Measure::P ? d.kappa * (d.theta - vp)
                                                                : ktheta - kq * vp;
                v += vdrift * h + d.sigma_v * std::sqrt(vp * h) * z2;
            }
        }
        const detail::DayJump j = detail::draw_day_jump(spec, cfg.measure, jump_rng);
        ds.JY[t] = j.jy;
        ds.JV[t] = j.jv;
        ds.N[t] = j.n;
        ds.G[t] = j.g;
        ds.U[t] = j.u;
        ds.Y[t + 1] = y + j.jy;
        if (!mjd && v < 0.0) {
            ++ds.truncation_count;
            v = 0.0;
        }
        ds.V[t + 1] = mjd ? ds.V[0] : v + j.jv;
    }

    if (cfg.with_options) {
        ds.F.assign(T + 1, 0.0);
        ds.C.assign(T + 1, 0.0);
        // Shared deterministic price table across the path's variance range.
        std::vector<double> probes;
        {
            std::vector<double> vs = ds.V;
            std::sort(vs.begin(), vs.end());
            for (double q : {0.01, 0.25, 0.5, 0.75, 0.99})
                probes.push_back(std::max(1e-8, vs[static_cast<std::size_t>(q * T)]));
        }
        const PriceTable table(spec, cfg.option_tau, probes);
        double err = err_rng.normal() * spec.perr.sigma_c /
                     std::sqrt(1.0 - spec.perr.rho_c * spec.perr.rho_c);
        for (int t = 0; t <= T; ++t) {
            ds.F[t] = table.price(std::exp(ds.Y[t]), ds.V[t]);
            if (t > 0)
                err = spec.perr.rho_c * err + spec.perr.sigma_c * err_rng.normal();
            ds.C[t] = ds.F[t] + err;
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Monte-Carlo pricing oracle: antithetic Q-measure paths, one substream per
// path pair.
// ---------------------------------------------------------------------------

inline std::pair<double, double> mc_price_oracle(const ModelSpec& spec, const PricingInputs& in,
                                                 int n_paths, int substeps,
                                                 std::uint64_t seed) {
    const int days = static_cast<int>(std::lround(in.tau * kDaysPerYear));
    if (days < 1) throw std::invalid_argument("mc_price_oracle: tau below one day");
    const bool mjd = spec.kind == ModelKind::MJD;
    const double comp = drift_compensator(spec);
    const DiffusionParams& d = spec.diffusion;
    const double kq = mjd ? 0.0 : spec.kappa_q();
    const double ktheta = mjd ? 0.0 : d.kappa * d.theta;
    const double rho_c1 = mjd ? 0.0 : std::sqrt(1.0 - d.rho * d.rho);
    const double h = kDailyDt / substeps;
    const double disc = std::exp(-in.r * in.tau);

    Rng root(seed);
    double sum = 0.0, sum_sq = 0.0;
    const int n_pairs = (n_paths + 1) / 2;
    for (int pair = 0; pair < n_pairs; ++pair) {
        double payoff_pair = 0.0;
        for (int anti = 0; anti < 2; ++anti) {
            Rng rng = root.substream(pair);
            if (anti) rng = rng.antithetic();
            double y = in.Y0;
            double v = mjd ? spec.sigma_mjd_q * spec.sigma_mjd_q : in.V0;
            for (int t = 0; t < days; ++t) {
                for (int s = 0; s < substeps; ++s) {
                    const double vp = std::max(v, 0.0);
                    const double z1 = rng.normal();
                    y += (in.r - 0.5 * vp + comp) * h + std::sqrt(vp * h) * z1;
                    if (!mjd) {
                        const double z2 = d.rho * z1 + rho_c1 * rng.normal();
                        v += (ktheta - kq * vp) * h + d.sigma_v * std::sqrt(vp * h) * z2;
                    }
                }
                const detail::DayJump j = detail::draw_day_jump(spec, Measure::Q, rng);
                y += j.jy;
                if (!mjd) v = std::max(v, 0.0) + j.jv;
            }
            payoff_pair += disc * std::max(std::exp(y) - in.K, 0.0);
        }
        payoff_pair *= 0.5;
        sum += payoff_pair;
        sum_sq += payoff_pair * payoff_pair;
    }
    const double mean = sum / n_pairs;
    const double var = std::max(0.0, sum_sq / n_pairs - mean * mean);
    return {mean, std::sqrt(var / n_pairs)};
}

} // namespace modelrisk
