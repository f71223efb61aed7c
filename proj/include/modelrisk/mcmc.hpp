// Joint P/Q Gibbs-Metropolis sampler: conjugate conditional updates for the
// diffusion and jump parameters, Metropolis-Hastings blocks for sigma_v^2,
// rho, the latent variance path and all risk-neutral parameters (which
// require repricing through the option likelihood), and model-specific
// latent-jump machinery for the AJD, variance-gamma and log-stable families.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "modelrisk/math_util.hpp"
#include "modelrisk/models.hpp"
#include "modelrisk/pricing.hpp"
#include "modelrisk/rng.hpp"
#include "modelrisk/simulation.hpp" // sample_gig

namespace modelrisk {

// ---------------------------------------------------------------------------
// Estimation inputs and chain containers
// ---------------------------------------------------------------------------

struct EstimationData {
    std::vector<double> Y; // log index level, length T+1
    std::vector<double> r; // continuously compounded rate, length T+1
    std::vector<double> C; // market option prices, length T+1, empty = spot-only
    double tau = 30.0 / 252.0;

    int T() const { return static_cast<int>(Y.size()) - 1; }
    bool has_options() const { return !C.empty(); }

    void validate() const {
        if (Y.size() < 3) throw std::invalid_argument("EstimationData: need at least 3 days");
        if (r.size() != Y.size()) throw std::invalid_argument("EstimationData: rate length");
        if (!C.empty() && C.size() != Y.size())
            throw std::invalid_argument("EstimationData: option length");
    }
};

struct ChainState {
    ModelSpec spec;
    std::vector<double> V;       // latent variance, length T+1
    std::vector<int> N;          // AJD jump indicators, length T
    std::vector<double> xiY;     // jump sizes in returns (AJD) or J^Y (VG/LS), length T
    std::vector<double> xiV;     // AJD variance jump sizes, length T
    std::vector<double> G;       // VG time changes, length T
    std::vector<double> U;       // LS auxiliaries, length T
    std::vector<double> F;       // model option prices, length T+1
    double loglik_options = 0.0;

    bool ajd() const { return spec.has_ajd_jumps(); }

    double vt(int t) const {
        if (spec.kind == ModelKind::MJD) return spec.sigma_mjd_q * spec.sigma_mjd_q;
        return V[t];
    }
    // Effective jump in the return over day t -> t+1.
    double jump_y(int t) const {
        if (spec.kind == ModelKind::SV) return 0.0;
        if (ajd()) return N[t] ? xiY[t] : 0.0;
        return xiY[t];
    }
    double jump_v(int t) const {
        if (spec.kind == ModelKind::SVCJ) return N[t] ? xiV[t] : 0.0;
        return 0.0;
    }
};

struct AcceptStat {
    long proposals = 0;
    long accepts = 0;
    double rate() const { return proposals ? double(accepts) / proposals : 0.0; }
};

struct ChainConfig {
    int n_iter = 30000;
    int n_burnin = 10000;
    int thin = 1;
    std::uint64_t seed = 0;
    double v_scale = 0.25; // t-proposal scale as a multiple of theta
    double v_df = 6.0;
    bool auto_tune = true;
    std::map<std::string, double> steps{
        {"eta_v", 1.0},     {"mu_j_q", 0.02}, {"gamma_q", 0.05}, {"sigma_q", 0.05},
        {"nu", 0.01},       {"sigma_mjd", 0.01}, {"jy_ls", 1.0},
    };
    QuadratureConfig quad; // repricing accuracy inside the chain
    std::set<std::string> frozen;

    ChainConfig() { quad.abs_tol = 1e-6; }

    void validate() const {
        if (n_burnin >= n_iter) throw std::invalid_argument("ChainConfig: n_burnin >= n_iter");
        if (thin < 1) throw std::invalid_argument("ChainConfig: thin < 1");
    }
};

struct PosteriorDraws {
    std::vector<std::string> param_names;
    std::vector<std::vector<double>> draws;       // retained iterations x parameters
    std::vector<std::vector<double>> price_draws; // retained iterations x (T+1)
    std::map<std::string, AcceptStat> acceptance;
    std::vector<std::string> warnings;
    std::vector<double> v_mean, jy_mean, jv_mean; // posterior-mean latents
    std::vector<double> loglik_returns;           // per retained iteration
    std::vector<double> loglik_returns_marginal;  // per retained iteration, jumps integrated out
    std::vector<double> loglik_options;           // per retained iteration
    double loglik_returns_at_mean = 0.0;
    double loglik_returns_marginal_at_mean = 0.0;
};

// ---------------------------------------------------------------------------
// Small samplers
// ---------------------------------------------------------------------------

/// Lower-truncated normal via inverse-CDF, robust for means far below the bound.
inline double trunc_normal_lb(double mean, double sd, double lb, Rng& rng) {
    const double a = norm_cdf((lb - mean) / sd);
    const double u = std::min(a + (1.0 - a) * rng.uniform(), 1.0 - 1e-16);
    return std::max(mean + sd * inv_norm_cdf(u), lb + 1e-12);
}

inline double trunc_normal_pos(double mean, double sd, Rng& rng) {
    return trunc_normal_lb(mean, sd, 0.0, rng);
}

// ---------------------------------------------------------------------------
// Residual machinery (daily discretization, day t -> t+1)
// ---------------------------------------------------------------------------

namespace mcmcdetail {

inline double drift_y(const ChainState& s, const EstimationData& d, int t, double comp,
                      bool with_eta = true) {
    const double v = s.vt(t);
    double mu = d.r[t] - 0.5 * v + comp;
    if (with_eta) mu += s.spec.premia.eta_s * v;
    return mu * kDailyDt;
}

/// Raw return residual e_y = dY - drift - jump.
inline double ey_raw(const ChainState& s, const EstimationData& d, int t, double comp,
                     bool with_jump = true, bool with_eta = true) {
    double e = d.Y[t + 1] - d.Y[t] - drift_y(s, d, t, comp, with_eta);
    if (with_jump) e -= s.jump_y(t);
    return e;
}

/// Raw variance residual e_v = dV - kappa (theta - V) dt - jump.
inline double ev_raw(const ChainState& s, int t, bool with_jump = true) {
    const auto& p = s.spec.diffusion;
    double e = s.V[t + 1] - s.V[t] - p.kappa * (p.theta - s.V[t]) * kDailyDt;
    if (with_jump) e -= s.jump_v(t);
    return e;
}

/// Log-density of one day's standardized pair (H, D) under the correlated
/// bivariate normal, including the V_{t+1}-transition normalization.
inline double day_loglik(const ChainState& s, const EstimationData& d, int t, double comp) {
    const double v = s.vt(t);
    const double sv = s.spec.diffusion.sigma_v;
    const double rho = s.spec.kind == ModelKind::MJD ? 0.0 : s.spec.diffusion.rho;
    const double h = ey_raw(s, d, t, comp) / std::sqrt(v * kDailyDt);
    if (s.spec.kind == ModelKind::MJD)
        return -0.5 * std::log(2.0 * M_PI * v * kDailyDt) - 0.5 * h * h;
    const double dd = ev_raw(s, t) / (sv * std::sqrt(v * kDailyDt));
    const double r2 = 1.0 - rho * rho;
    return -std::log(sv * v * kDailyDt * std::sqrt(r2) * 2.0 * M_PI) -
           (h * h - 2.0 * rho * h * dd + dd * dd) / (2.0 * r2);
}

/// Buckle auxiliary function t_alpha(U) for the log-stable jump density.
inline double t_alpha(double alpha, double u) {
    const double pu = M_PI * u;
    const double shift = 0.5 * (2.0 - alpha) * M_PI;
    const double base = std::cos(pu) / std::cos((alpha - 1.0) * pu + shift);
    return (std::sin(alpha * pu + shift) / std::cos(pu)) *
           std::pow(base, (alpha - 1.0) / alpha);
}

/// Boundary of the U support: J < 0 pairs with U in (-1/2, m), J > 0 with
/// (m, 1/2), where m = (alpha - 2)/(2 alpha).
inline double u_branch_split(double alpha) { return (alpha - 2.0) / (2.0 * alpha); }

/// |J / (sigma dt^{1/alpha} t_alpha(U))|^{alpha/(alpha-1)}, the workhorse of
/// every log-stable conditional. Returns +inf when J and U sit on
/// mismatched branches (t_alpha sign must equal sign of J).
inline double ls_w(double j, double u, double alpha, double sigma) {
    const double ta = t_alpha(alpha, u);
    if (j * ta <= 0.0 || j == 0.0) return std::numeric_limits<double>::infinity();
    const double z = std::abs(j / (sigma * std::pow(kDailyDt, 1.0 / alpha) * ta));
    return std::pow(z, alpha / (alpha - 1.0));
}

} // namespace mcmcdetail

// ---------------------------------------------------------------------------
// Option likelihood
// ---------------------------------------------------------------------------

/// Log-likelihood of the AR(1) Gaussian pricing-error model: the n-1
/// conditional factors of e_t | e_{t-1} with e_t = C_t - F_t.
inline double option_loglik(const std::vector<double>& C, const std::vector<double>& F,
                            double rho_c, double sigma_c) {
    if (C.size() != F.size() || C.size() < 2)
        throw std::invalid_argument("option_loglik: need equal lengths >= 2");
    double ll = 0.0;
    for (std::size_t t = 1; t < C.size(); ++t) {
        const double e1 = C[t] - F[t], e0 = C[t - 1] - F[t - 1];
        const double z = e1 - rho_c * e0;
        ll += -std::log(std::sqrt(2.0 * M_PI) * sigma_c) - z * z / (2.0 * sigma_c * sigma_c);
    }
    return ll;
}

// ---------------------------------------------------------------------------
// Conjugate conditionals: Normal targets return (A, B) with the draw being
// Normal(A/B, sqrt(1/B)); inverse-gamma targets return (A, B) in the
// IG(A, B) ~ x^{-(A+2)/2} exp(-B/(2x)) convention; Lambda returns Beta(A, B)
// parameters for the daily jump probability.
// ---------------------------------------------------------------------------

enum class NormalTarget { Kappa, Theta, EtaS, MuJP, RhoJ, RhoC, GammaP };
enum class InvGammaTarget { SigmaV2Proposal, SigmaJ2, SigmaC2, MuV, SigmaP2, SigmaLsPow, Lambda };

struct ConjAB {
    double a = 0.0, b = 0.0;
};

inline ConjAB conditional_normal(NormalTarget target, const ChainState& s,
                                 const EstimationData& d, const PriorSet& priors) {
    const int T = d.T();
    const auto& p = s.spec.diffusion;
    const double sv = p.sigma_v;
    const double rho = s.spec.kind == ModelKind::MJD ? 0.0 : p.rho;
    const double r2 = 1.0 - rho * rho;
    const double comp = drift_compensator(s.spec);
    ConjAB out;

    const auto prior_terms = [&](const std::string& name) {
        const Prior& pr = priors.at(name);
        out.a += pr.a / pr.b;
        out.b += 1.0 / pr.b;
    };

    switch (target) {
    case NormalTarget::Kappa: {
        for (int t = 0; t < T; ++t) {
            const double v = s.V[t];
            const double bcoef = (p.theta - v) * kDailyDt;
            const double a_t = s.V[t + 1] - s.V[t] - s.jump_v(t);
            const double ey = mcmcdetail::ey_raw(s, d, t, comp);
            out.b += bcoef * bcoef / (r2 * sv * sv * v * kDailyDt);
            out.a += bcoef * (a_t / sv - rho * ey) / (r2 * sv * v * kDailyDt);
        }
        prior_terms("kappa");
        return out;
    }
    case NormalTarget::Theta: {
        for (int t = 0; t < T; ++t) {
            const double v = s.V[t];
            const double a_t = s.V[t + 1] - (1.0 - p.kappa * kDailyDt) * s.V[t] - s.jump_v(t);
            const double ey = mcmcdetail::ey_raw(s, d, t, comp);
            out.b += p.kappa * p.kappa * kDailyDt / (r2 * sv * sv * v);
            out.a += p.kappa * (a_t / sv - rho * ey) / (r2 * sv * v);
        }
        prior_terms("theta");
        return out;
    }
    case NormalTarget::EtaS: {
        for (int t = 0; t < T; ++t) {
            const double v = s.vt(t);
            const double g = mcmcdetail::ey_raw(s, d, t, comp, true, false);
            double num = g;
            if (s.spec.kind != ModelKind::MJD) num -= rho * mcmcdetail::ev_raw(s, t) / sv;
            out.b += v * kDailyDt / r2;
            out.a += num / r2;
        }
        prior_terms("eta_s");
        return out;
    }
    case NormalTarget::MuJP: {
        const double sj2 = s.spec.ajd.sigma_j * s.spec.ajd.sigma_j;
        for (int t = 0; t < T; ++t)
            out.a += (s.xiY[t] - s.spec.ajd.rho_j * s.xiV[t]) / sj2;
        out.b += T / sj2;
        prior_terms("mu_j_p");
        return out;
    }
    case NormalTarget::RhoJ: {
        const double sj2 = s.spec.ajd.sigma_j * s.spec.ajd.sigma_j;
        for (int t = 0; t < T; ++t) {
            out.a += (s.xiY[t] - s.spec.ajd.mu_j_p) * s.xiV[t] / sj2;
            out.b += s.xiV[t] * s.xiV[t] / sj2;
        }
        prior_terms("rho_j");
        return out;
    }
    case NormalTarget::RhoC: {
        const double sc2 = s.spec.perr.sigma_c * s.spec.perr.sigma_c;
        for (int t = 0; t + 1 <= T; ++t) {
            const double h0 = d.C[t] - s.F[t], h1 = d.C[t + 1] - s.F[t + 1];
            out.a += h0 * h1 / sc2;
            out.b += h0 * h0 / sc2;
        }
        prior_terms("rho_c");
        return out;
    }
    case NormalTarget::GammaP: {
        const double sp2 = s.spec.vg.sigma_p * s.spec.vg.sigma_p;
        for (int t = 0; t < T; ++t) {
            out.a += s.xiY[t] / sp2;
            out.b += s.G[t] / sp2;
        }
        prior_terms("gamma_p");
        return out;
    }
    }
    throw std::logic_error("conditional_normal: unreachable");
}

inline ConjAB conditional_invgamma(InvGammaTarget target, const ChainState& s,
                                   const EstimationData& d, const PriorSet& priors) {
    const int T = d.T();
    ConjAB out;
    switch (target) {
    case InvGammaTarget::SigmaV2Proposal: {
        const Prior& pr = priors.at("sigma_v2");
        out.a = pr.a + T;
        out.b = pr.b;
        for (int t = 0; t < T; ++t) {
            const double e = mcmcdetail::ev_raw(s, t);
            out.b += e * e / (s.V[t] * kDailyDt);
        }
        return out;
    }
    case InvGammaTarget::SigmaJ2: {
        const Prior& pr = priors.at("sigma_j2");
        out.a = pr.a + T;
        out.b = pr.b;
        for (int t = 0; t < T; ++t) {
            const double e = s.xiY[t] - s.spec.ajd.mu_j_p - s.spec.ajd.rho_j * s.xiV[t];
            out.b += e * e;
        }
        return out;
    }
    case InvGammaTarget::SigmaC2: {
        const Prior& pr = priors.at("sigma_c2");
        out.a = pr.a + T;
        out.b = pr.b;
        for (int t = 0; t + 1 <= T; ++t) {
            const double e = (d.C[t + 1] - s.F[t + 1]) -
                             s.spec.perr.rho_c * (d.C[t] - s.F[t]);
            out.b += e * e;
        }
        return out;
    }
    case InvGammaTarget::MuV: {
        const Prior& pr = priors.at("mu_v");
        out.a = pr.a + 2.0 * T;
        out.b = pr.b;
        for (int t = 0; t < T; ++t) out.b += 2.0 * s.xiV[t];
        return out;
    }
    case InvGammaTarget::SigmaP2: {
        const Prior& pr = priors.at("sigma_p2");
        out.a = pr.a + T;
        out.b = pr.b;
        for (int t = 0; t < T; ++t) {
            const double e = s.xiY[t] - s.spec.vg.gamma_p * s.G[t];
            out.b += e * e / s.G[t];
        }
        return out;
    }
    case InvGammaTarget::SigmaLsPow: {
        const Prior& pr = priors.at("sigma_ls_pow");
        const double alpha = s.spec.ls.alpha;
        out.a = pr.a + 2.0 * T;
        out.b = pr.b;
        for (int t = 0; t < T; ++t) {
            // w with sigma = 1: |J / (dt^{1/alpha} t_alpha(U))|^{alpha/(alpha-1)}
            const double w1 = mcmcdetail::ls_w(s.xiY[t], s.U[t], alpha, 1.0);
            out.b += 2.0 * w1;
        }
        return out;
    }
    case InvGammaTarget::Lambda: {
        const Prior& pr = priors.at("lambda");
        int k = 0;
        for (int t = 0; t < T; ++t) k += s.N[t];
        return {pr.a + k, pr.b + T - k};
    }
    }
    throw std::logic_error("conditional_invgamma: unreachable");
}

// ---------------------------------------------------------------------------
// Per-day conjugate conditionals for jump sizes
// ---------------------------------------------------------------------------

/// xi^Y_t for the AJD family (conditional on N, xi^V and everything else).
inline ConjAB conditional_xi_y(const ChainState& s, const EstimationData& d, int t,
                               double comp) {
    const double v = s.vt(t);
    const double sv = s.spec.diffusion.sigma_v;
    const double rho = s.spec.kind == ModelKind::MJD ? 0.0 : s.spec.diffusion.rho;
    const double r2 = 1.0 - rho * rho;
    const double sj2 = s.spec.ajd.sigma_j * s.spec.ajd.sigma_j;
    const double g = mcmcdetail::ey_raw(s, d, t, comp, false); // without the jump
    double num = g;
    if (s.spec.kind != ModelKind::MJD) num -= rho * mcmcdetail::ev_raw(s, t) / sv;
    ConjAB out;
    out.a = num / (r2 * v * kDailyDt) +
            (s.spec.ajd.mu_j_p + s.spec.ajd.rho_j * s.xiV[t]) / sj2;
    out.b = 1.0 / (r2 * v * kDailyDt) + 1.0 / sj2;
    return out;
}

/// xi^V_t for SVCJ (exponential prior contributes -1/mu_v to A; truncated > 0).
inline ConjAB conditional_xi_v(const ChainState& s, const EstimationData& d, int t,
                               double comp) {
    const double v = s.V[t];
    const double sv = s.spec.diffusion.sigma_v;
    const double rho = s.spec.diffusion.rho;
    const double r2 = 1.0 - rho * rho;
    const double sj2 = s.spec.ajd.sigma_j * s.spec.ajd.sigma_j;
    const double dv = mcmcdetail::ev_raw(s, t, false); // without the jump
    const double ey = mcmcdetail::ey_raw(s, d, t, comp);
    ConjAB out;
    out.a = (dv - rho * sv * ey) / (r2 * sv * sv * v * kDailyDt) +
            s.spec.ajd.rho_j * (s.xiY[t] - s.spec.ajd.mu_j_p) / sj2 - 1.0 / s.spec.ajd.mu_v;
    out.b = 1.0 / (r2 * sv * sv * v * kDailyDt) +
            s.spec.ajd.rho_j * s.spec.ajd.rho_j / sj2;
    return out;
}

/// J^Y_t for SVVG (conditional on G_t).
inline ConjAB conditional_jy_vg(const ChainState& s, const EstimationData& d, int t,
                                double comp) {
    const double v = s.V[t];
    const double sv = s.spec.diffusion.sigma_v;
    const double rho = s.spec.diffusion.rho;
    const double r2 = 1.0 - rho * rho;
    const double sp2 = s.spec.vg.sigma_p * s.spec.vg.sigma_p;
    const double g = mcmcdetail::ey_raw(s, d, t, comp, false);
    const double dv = mcmcdetail::ev_raw(s, t);
    ConjAB out;
    out.a = (g - rho * dv / sv) / (r2 * v * kDailyDt) + s.spec.vg.gamma_p / sp2;
    out.b = 1.0 / (r2 * v * kDailyDt) + 1.0 / (sp2 * s.G[t]);
    return out;
}

// ---------------------------------------------------------------------------
// Repricing support
// ---------------------------------------------------------------------------

namespace mcmcdetail {

inline std::vector<double> probe_variances(const ChainState& s) {
    if (s.spec.kind == ModelKind::MJD) return {s.vt(0)};
    std::vector<double> v(s.V);
    std::sort(v.begin(), v.end());
    const auto q = [&](double p) {
        return std::max(v[static_cast<std::size_t>(p * (v.size() - 1))], 1e-8);
    };
    return {q(0.01), q(0.25), q(0.50), q(0.75), q(0.99)};
}

/// Rebuilds the frozen-node price table for the current spec and fills F.
inline PriceTable reprice_all(ChainState& s, const EstimationData& d,
                              const QuadratureConfig& quad) {
    PriceTable table(s.spec, d.tau, probe_variances(s), quad);
    s.F.resize(d.Y.size());
    for (std::size_t t = 0; t < d.Y.size(); ++t)
        s.F[t] = std::exp(d.Y[t]) * table.price_ratio(s.vt(static_cast<int>(t)));
    return table;
}

} // namespace mcmcdetail

// ---------------------------------------------------------------------------
// Metropolis-Hastings blocks
// ---------------------------------------------------------------------------

/// Leftover factor of the sigma_v^2 target over its rho = 0 inverse-gamma
/// proposal: exp{ -(1/(2(1-rho^2))) sum (rho D_t - H_t)^2 } with D, H the
/// standardized residuals at the candidate sigma_v.
inline double log_sigma_v_pi(const ChainState& s, const EstimationData& d, double sigma_v,
                             double comp) {
    const double rho = s.spec.diffusion.rho;
    const double r2 = 1.0 - rho * rho;
    double acc = 0.0;
    for (int t = 0; t < d.T(); ++t) {
        const double sq = std::sqrt(s.V[t] * kDailyDt);
        const double dd = mcmcdetail::ev_raw(s, t) / (sigma_v * sq);
        const double h = mcmcdetail::ey_raw(s, d, t, comp) / sq;
        acc += (rho * dd - h) * (rho * dd - h);
    }
    return -acc / (2.0 * r2);
}

inline bool mh_sigma_v(ChainState& s, const EstimationData& d, const PriorSet& priors,
                       const QuadratureConfig& quad, Rng& rng, bool* warn = nullptr) {
    const ConjAB prop = conditional_invgamma(InvGammaTarget::SigmaV2Proposal, s, d, priors);
    const double cand2 = rng.inv_gamma_ab(prop.a, prop.b);
    const double cand = std::sqrt(cand2);
    const double comp = drift_compensator(s.spec);
    double la = log_sigma_v_pi(s, d, cand, comp) -
                log_sigma_v_pi(s, d, s.spec.diffusion.sigma_v, comp);
    // sigma_v also moves model option prices; the leftover factor picks up
    // the option-likelihood ratio of the repriced candidate.
    ChainState cand_state;
    if (d.has_options()) {
        cand_state = s;
        cand_state.spec.diffusion.sigma_v = cand;
        try {
            mcmcdetail::reprice_all(cand_state, d, quad);
            la += option_loglik(d.C, cand_state.F, s.spec.perr.rho_c, s.spec.perr.sigma_c) -
                  option_loglik(d.C, s.F, s.spec.perr.rho_c, s.spec.perr.sigma_c);
        } catch (const std::exception&) {
            if (warn) *warn = true;
            rng.uniform();
            return false;
        }
    }
    if (std::log(rng.uniform()) < la) {
        s.spec.diffusion.sigma_v = cand;
        if (d.has_options()) s.F = std::move(cand_state.F);
        return true;
    }
    return false;
}

/// Full conditional of rho given standardized residuals.
inline double log_rho_pi(double rho, double shh, double sdd, double shd, int T) {
    const double r2 = 1.0 - rho * rho;
    return -0.5 * T * std::log(r2) - (shh + sdd) / (2.0 * r2) + rho * shd / r2;
}

inline bool mh_rho(ChainState& s, const EstimationData& d, const QuadratureConfig& quad,
                   Rng& rng, bool* warn = nullptr) {
    const int T = d.T();
    const double comp = drift_compensator(s.spec);
    std::vector<double> hs(T), ds(T);
    for (int t = 0; t < T; ++t) {
        const double sq = std::sqrt(s.V[t] * kDailyDt);
        hs[t] = mcmcdetail::ey_raw(s, d, t, comp) / sq;
        ds[t] = mcmcdetail::ev_raw(s, t) / (s.spec.diffusion.sigma_v * sq);
    }
    double shh = 0.0, sdd = 0.0, shd = 0.0;
    for (int t = 0; t < T; ++t) {
        shh += hs[t] * hs[t];
        sdd += ds[t] * ds[t];
        shd += hs[t] * ds[t];
    }
    double rho_r;
    try {
        rho_r = pearson_corr(ds, hs);
    } catch (const std::exception&) {
        rho_r = s.spec.diffusion.rho; // degenerate residuals, e.g. a flat start
    }
    rho_r = std::clamp(rho_r, -0.999, 0.999);
    const auto fisher = [](double x) { return 0.5 * std::log((1.0 + x) / (1.0 - x)); };
    const double sd_z = 1.0 / std::sqrt(std::max(T - 3, 1));
    const double z_new = fisher(rho_r) + sd_z * rng.normal();
    const double rho_new = std::tanh(z_new);
    const double rho_old = s.spec.diffusion.rho;
    // Independence proposal in z-space; the acceptance ratio carries the
    // proposal-density ratio and the z -> rho Jacobian (1 - rho^2).
    const double lq_old = -0.5 * std::pow((fisher(rho_old) - fisher(rho_r)) / sd_z, 2) -
                          std::log(1.0 - rho_old * rho_old);
    const double lq_new = -0.5 * std::pow((z_new - fisher(rho_r)) / sd_z, 2) -
                          std::log(1.0 - rho_new * rho_new);
    double la = log_rho_pi(rho_new, shh, sdd, shd, T) -
                log_rho_pi(rho_old, shh, sdd, shd, T) + lq_old - lq_new;
    // rho also moves model option prices; fold in the option-likelihood ratio.
    ChainState cand_state;
    if (d.has_options()) {
        cand_state = s;
        cand_state.spec.diffusion.rho = rho_new;
        try {
            mcmcdetail::reprice_all(cand_state, d, quad);
            la += option_loglik(d.C, cand_state.F, s.spec.perr.rho_c, s.spec.perr.sigma_c) -
                  option_loglik(d.C, s.F, s.spec.perr.rho_c, s.spec.perr.sigma_c);
        } catch (const std::exception&) {
            if (warn) *warn = true;
            rng.uniform();
            return false;
        }
    }
    if (std::log(rng.uniform()) < la) {
        s.spec.diffusion.rho = rho_new;
        if (d.has_options()) s.F = std::move(cand_state.F);
        return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Parameter-by-name access (draw recording, frozen sets, Q-parameter MH)
// ---------------------------------------------------------------------------

inline std::vector<std::string> chain_param_names(ModelKind kind) {
    switch (kind) {
    case ModelKind::MJD:
        return {"sigma_mjd", "lambda", "mu_j_p", "sigma_j", "mu_j_q", "eta_s",
                "rho_c", "sigma_c"};
    case ModelKind::SV:
        return {"kappa", "theta", "sigma_v", "rho", "eta_s", "eta_v", "rho_c", "sigma_c"};
    case ModelKind::SVJ:
        return {"kappa", "theta", "sigma_v", "rho", "lambda", "mu_j_p", "sigma_j",
                "mu_j_q", "eta_s", "eta_v", "rho_c", "sigma_c"};
    case ModelKind::SVCJ:
        return {"kappa", "theta", "sigma_v", "rho", "lambda", "mu_j_p", "sigma_j",
                "mu_v", "rho_j", "mu_j_q", "eta_s", "eta_v", "rho_c", "sigma_c"};
    case ModelKind::SVVG:
        return {"kappa", "theta", "sigma_v", "rho", "nu", "gamma_p", "sigma_p",
                "gamma_q", "sigma_q", "eta_s", "eta_v", "rho_c", "sigma_c"};
    case ModelKind::SVLS:
        return {"kappa", "theta", "sigma_v", "rho", "alpha", "sigma_ls", "eta_s",
                "eta_v", "rho_c", "sigma_c"};
    }
    throw std::logic_error("chain_param_names: unreachable");
}

inline double get_param(const ModelSpec& s, const std::string& name) {
    if (name == "kappa") return s.diffusion.kappa;
    if (name == "theta") return s.diffusion.theta;
    if (name == "sigma_v") return s.diffusion.sigma_v;
    if (name == "rho") return s.diffusion.rho;
    if (name == "lambda") return s.ajd.lambda;
    if (name == "mu_j_p") return s.ajd.mu_j_p;
    if (name == "mu_j_q") return s.ajd.mu_j_q;
    if (name == "sigma_j") return s.ajd.sigma_j;
    if (name == "mu_v") return s.ajd.mu_v;
    if (name == "rho_j") return s.ajd.rho_j;
    if (name == "nu") return s.vg.nu;
    if (name == "gamma_p") return s.vg.gamma_p;
    if (name == "sigma_p") return s.vg.sigma_p;
    if (name == "gamma_q") return s.vg.gamma_q;
    if (name == "sigma_q") return s.vg.sigma_q;
    if (name == "alpha") return s.ls.alpha;
    if (name == "sigma_ls") return s.ls.sigma;
    if (name == "eta_s") return s.premia.eta_s;
    if (name == "eta_v") return s.premia.eta_v;
    if (name == "rho_c") return s.perr.rho_c;
    if (name == "sigma_c") return s.perr.sigma_c;
    if (name == "sigma_mjd") return s.sigma_mjd_q;
    throw std::invalid_argument("get_param: unknown parameter " + name);
}

inline void set_param(ModelSpec& s, const std::string& name, double value) {
    if (name == "kappa") s.diffusion.kappa = value;
    else if (name == "theta") s.diffusion.theta = value;
    else if (name == "sigma_v") s.diffusion.sigma_v = value;
    else if (name == "rho") s.diffusion.rho = value;
    else if (name == "lambda") s.ajd.lambda = value;
    else if (name == "mu_j_p") s.ajd.mu_j_p = value;
    else if (name == "mu_j_q") s.ajd.mu_j_q = value;
    else if (name == "sigma_j") s.ajd.sigma_j = value;
    else if (name == "mu_v") s.ajd.mu_v = value;
    else if (name == "rho_j") s.ajd.rho_j = value;
    else if (name == "nu") s.vg.nu = value;
    else if (name == "gamma_p") s.vg.gamma_p = value;
    else if (name == "sigma_p") s.vg.sigma_p = value;
    else if (name == "gamma_q") s.vg.gamma_q = value;
    else if (name == "sigma_q") s.vg.sigma_q = value;
    else if (name == "alpha") s.ls.alpha = value;
    else if (name == "sigma_ls") s.ls.sigma = value;
    else if (name == "eta_s") s.premia.eta_s = value;
    else if (name == "eta_v") s.premia.eta_v = value;
    else if (name == "rho_c") s.perr.rho_c = value;
    else if (name == "sigma_c") s.perr.sigma_c = value;
    else if (name == "sigma_mjd") s.sigma_mjd_q = value;
    else throw std::invalid_argument("set_param: unknown parameter " + name);
}

// ---------------------------------------------------------------------------
// Risk-neutral parameter MH (option likelihood + prior, full reprice)
// ---------------------------------------------------------------------------

namespace mcmcdetail {

/// Extra log-density terms beyond (option likelihood + prior) that a
/// risk-neutral parameter carries on the P side.
inline double extra_p_loglik(const ChainState& s, const EstimationData& d,
                             const std::string& name) {
    const int T = d.T();
    if (name == "nu") {
        // G_t ~ Gamma(dt/nu, scale nu)
        const double nu = s.spec.vg.nu;
        const double sh = kDailyDt / nu;
        double ll = T * (-std::lgamma(sh) - sh * std::log(nu));
        for (int t = 0; t < T; ++t) ll += (sh - 1.0) * std::log(s.G[t]) - s.G[t] / nu;
        return ll;
    }
    if (name == "sigma_mjd") {
        // Return likelihood: the constant diffusion variance enters both the
        // drift and the scale of every day's residual.
        const double comp = drift_compensator(s.spec);
        double ll = 0.0;
        for (int t = 0; t < T; ++t) ll += day_loglik(s, d, t, comp);
        return ll;
    }
    return 0.0;
}

inline const Prior& prior_for(const PriorSet& priors, const std::string& name) {
    // Variance-style parameters carry their prior on the squared scale.
    if (name == "sigma_q") return priors.at("sigma_q2");
    if (name == "sigma_mjd") return priors.at("sigma_mjd_q2");
    return priors.at(name);
}

inline double log_prior_for(const PriorSet& priors, const std::string& name, double value) {
    if (name == "sigma_q" || name == "sigma_mjd") {
        // Prior stated on x^2; include the Jacobian 2x of x -> x^2.
        if (value <= 0.0) return -std::numeric_limits<double>::infinity();
        return log_prior_density(prior_for(priors, name), value * value) +
               std::log(2.0 * value);
    }
    return log_prior_density(priors.at(name), value);
}

} // namespace mcmcdetail

/// Random-walk MH on one risk-neutral (pricing-relevant) parameter. Returns
/// whether the proposal was accepted; pricing failures count as rejection
/// and set *warn.
inline bool mh_risk_neutral(const std::string& name, ChainState& s, const EstimationData& d,
                            const PriorSet& priors, const QuadratureConfig& quad,
                            double step, Rng& rng, bool* warn = nullptr) {
    const double old_value = get_param(s.spec, name);
    const double cand = old_value + step * rng.normal();
    const double lp_cand = mcmcdetail::log_prior_for(priors, name, cand);
    if (!std::isfinite(lp_cand)) return false;
    if ((name == "sigma_q" || name == "sigma_mjd" || name == "nu") && cand <= 0.0)
        return false;

    const double lp_old = mcmcdetail::log_prior_for(priors, name, old_value);
    double ll_old = mcmcdetail::extra_p_loglik(s, d, name);
    if (d.has_options()) ll_old += option_loglik(d.C, s.F, s.spec.perr.rho_c, s.spec.perr.sigma_c);

    ChainState cand_state = s;
    set_param(cand_state.spec, name, cand);
    double ll_cand = 0.0;
    try {
        if (!validate_spec(cand_state.spec).empty()) return false;
        if (d.has_options()) {
            mcmcdetail::reprice_all(cand_state, d, quad);
            ll_cand += option_loglik(d.C, cand_state.F, s.spec.perr.rho_c, s.spec.perr.sigma_c);
        }
        ll_cand += mcmcdetail::extra_p_loglik(cand_state, d, name);
    } catch (const std::exception&) {
        if (warn) *warn = true;
        return false;
    }
    if (std::log(rng.uniform()) < (ll_cand + lp_cand) - (ll_old + lp_old)) {
        s.spec = cand_state.spec;
        s.F = cand_state.F;
        return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Latent-variance sweep
// ---------------------------------------------------------------------------

namespace mcmcdetail {

/// Log target of V_s holding everything else fixed: the transition terms
/// that involve V_s plus the option-likelihood terms through F_s(V_s).
/// Boundary days drop the missing neighbor term.
inline double log_v_target(const ChainState& s, const EstimationData& d, int t_idx,
                           double v_value, double f_value, double comp) {
    const int T = d.T();
    const auto& p = s.spec.diffusion;
    const double r2 = 1.0 - p.rho * p.rho;
    double ll = 0.0;
    if (v_value <= 0.0) return -std::numeric_limits<double>::infinity();

    if (t_idx > 0) {
        // Day t_idx-1 -> t_idx: V_s enters only the D numerator.
        const int t = t_idx - 1;
        const double sq = std::sqrt(s.V[t] * kDailyDt);
        const double dd = (v_value - s.V[t] - p.kappa * (p.theta - s.V[t]) * kDailyDt -
                           s.jump_v(t)) /
                          (p.sigma_v * sq);
        const double h = ey_raw(s, d, t, comp) / sq;
        ll += -(dd * dd - 2.0 * p.rho * dd * h) / (2.0 * r2);
    }
    if (t_idx < T) {
        // Day t_idx -> t_idx+1: V_s is the conditioning variance.
        const int t = t_idx;
        const double sq = std::sqrt(v_value * kDailyDt);
        const double dd = (s.V[t + 1] - v_value - p.kappa * (p.theta - v_value) * kDailyDt -
                           s.jump_v(t)) /
                          (p.sigma_v * sq);
        const double drift = (d.r[t] - 0.5 * v_value + comp + s.spec.premia.eta_s * v_value) *
                             kDailyDt;
        const double h = (d.Y[t + 1] - d.Y[t] - drift - s.jump_y(t)) / sq;
        ll += -std::log(v_value) - (dd * dd - 2.0 * p.rho * dd * h + h * h) / (2.0 * r2);
    }
    if (d.has_options()) {
        const double sc2 = s.spec.perr.sigma_c * s.spec.perr.sigma_c;
        const double h_here = d.C[t_idx] - f_value;
        if (t_idx > 0) {
            const double e = h_here - s.spec.perr.rho_c * (d.C[t_idx - 1] - s.F[t_idx - 1]);
            ll -= e * e / (2.0 * sc2);
        }
        if (t_idx < T) {
            const double e = (d.C[t_idx + 1] - s.F[t_idx + 1]) - s.spec.perr.rho_c * h_here;
            ll -= e * e / (2.0 * sc2);
        }
    }
    return ll;
}

} // namespace mcmcdetail

/// One sweep of per-day Student-t random-walk updates of the variance path.
/// Returns (proposals, accepts).
inline std::pair<long, long> update_latent_variance(ChainState& s, const EstimationData& d,
                                                    const PriceTable* table, double scale,
                                                    double df, Rng& rng) {
    const int T = d.T();
    const double comp = drift_compensator(s.spec);
    long acc = 0;
    for (int t_idx = 0; t_idx <= T; ++t_idx) {
        const double v_old = s.V[t_idx];
        const double v_new = v_old + scale * rng.student_t(df);
        const double u = rng.uniform(); // drawn unconditionally to keep streams aligned
        if (v_new <= 1e-10) continue;
        const double f_old = d.has_options() ? s.F[t_idx] : 0.0;
        const double f_new =
            d.has_options() ? std::exp(d.Y[t_idx]) * table->price_ratio(v_new) : 0.0;
        const double la = mcmcdetail::log_v_target(s, d, t_idx, v_new, f_new, comp) -
                          mcmcdetail::log_v_target(s, d, t_idx, v_old, f_old, comp);
        if (std::log(u) < la) {
            s.V[t_idx] = v_new;
            if (d.has_options()) s.F[t_idx] = f_new;
            ++acc;
        }
    }
    return {T + 1, acc};
}

// ---------------------------------------------------------------------------
// Jump-block updates
// ---------------------------------------------------------------------------

namespace mcmcdetail {

inline void update_ajd_jumps_day(ChainState& s, const EstimationData& d, int t, double comp,
                                 Rng& rng) {
    const bool svcj = s.spec.kind == ModelKind::SVCJ && s.spec.ajd.mu_v != 0.0;
    const double v = s.vt(t);
    const double sv = s.spec.diffusion.sigma_v;
    const double rho = s.spec.kind == ModelKind::MJD ? 0.0 : s.spec.diffusion.rho;
    const double r2 = 1.0 - rho * rho;
    const double p_day = std::clamp(s.spec.ajd.lambda * kDailyDt, 0.0, 1.0);
    const bool has_vol = s.spec.kind != ModelKind::MJD;

    // N_t: Bernoulli(alpha1/(alpha1+alpha2)) with candidate jump sizes in the
    // numerator and the no-jump residuals in the denominator.
    const double sq = std::sqrt(v * kDailyDt);
    const double g = ey_raw(s, d, t, comp, false);
    const double h1 = (g - s.xiY[t]) / sq;
    const double h0 = g / sq;
    double d1 = 0.0, d0 = 0.0;
    if (has_vol) {
        const double dv = ev_raw(s, t, false);
        d1 = (dv - (svcj ? s.xiV[t] : 0.0)) / (sv * sq);
        d0 = dv / (sv * sq);
    }
    const double l1 = std::log(std::max(p_day, 0.0)) -
                      (h1 * h1 - 2.0 * rho * h1 * d1 + (has_vol ? d1 * d1 : 0.0)) / (2.0 * r2);
    const double l0 = std::log(std::max(1.0 - p_day, 0.0)) -
                      (h0 * h0 - 2.0 * rho * h0 * d0 + (has_vol ? d0 * d0 : 0.0)) / (2.0 * r2);
    const double prob1 = p_day <= 0.0 ? 0.0 : 1.0 / (1.0 + std::exp(l0 - l1));
    s.N[t] = rng.uniform() < prob1 ? 1 : 0;

    // xi^V_t (SVCJ only): conditional truncated normal on jump days,
    // exponential prior refresh otherwise.
    if (svcj) {
        if (s.N[t] == 1) {
            const ConjAB ab = conditional_xi_v(s, d, t, comp);
            s.xiV[t] = trunc_normal_pos(ab.a / ab.b, std::sqrt(1.0 / ab.b), rng);
        } else {
            s.xiV[t] = s.spec.ajd.mu_v * rng.exponential();
        }
    }

    // xi^Y_t: conjugate normal on jump days, prior refresh otherwise.
    if (s.N[t] == 1) {
        const ConjAB ab = conditional_xi_y(s, d, t, comp);
        s.xiY[t] = ab.a / ab.b + std::sqrt(1.0 / ab.b) * rng.normal();
    } else {
        s.xiY[t] = s.spec.ajd.mu_j_p + s.spec.ajd.rho_j * s.xiV[t] +
                   s.spec.ajd.sigma_j * rng.normal();
    }
}

inline void update_vg_jumps_day(ChainState& s, const EstimationData& d, int t, double comp,
                                Rng& rng) {
    const ConjAB ab = conditional_jy_vg(s, d, t, comp);
    s.xiY[t] = ab.a / ab.b + std::sqrt(1.0 / ab.b) * rng.normal();
    const double nu = s.spec.vg.nu;
    const double sp = s.spec.vg.sigma_p;
    const double p = kDailyDt / nu - 0.5;
    const double a = s.spec.vg.gamma_p * s.spec.vg.gamma_p / (sp * sp) + 2.0 / nu;
    const double b = s.xiY[t] * s.xiY[t] / (sp * sp);
    s.G[t] = std::max(sample_gig(p, a, b, rng), 1e-14);
}

/// Joint log-density of (J^Y_t, U_t) for the log-stable model: the
/// return-residual factor times the Buckle auxiliary representation.
inline double ls_day_logpi(const ChainState& s, const EstimationData& d, int t, double j,
                           double u, double comp) {
    const double alpha = s.spec.ls.alpha;
    const double split = u_branch_split(alpha);
    if (j < 0.0 && !(u > -0.5 && u < split)) return -std::numeric_limits<double>::infinity();
    if (j > 0.0 && !(u > split && u < 0.5)) return -std::numeric_limits<double>::infinity();
    if (j == 0.0) return -std::numeric_limits<double>::infinity();
    const double w = ls_w(j, u, alpha, s.spec.ls.sigma);
    if (!std::isfinite(w)) return -std::numeric_limits<double>::infinity();
    const double v = s.V[t];
    const double sv = s.spec.diffusion.sigma_v;
    const double rho = s.spec.diffusion.rho;
    const double r2 = 1.0 - rho * rho;
    const double g = ey_raw(s, d, t, comp, false);
    const double dv = ev_raw(s, t);
    const double ret_term = -j * (j - 2.0 * (g - rho * dv / sv)) / (2.0 * r2 * v * kDailyDt);
    return ret_term - w + std::log(w) - std::log(std::abs(j));
}

inline void update_ls_jumps_day(ChainState& s, const EstimationData& d, int t, double comp,
                                double step, Rng& rng) {
    const double alpha = s.spec.ls.alpha;
    const double split = u_branch_split(alpha);
    // Joint RW on J^Y with a fresh U draw when the proposal flips sign; the
    // uniform proposal densities contribute the branch-length ratio.
    const double j_old = s.xiY[t];
    const double j_new = j_old + step * rng.normal();
    double u_new = s.U[t];
    double lq = 0.0;
    if (j_new * j_old < 0.0) {
        const double lo = j_new < 0.0 ? -0.5 : split;
        const double hi = j_new < 0.0 ? split : 0.5;
        u_new = rng.uniform(lo, hi);
        const double len_new = hi - lo, len_old = 1.0 - len_new;
        lq = std::log(len_new) - std::log(len_old);
    }
    const double la = ls_day_logpi(s, d, t, j_new, u_new, comp) -
                      ls_day_logpi(s, d, t, j_old, s.U[t], comp) + lq;
    const double u_mh = rng.uniform();
    if (std::log(u_mh) < la) {
        s.xiY[t] = j_new;
        s.U[t] = u_new;
    }

    // U_t refresh: uniform draw on the branch, accepted with probability
    // f(U) = w e^{1-w} <= 1 (x e^{1-x} <= 1 for x >= 0); keep the old value
    // on rejection.
    const double lo = s.xiY[t] < 0.0 ? -0.5 : split;
    const double hi = s.xiY[t] < 0.0 ? split : 0.5;
    const double u_cand = rng.uniform(lo, hi);
    const double w = ls_w(s.xiY[t], u_cand, alpha, s.spec.ls.sigma);
    if (std::isfinite(w) && rng.uniform() < w * std::exp(1.0 - w)) s.U[t] = u_cand;
}

/// Log target for alpha: Buckle likelihood of (J, U) plus the prior on
/// sigma^{alpha/(alpha-1)} (with the sigma -> power Jacobian) on [1.01, 2].
inline double ls_alpha_logpi(const ChainState& s, const EstimationData& d, double alpha,
                             const PriorSet& priors) {
    if (alpha < 1.01 || alpha > 2.0) return -std::numeric_limits<double>::infinity();
    const int T = d.T();
    const double sigma = s.spec.ls.sigma;
    double ll = T * std::log(alpha / (alpha - 1.0));
    for (int t = 0; t < T; ++t) {
        const double w = ls_w(s.xiY[t], s.U[t], alpha, sigma);
        if (!std::isfinite(w) || w <= 0.0) return -std::numeric_limits<double>::infinity();
        ll += std::log(w) - w;
    }
    const double spow = std::pow(sigma, alpha / (alpha - 1.0));
    ll += log_prior_density(priors.at("sigma_ls_pow"), spow);
    ll += std::log(alpha / (alpha - 1.0)) + std::log(spow) - std::log(sigma); // d spow / d sigma
    return ll;
}

inline double ls_alpha_beta_logq(double alpha, double a, double b) {
    // Linearly transformed Beta density on [1.01, 2] up to the constant 1/0.99.
    const double x = (alpha - 1.01) / 0.99;
    if (x <= 0.0 || x >= 1.0) return -std::numeric_limits<double>::infinity();
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
           (b - 1.0) * std::log(1.0 - x);
}

inline bool mh_ls_alpha(ChainState& s, const EstimationData& d, const PriorSet& priors,
                        const QuadratureConfig& quad, Rng& rng) {
    const int T = d.T();
    const double total = 5.0 * std::log(static_cast<double>(std::max(T, 3)));
    const double a_fwd =
        std::max((s.spec.ls.alpha - 1.01) / 0.99 * (total - 2.0) + 1.0, 1e-3);
    const double b_fwd = std::max(total - a_fwd, 1e-3);
    const double varpi = rng.beta(a_fwd, b_fwd);
    const double cand = 0.99 * varpi + 1.01;
    const double a_bwd = std::max((cand - 1.01) / 0.99 * (total - 2.0) + 1.0, 1e-3);
    const double b_bwd = std::max(total - a_bwd, 1e-3);

    double la = ls_alpha_logpi(s, d, cand, priors) - ls_alpha_logpi(s, d, s.spec.ls.alpha, priors) +
                ls_alpha_beta_logq(s.spec.ls.alpha, a_bwd, b_bwd) -
                ls_alpha_beta_logq(cand, a_fwd, b_fwd);
    // alpha enters the pricing transform, so the option likelihood rides along.
    ChainState cand_state = s;
    cand_state.spec.ls.alpha = cand;
    if (d.has_options()) {
        try {
            reprice_all(cand_state, d, quad);
        } catch (const std::exception&) {
            return false;
        }
        la += option_loglik(d.C, cand_state.F, s.spec.perr.rho_c, s.spec.perr.sigma_c) -
              option_loglik(d.C, s.F, s.spec.perr.rho_c, s.spec.perr.sigma_c);
    }
    if (std::log(rng.uniform()) < la) {
        s.spec.ls.alpha = cand;
        s.F = cand_state.F;
        return true;
    }
    return false;
}

} // namespace mcmcdetail

// ---------------------------------------------------------------------------
// Likelihood summaries for model comparison
// ---------------------------------------------------------------------------

/// Conditional log-likelihood of the observed returns given the current
/// parameters and latent paths (transition factors of (Y, V)).
inline double return_loglik(const ChainState& s, const EstimationData& d) {
    const double comp = drift_compensator(s.spec);
    double ll = 0.0;
    for (int t = 0; t < d.T(); ++t) ll += mcmcdetail::day_loglik(s, d, t, comp);
    return ll;
}

namespace mcmcdetail {

/// Log-density of a zero-mean bivariate normal with variances var_y, var_v
/// and covariance cov, evaluated at (ey, ev).
inline double bvn_logpdf(double ey, double ev, double var_y, double var_v, double cov) {
    const double det = var_y * var_v - cov * cov;
    const double q = (var_v * ey * ey - 2.0 * cov * ey * ev + var_y * ev * ev) / det;
    return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * q;
}

inline double logsumexp2(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

} // namespace mcmcdetail

/// Returns log-likelihood with the day's jump occurrence and size integrated
/// out analytically, conditional only on the parameters and the variance
/// path. The jump day contributes a two-component normal mixture: with
/// probability lambda*dt the return residual picks up an independent
/// N(mu_j_p, sigma_j^2) shift, leaving the variance residual and the
/// Brownian correlation untouched. Exact for MJD, SV, and SVJ; the remaining
/// kinds have no closed-form day marginal and fall back to the
/// jump-conditional likelihood. Used for DIC, where a likelihood that is
/// conditional on imputed jump latents is not comparable across models with
/// different augmentation.
inline double marginal_return_loglik(const ChainState& s, const EstimationData& d) {
    const ModelKind kind = s.spec.kind;
    if (kind != ModelKind::MJD && kind != ModelKind::SV && kind != ModelKind::SVJ)
        return return_loglik(s, d);
    const double comp = drift_compensator(s.spec);
    const auto& p = s.spec.diffusion;
    const auto& j = s.spec.ajd;
    const double pj = std::clamp(j.lambda * kDailyDt, 0.0, 1.0 - 1e-12);
    const double sj2 = j.sigma_j * j.sigma_j;
    double ll = 0.0;
    for (int t = 0; t < d.T(); ++t) {
        const double v = s.vt(t);
        const double var_y = v * kDailyDt;
        const double ey = mcmcdetail::ey_raw(s, d, t, comp, /*with_jump=*/false);
        if (kind == ModelKind::MJD) {
            const double l0 = -0.5 * std::log(2.0 * M_PI * var_y) - 0.5 * ey * ey / var_y;
            if (pj <= 0.0) {
                ll += l0;
                continue;
            }
            const double e1 = ey - j.mu_j_p;
            const double v1 = var_y + sj2;
            const double l1 = -0.5 * std::log(2.0 * M_PI * v1) - 0.5 * e1 * e1 / v1;
            ll += mcmcdetail::logsumexp2(std::log1p(-pj) + l0, std::log(pj) + l1);
            continue;
        }
        const double ev = mcmcdetail::ev_raw(s, t, /*with_jump=*/false);
        const double var_v = p.sigma_v * p.sigma_v * var_y;
        const double cov = p.rho * p.sigma_v * var_y;
        const double l0 = mcmcdetail::bvn_logpdf(ey, ev, var_y, var_v, cov);
        if (kind == ModelKind::SV || pj <= 0.0) {
            ll += l0;
            continue;
        }
        const double l1 = mcmcdetail::bvn_logpdf(ey - j.mu_j_p, ev, var_y + sj2, var_v, cov);
        ll += mcmcdetail::logsumexp2(std::log1p(-pj) + l0, std::log(pj) + l1);
    }
    return ll;
}

// ---------------------------------------------------------------------------
// The Gibbs sweep and the chain driver
// ---------------------------------------------------------------------------

namespace mcmcdetail {

// Fixed block identifiers so that skipping inapplicable blocks cannot shift
// the substreams of the remaining ones.
enum BlockId : std::uint64_t {
    kKappa = 0, kTheta, kSigmaV, kRho, kJumpDays, kLambda, kMuJP, kSigmaJ,
    kMuV, kRhoJ, kGammaP, kSigmaP, kNu, kAlpha, kSigmaLs, kLatentV, kEtaS,
    kEtaV, kMuJQ, kGammaQ, kSigmaQ, kSigmaMjd, kRhoC, kSigmaC, kBlockCount
};

struct SweepContext {
    PriorSet priors;
    ChainConfig cfg;
    std::map<std::string, AcceptStat> ledger;
    std::map<std::string, AcceptStat> window; // burn-in tuning window
    double v_step_abs = 0.0;
    bool warn_pricing = false;

    bool frozen(const std::string& name) const { return cfg.frozen.count(name) > 0; }
    void record(const std::string& name, bool accepted) {
        auto bump = [&](std::map<std::string, AcceptStat>& m) {
            m[name].proposals += 1;
            m[name].accepts += accepted ? 1 : 0;
        };
        bump(ledger);
        bump(window);
    }
    void record_many(const std::string& name, long proposals, long accepts) {
        auto bump = [&](std::map<std::string, AcceptStat>& m) {
            m[name].proposals += proposals;
            m[name].accepts += accepts;
        };
        bump(ledger);
        bump(window);
    }
};

inline Rng block_rng(const Rng& root, int iter, BlockId id) {
    return root.substream(static_cast<std::uint64_t>(iter) * kBlockCount + id);
}

/// Finish the update of a parameter that moves model option prices. Without
/// option data the proposed value is an exact conditional draw and is applied
/// directly. With options the returns-side conditional acts as an
/// independence proposal for the full conditional, so the Metropolis ratio
/// reduces to the option-likelihood ratio of the repriced candidate.
inline void apply_price_sensitive(const std::string& name, double value, ChainState& s,
                                  const EstimationData& d, SweepContext& ctx, Rng& rng) {
    if (!d.has_options()) {
        set_param(s.spec, name, value);
        return;
    }
    ChainState cand = s;
    set_param(cand.spec, name, value);
    bool accepted = false;
    try {
        reprice_all(cand, d, ctx.cfg.quad);
        const double ll_new =
            option_loglik(d.C, cand.F, s.spec.perr.rho_c, s.spec.perr.sigma_c);
        const double ll_old =
            option_loglik(d.C, s.F, s.spec.perr.rho_c, s.spec.perr.sigma_c);
        accepted = std::log(rng.uniform()) < ll_new - ll_old;
    } catch (const std::exception&) {
        ctx.warn_pricing = true;
        rng.uniform(); // keep the per-block draw count branch-independent
    }
    if (accepted) {
        s.spec = cand.spec;
        s.F = std::move(cand.F);
    }
    ctx.record(name, accepted);
}

inline void draw_conj_normal(const std::string& name, NormalTarget target, bool trunc_pos,
                             ChainState& s, const EstimationData& d, SweepContext& ctx,
                             Rng rng, bool price_sensitive = false) {
    if (ctx.frozen(name)) return;
    const ConjAB ab = conditional_normal(target, s, d, ctx.priors);
    if (!std::isfinite(ab.a) || !std::isfinite(ab.b) || ab.b <= 0.0)
        throw std::runtime_error("conditional_normal: nonfinite state for " + name);
    const double mean = ab.a / ab.b, sd = std::sqrt(1.0 / ab.b);
    double value;
    if (trunc_pos) {
        // kappa additionally respects the Q-measure constraint kappa > eta_v.
        const double lb = name == "kappa" ? std::max(0.0, s.spec.premia.eta_v) : 0.0;
        value = trunc_normal_lb(mean, sd, lb, rng);
    } else {
        value = mean + sd * rng.normal();
        if (name == "rho_c") value = std::clamp(value, -0.999, 0.999);
    }
    if (price_sensitive)
        apply_price_sensitive(name, value, s, d, ctx, rng);
    else
        set_param(s.spec, name, value);
}

} // namespace mcmcdetail

/// One full pass through every block applicable to the model kind, in the
/// documented order: diffusion -> jumps -> latent variance -> risk premia ->
/// risk-neutral parameters -> pricing errors.
inline void gibbs_sweep(ChainState& s, const EstimationData& d, mcmcdetail::SweepContext& ctx,
                        const Rng& root, int iter) {
    using namespace mcmcdetail;
    const ModelKind kind = s.spec.kind;
    const bool has_vol = kind != ModelKind::MJD;
    const bool ajd_jumps = s.spec.has_ajd_jumps() && kind != ModelKind::SV;
    const auto step = [&](const std::string& name) { return ctx.cfg.steps.at(name); };

    // --- diffusion ---------------------------------------------------------
    if (has_vol) {
        draw_conj_normal("kappa", NormalTarget::Kappa, true, s, d, ctx,
                         block_rng(root, iter, kKappa), true);
        draw_conj_normal("theta", NormalTarget::Theta, true, s, d, ctx,
                         block_rng(root, iter, kTheta), true);
        if (!ctx.frozen("sigma_v")) {
            Rng rng = block_rng(root, iter, kSigmaV);
            bool warn = false;
            ctx.record("sigma_v", mh_sigma_v(s, d, ctx.priors, ctx.cfg.quad, rng, &warn));
            ctx.warn_pricing |= warn;
        }
        if (!ctx.frozen("rho")) {
            Rng rng = block_rng(root, iter, kRho);
            bool warn = false;
            ctx.record("rho", mh_rho(s, d, ctx.cfg.quad, rng, &warn));
            ctx.warn_pricing |= warn;
        }
    } else if (!ctx.frozen("sigma_mjd")) {
        Rng rng = block_rng(root, iter, kSigmaMjd);
        bool warn = false;
        ctx.record("sigma_mjd", mh_risk_neutral("sigma_mjd", s, d, ctx.priors, ctx.cfg.quad,
                                                step("sigma_mjd"), rng, &warn));
        ctx.warn_pricing |= warn;
    }

    // --- jumps -------------------------------------------------------------
    const double comp_after_diffusion = drift_compensator(s.spec);
    if (ajd_jumps) {
        Rng rng = block_rng(root, iter, kJumpDays);
        for (int t = 0; t < d.T(); ++t)
            update_ajd_jumps_day(s, d, t, comp_after_diffusion, rng);
        if (!ctx.frozen("lambda")) {
            Rng lrng = block_rng(root, iter, kLambda);
            const ConjAB ab = conditional_invgamma(InvGammaTarget::Lambda, s, d, ctx.priors);
            apply_price_sensitive("lambda", lrng.beta(ab.a, ab.b) / kDailyDt, s, d, ctx, lrng);
        }
        draw_conj_normal("mu_j_p", NormalTarget::MuJP, false, s, d, ctx,
                         block_rng(root, iter, kMuJP));
        if (!ctx.frozen("sigma_j")) {
            Rng srng = block_rng(root, iter, kSigmaJ);
            const ConjAB ab = conditional_invgamma(InvGammaTarget::SigmaJ2, s, d, ctx.priors);
            apply_price_sensitive("sigma_j", std::sqrt(srng.inv_gamma_ab(ab.a, ab.b)),
                                  s, d, ctx, srng);
        }
        if (kind == ModelKind::SVCJ && s.spec.ajd.mu_v != 0.0) {
            if (!ctx.frozen("mu_v")) {
                Rng mrng = block_rng(root, iter, kMuV);
                const ConjAB ab = conditional_invgamma(InvGammaTarget::MuV, s, d, ctx.priors);
                apply_price_sensitive("mu_v", mrng.inv_gamma_ab(ab.a, ab.b), s, d, ctx, mrng);
            }
            draw_conj_normal("rho_j", NormalTarget::RhoJ, false, s, d, ctx,
                             block_rng(root, iter, kRhoJ), true);
        }
    } else if (kind == ModelKind::SVVG) {
        Rng rng = block_rng(root, iter, kJumpDays);
        for (int t = 0; t < d.T(); ++t) update_vg_jumps_day(s, d, t, comp_after_diffusion, rng);
        draw_conj_normal("gamma_p", NormalTarget::GammaP, false, s, d, ctx,
                         block_rng(root, iter, kGammaP));
        if (!ctx.frozen("sigma_p")) {
            Rng srng = block_rng(root, iter, kSigmaP);
            const ConjAB ab = conditional_invgamma(InvGammaTarget::SigmaP2, s, d, ctx.priors);
            s.spec.vg.sigma_p = std::sqrt(srng.inv_gamma_ab(ab.a, ab.b));
        }
        if (!ctx.frozen("nu")) {
            Rng nrng = block_rng(root, iter, kNu);
            bool warn = false;
            ctx.record("nu", mh_risk_neutral("nu", s, d, ctx.priors, ctx.cfg.quad, step("nu"),
                                             nrng, &warn));
            ctx.warn_pricing |= warn;
        }
    } else if (kind == ModelKind::SVLS) {
        Rng rng = block_rng(root, iter, kJumpDays);
        const double jstep = step("jy_ls") * s.spec.ls.sigma *
                             std::pow(kDailyDt, 1.0 / s.spec.ls.alpha);
        for (int t = 0; t < d.T(); ++t)
            update_ls_jumps_day(s, d, t, comp_after_diffusion, jstep, rng);
        if (!ctx.frozen("alpha")) {
            Rng arng = block_rng(root, iter, kAlpha);
            ctx.record("alpha", mh_ls_alpha(s, d, ctx.priors, ctx.cfg.quad, arng));
        }
        if (!ctx.frozen("sigma_ls")) {
            Rng srng = block_rng(root, iter, kSigmaLs);
            const ConjAB ab = conditional_invgamma(InvGammaTarget::SigmaLsPow, s, d, ctx.priors);
            const double spow = srng.inv_gamma_ab(ab.a, ab.b);
            apply_price_sensitive(
                "sigma_ls", std::pow(spow, (s.spec.ls.alpha - 1.0) / s.spec.ls.alpha),
                s, d, ctx, srng);
        }
    }

    // --- latent variance (with a fresh price table) -------------------------
    std::optional<PriceTable> table;
    if (d.has_options()) table.emplace(reprice_all(s, d, ctx.cfg.quad));
    if (has_vol && !ctx.frozen("V")) {
        Rng rng = block_rng(root, iter, kLatentV);
        const auto [prop, acc] = update_latent_variance(
            s, d, table ? &*table : nullptr, ctx.v_step_abs, ctx.cfg.v_df, rng);
        ctx.record_many("V", prop, acc);
    }

    // --- risk premia --------------------------------------------------------
    draw_conj_normal("eta_s", NormalTarget::EtaS, false, s, d, ctx,
                     block_rng(root, iter, kEtaS));

    // --- risk-neutral parameters -------------------------------------------
    if (d.has_options()) {
        const auto q_block = [&](const std::string& name, BlockId id) {
            if (ctx.frozen(name)) return;
            Rng rng = block_rng(root, iter, id);
            bool warn = false;
            ctx.record(name, mh_risk_neutral(name, s, d, ctx.priors, ctx.cfg.quad, step(name),
                                             rng, &warn));
            ctx.warn_pricing |= warn;
        };
        if (has_vol) q_block("eta_v", kEtaV);
        if (ajd_jumps || kind == ModelKind::MJD) q_block("mu_j_q", kMuJQ);
        if (kind == ModelKind::SVVG) {
            q_block("gamma_q", kGammaQ);
            q_block("sigma_q", kSigmaQ);
        }
        // Refresh prices after the P-side conjugate moves of this sweep.
        table.emplace(reprice_all(s, d, ctx.cfg.quad));
    }

    // --- pricing errors -----------------------------------------------------
    if (d.has_options()) {
        draw_conj_normal("rho_c", NormalTarget::RhoC, false, s, d, ctx,
                         block_rng(root, iter, kRhoC));
        if (!ctx.frozen("sigma_c")) {
            Rng rng = block_rng(root, iter, kSigmaC);
            const ConjAB ab = conditional_invgamma(InvGammaTarget::SigmaC2, s, d, ctx.priors);
            s.spec.perr.sigma_c = std::sqrt(rng.inv_gamma_ab(ab.a, ab.b));
        }
        s.loglik_options = option_loglik(d.C, s.F, s.spec.perr.rho_c, s.spec.perr.sigma_c);
    }
}

inline ChainState init_chain_state(const ModelSpec& spec, const EstimationData& d) {
    ChainState s;
    s.spec = spec;
    const int T = d.T();
    if (spec.has_variance_process()) {
        // Rolling realized variance of demeaned returns (annualized). A
        // constant starting path would make the first sigma_v draw collapse
        // toward zero and strand the chain in a degenerate basin.
        const int w = 20;
        std::vector<double> dy(T);
        double ybar = 0.0;
        for (int t = 0; t < T; ++t) {
            dy[t] = d.Y[t + 1] - d.Y[t];
            ybar += dy[t];
        }
        ybar /= T;
        s.V.assign(T + 1, 0.0);
        for (int t = 0; t <= T; ++t) {
            const int lo = std::max(0, t - w), hi = std::min(T - 1, t + w);
            double acc = 0.0;
            for (int u = lo; u <= hi; ++u) acc += (dy[u] - ybar) * (dy[u] - ybar);
            s.V[t] = std::max(acc / ((hi - lo + 1) * kDailyDt), 1e-6);
        }
    } else {
        s.V.assign(T + 1, spec.sigma_mjd_q * spec.sigma_mjd_q);
    }
    s.N.assign(T, 0);
    s.xiY.assign(T, 0.0);
    s.xiV.assign(T, 0.0);
    s.G.assign(T, kDailyDt);
    s.U.assign(T, 0.0);
    if (spec.kind == ModelKind::SVLS) {
        const double comp = drift_compensator(spec);
        const double split = mcmcdetail::u_branch_split(spec.ls.alpha);
        for (int t = 0; t < T; ++t) {
            const double g = mcmcdetail::ey_raw(s, d, t, comp, false);
            const double sign = g < 0.0 ? -1.0 : 1.0;
            s.xiY[t] = sign * 1e-4;
            s.U[t] = sign < 0.0 ? 0.5 * (-0.5 + split) : 0.5 * (split + 0.5);
        }
    }
    if (spec.kind == ModelKind::SVJ || spec.kind == ModelKind::SVCJ ||
        spec.kind == ModelKind::MJD) {
        for (int t = 0; t < T; ++t) {
            s.xiV[t] = spec.kind == ModelKind::SVCJ ? spec.ajd.mu_v : 0.0;
            s.xiY[t] = spec.ajd.mu_j_p + spec.ajd.rho_j * s.xiV[t];
        }
    }
    return s;
}

inline PosteriorDraws run_chain(const ModelSpec& spec0, const EstimationData& data,
                                const PriorSet& priors, const ChainConfig& cfg) {
    using namespace mcmcdetail;
    data.validate();
    cfg.validate();
    const auto errs = validate_spec(spec0);
    if (!errs.empty()) throw std::invalid_argument("run_chain: " + errs.front());

    ChainState state = init_chain_state(spec0, data);
    SweepContext ctx;
    ctx.priors = priors;
    ctx.cfg = cfg;
    ctx.v_step_abs = cfg.v_scale *
                     (state.spec.has_variance_process() ? state.spec.diffusion.theta
                                                        : state.vt(0));
    if (data.has_options()) {
        reprice_all(state, data, cfg.quad);
        state.loglik_options =
            option_loglik(data.C, state.F, state.spec.perr.rho_c, state.spec.perr.sigma_c);
    }

    const Rng root = Rng(cfg.seed).substream(0x6D636D63ULL);
    PosteriorDraws out;
    out.param_names = chain_param_names(spec0.kind);
    const int T = data.T();
    out.v_mean.assign(T + 1, 0.0);
    out.jy_mean.assign(T, 0.0);
    out.jv_mean.assign(T, 0.0);

    for (int iter = 0; iter < cfg.n_iter; ++iter) {
        gibbs_sweep(state, data, ctx, root, iter);

        // Burn-in proposal tuning toward a 25-40% acceptance band, then frozen.
        if (cfg.auto_tune && iter < cfg.n_burnin && (iter + 1) % 100 == 0) {
            for (auto& [name, stat] : ctx.window) {
                if (stat.proposals == 0) continue;
                const double rate = stat.rate();
                double* target = nullptr;
                if (name == "V") target = &ctx.v_step_abs;
                else if (ctx.cfg.steps.count(name)) target = &ctx.cfg.steps[name];
                if (target != nullptr) {
                    if (rate > 0.40) *target *= 1.5;
                    else if (rate < 0.20) *target *= 0.6;
                }
            }
            ctx.window.clear();
        }

        if (iter >= cfg.n_burnin && (iter - cfg.n_burnin) % cfg.thin == 0) {
            std::vector<double> row;
            row.reserve(out.param_names.size());
            for (const auto& name : out.param_names) row.push_back(get_param(state.spec, name));
            out.draws.push_back(std::move(row));
            if (data.has_options()) out.price_draws.push_back(state.F);
            out.loglik_returns.push_back(return_loglik(state, data));
            out.loglik_returns_marginal.push_back(marginal_return_loglik(state, data));
            out.loglik_options.push_back(state.loglik_options);
            for (int t = 0; t <= T; ++t) out.v_mean[t] += state.V[t];
            for (int t = 0; t < T; ++t) {
                out.jy_mean[t] += state.jump_y(t);
                out.jv_mean[t] += state.jump_v(t);
            }
        }
    }

    const double n_ret = static_cast<double>(out.draws.size());
    for (auto& v : out.v_mean) v /= n_ret;
    for (auto& v : out.jy_mean) v /= n_ret;
    for (auto& v : out.jv_mean) v /= n_ret;
    out.acceptance = ctx.ledger;
    if (ctx.warn_pricing)
        out.warnings.push_back("pricing failure during a risk-neutral proposal (rejected)");
    for (const auto& [name, stat] : ctx.ledger) {
        if (stat.proposals >= 100 && (stat.rate() < 0.01 || stat.rate() > 0.99))
            out.warnings.push_back("non-mixing block " + name + ": acceptance rate " +
                                   std::to_string(stat.rate()));
    }

    // Returns log-likelihood at the posterior mean of parameters and latents.
    ChainState mean_state = state;
    mean_state.V = out.v_mean;
    for (std::size_t j = 0; j < out.param_names.size(); ++j) {
        double m = 0.0;
        for (const auto& row : out.draws) m += row[j];
        set_param(mean_state.spec, out.param_names[j], m / n_ret);
    }
    // Collapse the jump indicators into expected jumps for the plug-in value.
    for (int t = 0; t < T; ++t) {
        mean_state.N[t] = 1;
        mean_state.xiY[t] = out.jy_mean[t];
        mean_state.xiV[t] = out.jv_mean[t];
    }
    if (mean_state.spec.kind == ModelKind::SVLS || mean_state.spec.kind == ModelKind::SVVG)
        for (int t = 0; t < T; ++t) mean_state.xiY[t] = out.jy_mean[t];
    out.loglik_returns_at_mean = return_loglik(mean_state, data);
    out.loglik_returns_marginal_at_mean = marginal_return_loglik(mean_state, data);
    return out;
}

} // namespace modelrisk
