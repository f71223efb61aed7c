// Risk-neutral characteristic function and the Fourier call-pricing
// integral, plus a cached fixed-node evaluator for repricing long daily
// series quickly inside the estimator.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "modelrisk/math_util.hpp"
#include "modelrisk/models.hpp"

namespace modelrisk {

struct PricingInputs {
    double Y0 = 0.0; // log spot
    double V0 = 0.0; // initial variance (ignored for MJD)
    double r = 0.0;  // annualized, continuously compounded
    double tau = 0.0;
    double K = 0.0;
};

struct QuadratureConfig {
    double u_max = 400.0;
    double abs_tol = 1e-9; // absolute tolerance as a fraction of spot
    double rel_tol = 1e-9;
    int max_panels = 4000;
};

struct CFTerms {
    Complex kappa_m;
    Complex delta;
    Complex b;
    Complex c;
};

namespace detail {

/// log of L(t) = 1 - dm (1 - e^{-delta t}) / (2 delta) where
/// dm = delta - kappa_m computed in its cancellation-free form. Near L = 1 a
/// log1p series keeps full relative precision (needed in the small-sigma_v
/// limit, where c divides by sigma_v^2); otherwise the phase is unwrapped by
/// walking t from 0 in steps small enough that the argument cannot rotate by
/// more than pi between evaluations.
inline Complex unwrapped_log_l(Complex delta, Complex dm, double t) {
    const auto z_at = [&](double s) {
        return -dm * (1.0 - std::exp(-delta * s)) / (2.0 * delta);
    };
    const Complex z = z_at(t);
    if (std::abs(z) < 1e-4) {
        return z * (1.0 - z * (0.5 - z * (1.0 / 3.0 - 0.25 * z)));
    }
    const int m = static_cast<int>(std::ceil(std::abs(delta.imag()) * t / M_PI)) + 1;
    double phase = 0.0;
    Complex l(1.0, 0.0);
    for (int k = 1; k <= m; ++k) {
        l = 1.0 + z_at(t * k / m);
        double a = std::arg(l);
        while (a - phase > M_PI) a -= 2.0 * M_PI;
        while (a - phase < -M_PI) a += 2.0 * M_PI;
        phase = a;
    }
    return Complex(std::log(std::abs(l)), phase);
}

} // namespace detail

inline CFTerms cf_terms(const ModelSpec& spec, double t, Complex u) {
    const double kq = spec.kappa_q();
    if (!(kq > 0.0))
        throw std::invalid_argument("cf_terms: kappa - eta_v must be positive");
    const DiffusionParams& d = spec.diffusion;
    const Complex iu = Complex(0.0, 1.0) * u;
    const Complex iu_u2 = iu + u * u;
    CFTerms out;
    const double sv2 = d.sigma_v * d.sigma_v;
    out.kappa_m = kq - iu * d.sigma_v * d.rho;
    out.delta = std::sqrt(out.kappa_m * out.kappa_m + iu_u2 * sv2);
    // delta - kappa_m without cancellation: (delta^2 - kappa_m^2)/(delta + kappa_m).
    const Complex dm = iu_u2 * sv2 / (out.delta + out.kappa_m);
    const Complex emdt = std::exp(-out.delta * t);
    out.b = iu_u2 * (1.0 - emdt) / ((out.delta + out.kappa_m) + dm * emdt);
    const Complex log_l = detail::unwrapped_log_l(out.delta, dm, t);
    out.c = d.kappa * d.theta / sv2 * (2.0 * log_l + dm * t);
    return out;
}

inline Complex characteristic_fn(const ModelSpec& spec, const PricingInputs& in, Complex u) {
    const Complex iu = Complex(0.0, 1.0) * u;
    const double comp = drift_compensator(spec);
    Complex log_phi = iu * in.Y0 + iu * (in.r + comp) * in.tau -
                      in.tau * jump_cf_component(spec, u);
    if (spec.kind == ModelKind::MJD) {
        const double s2 = spec.sigma_mjd_q * spec.sigma_mjd_q;
        log_phi -= 0.5 * (iu + u * u) * s2 * in.tau;
    } else {
        const CFTerms t = cf_terms(spec, in.tau, u);
        log_phi -= t.b * in.V0 + t.c;
    }
    return std::exp(log_phi);
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod 7/15 quadrature.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kKronrodNodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double kGaussWeights[4] = {0.129484966168870, 0.279705391489277,
                                            0.381830050505119, 0.417959183673469};

/// The 15 Kronrod abscissae of the panel [a, b], outermost first.
inline std::vector<double> kronrod_points(double a, double b) {
    const double mid = 0.5 * (a + b), hw = 0.5 * (b - a);
    std::vector<double> x;
    x.reserve(15);
    for (int i = 0; i < 7; ++i) {
        x.push_back(mid - hw * kKronrodNodes[i]);
        x.push_back(mid + hw * kKronrodNodes[i]);
    }
    x.push_back(mid);
    return x;
}

/// Kronrod estimate and |Kronrod - Gauss| error from 15 integrand values laid
/// out as kronrod_points orders them.
inline std::pair<double, double> gk15_from_values(double a, double b,
                                                  const std::vector<double>& f) {
    const double hw = 0.5 * (b - a);
    double kron = kKronrodWeights[7] * f[14];
    double gauss = kGaussWeights[3] * f[14];
    for (int i = 0; i < 7; ++i) {
        kron += kKronrodWeights[i] * (f[2 * i] + f[2 * i + 1]);
        if (i % 2 == 1) gauss += kGaussWeights[i / 2] * (f[2 * i] + f[2 * i + 1]);
    }
    return {hw * kron, hw * std::abs(kron - gauss)};
}

template <class F>
std::pair<double, double> gk15(const F& f, double a, double b) {
    const auto pts = kronrod_points(a, b);
    std::vector<double> v(15);
    for (int i = 0; i < 15; ++i) v[i] = f(pts[i]);
    return gk15_from_values(a, b, v);
}

} // namespace detail

/// Adaptive GK15 over [a, b] to absolute tolerance; returns (value, error
/// estimate). Throws if the panel budget is exhausted before convergence.
template <class F>
std::pair<double, double> integrate_adaptive(const F& f, double a, double b, double abs_tol,
                                             int max_panels = 4000) {
    struct Panel {
        double a, b, value, error;
    };
    std::vector<Panel> panels;
    const int n0 = 8;
    for (int i = 0; i < n0; ++i) {
        const double pa = a + (b - a) * i / n0;
        const double pb = a + (b - a) * (i + 1) / n0;
        const auto [v, e] = detail::gk15(f, pa, pb);
        panels.push_back({pa, pb, v, e});
    }
    for (;;) {
        double total_err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < panels.size(); ++i) {
            total_err += panels[i].error;
            if (panels[i].error > panels[worst].error) worst = i;
        }
        if (total_err <= abs_tol) break;
        if (static_cast<int>(panels.size()) >= max_panels)
            throw std::runtime_error("integrate_adaptive: quadrature did not converge");
        const Panel p = panels[worst];
        const double mid = 0.5 * (p.a + p.b);
        const auto [v1, e1] = detail::gk15(f, p.a, mid);
        const auto [v2, e2] = detail::gk15(f, mid, p.b);
        panels[worst] = {p.a, mid, v1, e1};
        panels.push_back({mid, p.b, v2, e2});
    }
    double value = 0.0, error = 0.0;
    for (const Panel& p : panels) {
        value += p.value;
        error += p.error;
    }
    return {value, error};
}

// ---------------------------------------------------------------------------
// Call pricing: F = e^{-r tau} phi(tau, -i)/2 + (e^{-r tau}/pi) *
// Re \int_0^umax e^{-ix lnK} phi(tau, x - i) / (-x^2 + ix) dx.
// The integration contour for the transformed payoff runs exactly through
// the pole of 1/(-x^2+ix) at the origin; the principal value picks up half
// the residue there, which is the phi(-i)/2 term (= S0 e^{r tau}/2 under the
// martingale property). The remaining x -> 0 singularity is removable in the
// real part, so the first panel starts just above zero.
// ---------------------------------------------------------------------------

struct PriceResult {
    double price = 0.0;
    double quad_error = 0.0;
};

inline PriceResult price_call_with_error(const ModelSpec& spec, const PricingInputs& in,
                                         const QuadratureConfig& quad = {}) {
    if (!(in.tau > 0.0) || !(in.K > 0.0))
        throw std::invalid_argument("price_call: tau and K must be positive");
    const double log_k = std::log(in.K);
    const double s0 = std::exp(in.Y0);
    const auto integrand = [&](double x) {
        const Complex u(x, -1.0);
        const Complex num =
            std::exp(Complex(0.0, -x) * log_k) * characteristic_fn(spec, in, u);
        const Complex den(-x * x, x);
        return (num / den).real();
    };
    const double tol = quad.abs_tol * s0 * M_PI / std::exp(-in.r * in.tau);
    const auto [value, error] =
        integrate_adaptive(integrand, 1e-10, quad.u_max, tol, quad.max_panels);
    const double scale = std::exp(-in.r * in.tau) / M_PI;
    const double half_residue =
        0.5 * std::exp(-in.r * in.tau) * characteristic_fn(spec, in, Complex(0.0, -1.0)).real();
    return {half_residue + scale * value, scale * error};
}

inline double price_call(const ModelSpec& spec, const PricingInputs& in,
                         const QuadratureConfig& quad = {}) {
    return price_call_with_error(spec, in, quad).price;
}

/// ATM-forward strike for a day: K = S e^{r tau}.
inline double atm_forward_strike(double spot, double r, double tau) {
    return spot * std::exp(r * tau);
}

/// Day-by-day pricing of the 30-day ATM-forward option series; literally a
/// loop of price_call so batch and single-day results agree bit for bit.
inline std::vector<double> price_series(const ModelSpec& spec, const std::vector<double>& Y,
                                        const std::vector<double>& V,
                                        const std::vector<double>& r, double tau = 30.0 / 252.0,
                                        const QuadratureConfig& quad = {}) {
    if (Y.size() != r.size() || (spec.kind != ModelKind::MJD && Y.size() != V.size()))
        throw std::invalid_argument("price_series: length mismatch");
    std::vector<double> out(Y.size());
    for (std::size_t t = 0; t < Y.size(); ++t) {
        const double spot = std::exp(Y[t]);
        PricingInputs in;
        in.Y0 = Y[t];
        in.V0 = spec.kind == ModelKind::MJD ? 0.0 : V[t];
        in.r = r[t];
        in.tau = tau;
        in.K = atm_forward_strike(spot, r[t], tau);
        out[t] = price_call(spec, in, quad);
    }
    return out;
}

// ---------------------------------------------------------------------------
// PriceTable: for the ATM-forward strike the price factors as F = S * g(V)
// with g independent of the day's spot and rate (the rate cancels between
// strike, drift and discounting). The table freezes a quadrature node set
// that is accurate across a set of probe variances and evaluates g(V) as a
// short sum of complex exponentials.
// ---------------------------------------------------------------------------

class PriceTable {
public:
    PriceTable(const ModelSpec& spec, double tau, std::vector<double> probe_vs,
               const QuadratureConfig& quad = {})
        : tau_(tau) {
        if (probe_vs.empty()) throw std::invalid_argument("PriceTable: need probe variances");
        for (double v : probe_vs)
            if (!(v > 0.0) && spec.kind != ModelKind::MJD)
                throw std::invalid_argument("PriceTable: probe variances must be positive");
        build(spec, probe_vs, quad);
    }

    /// g(V) = F / S at the ATM-forward strike.
    double price_ratio(double v) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < coeff_.size(); ++i)
            acc += (coeff_[i] * std::exp(-b_[i] * v)).real();
        return acc;
    }

    double price(double spot, double v) const { return spot * price_ratio(v); }
    double tau() const { return tau_; }
    std::size_t node_count() const { return coeff_.size(); }

private:
    struct Node {
        Complex w; // weight * day-independent integrand factor / pi
        Complex b; // variance exponent
    };
    struct Panel {
        double a, b;
        std::vector<Node> nodes; // 15 per panel, kronrod_points order
        double error = 0.0;      // max over probes of |GK - G|
    };

    void build(const ModelSpec& spec, const std::vector<double>& probes,
               const QuadratureConfig& quad) {
        const double comp = drift_compensator(spec);
        const auto make_node = [&](double x) {
            const Complex u(x, -1.0);
            Complex log_w = Complex(0.0, 1.0) * u * comp * tau_ -
                            tau_ * jump_cf_component(spec, u);
            Complex b(0.0, 0.0);
            if (spec.kind == ModelKind::MJD) {
                const double s2 = spec.sigma_mjd_q * spec.sigma_mjd_q;
                log_w -= 0.5 * (Complex(0.0, 1.0) * u + u * u) * s2 * tau_;
            } else {
                const CFTerms t = cf_terms(spec, tau_, u);
                log_w -= t.c;
                b = t.b;
            }
            return Node{std::exp(log_w) / (Complex(-x * x, x) * M_PI), b};
        };
        // Half-residue of the pricing contour at the origin: coefficient
        // exp(i u comp tau - tau Phi_J(u) - c) / 2 at u = -i, where b(tau,-i)
        // vanishes because iu + u^2 does.
        {
            const Complex u(0.0, -1.0);
            Complex log_w = Complex(0.0, 1.0) * u * comp * tau_ -
                            tau_ * jump_cf_component(spec, u);
            Complex b(0.0, 0.0);
            if (spec.kind == ModelKind::MJD) {
                const double s2 = spec.sigma_mjd_q * spec.sigma_mjd_q;
                log_w -= 0.5 * (Complex(0.0, 1.0) * u + u * u) * s2 * tau_;
            } else {
                const CFTerms t = cf_terms(spec, tau_, u);
                log_w -= t.c;
                b = t.b;
            }
            coeff_.push_back(0.5 * std::exp(log_w));
            b_.push_back(b);
        }
        const auto fill_panel = [&](Panel& p) {
            p.nodes.clear();
            for (double x : detail::kronrod_points(p.a, p.b)) p.nodes.push_back(make_node(x));
            p.error = 0.0;
            for (double v : probes) {
                std::vector<double> f(15);
                for (int i = 0; i < 15; ++i)
                    f[i] = (p.nodes[i].w * std::exp(-p.nodes[i].b * v)).real();
                p.error = std::max(p.error, detail::gk15_from_values(p.a, p.b, f).second);
            }
        };
        std::vector<Panel> panels;
        const int n0 = 8;
        for (int i = 0; i < n0; ++i) {
            Panel p;
            p.a = 1e-10 + (quad.u_max - 1e-10) * i / n0;
            p.b = 1e-10 + (quad.u_max - 1e-10) * (i + 1) / n0;
            fill_panel(p);
            panels.push_back(std::move(p));
        }
        const double tol = quad.abs_tol; // tolerance on F/S
        for (;;) {
            double total = 0.0;
            std::size_t worst = 0;
            for (std::size_t i = 0; i < panels.size(); ++i) {
                total += panels[i].error;
                if (panels[i].error > panels[worst].error) worst = i;
            }
            if (total <= tol) break;
            if (static_cast<int>(panels.size()) >= quad.max_panels)
                throw std::runtime_error("PriceTable: quadrature did not converge");
            Panel hi = panels[worst];
            Panel lo;
            lo.a = hi.a;
            lo.b = 0.5 * (hi.a + hi.b);
            hi.a = lo.b;
            fill_panel(lo);
            fill_panel(hi);
            panels[worst] = std::move(lo);
            panels.push_back(std::move(hi));
        }
        std::sort(panels.begin(), panels.end(),
                  [](const Panel& x, const Panel& y) { return x.a < y.a; });
        for (const Panel& p : panels) {
            const double hw = 0.5 * (p.b - p.a);
            for (int i = 0; i < 15; ++i) {
                const double wt =
                    i == 14 ? detail::kKronrodWeights[7] : detail::kKronrodWeights[i / 2];
                coeff_.push_back(p.nodes[i].w * (wt * hw));
                b_.push_back(p.nodes[i].b);
            }
        }
    }

    double tau_;
    std::vector<Complex> coeff_;
    std::vector<Complex> b_;
};

} // namespace modelrisk
