// Model definitions: parameter spaces for the six pricing models, their
// default priors, the jump components of the characteristic function, and a
// flat key-value config format for specs and priors.
#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "modelrisk/math_util.hpp"

namespace modelrisk {

using Complex = std::complex<double>;

enum class ModelKind { MJD, SV, SVJ, SVCJ, SVVG, SVLS };

inline std::string to_string(ModelKind k) {
    switch (k) {
    case ModelKind::MJD: return "MJD";
    case ModelKind::SV: return "SV";
    case ModelKind::SVJ: return "SVJ";
    case ModelKind::SVCJ: return "SVCJ";
    case ModelKind::SVVG: return "SVVG";
    case ModelKind::SVLS: return "SVLS";
    }
    throw std::logic_error("to_string(ModelKind): unreachable");
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "MJD") return ModelKind::MJD;
    if (s == "SV") return ModelKind::SV;
    if (s == "SVJ") return ModelKind::SVJ;
    if (s == "SVCJ") return ModelKind::SVCJ;
    if (s == "SVVG") return ModelKind::SVVG;
    if (s == "SVLS") return ModelKind::SVLS;
    throw std::invalid_argument("unknown model kind: " + s);
}

/// Square-root variance process parameters (annualized).
struct DiffusionParams {
    double kappa = 0.0;   // mean-reversion speed (1/year)
    double theta = 0.0;   // long-run variance
    double sigma_v = 0.0; // vol of vol
    double rho = 0.0;     // Brownian correlation
};

/// Compound-Poisson jump parameters shared by MJD, SVJ and SVCJ. The
/// intensity is annualized; per-day jump probability is lambda * dt, capped
/// at one jump per day.
struct AJDJumpParams {
    double lambda = 0.0;
    double mu_j_p = 0.0;
    double mu_j_q = 0.0;
    double sigma_j = 0.0;
    double mu_v = 0.0;  // SVCJ only
    double rho_j = 0.0; // SVCJ only
};

/// Variance-gamma jump parameters; nu is common to both measures.
struct VGJumpParams {
    double nu = 0.0;
    double gamma_p = 0.0;
    double sigma_p = 0.0;
    double gamma_q = 0.0;
    double sigma_q = 0.0;
};

/// Log-stable jump parameters. The skew and location are pinned by the
/// finite-moment convention (beta = -1, location 0) so that the exponential
/// moment used in pricing stays finite.
struct LSJumpParams {
    double alpha = 0.0;
    double sigma = 0.0;
    static constexpr double beta_fixed = -1.0;
    static constexpr double gamma_loc_fixed = 0.0;
};

/// Market prices of risk. The risk-neutral reversion is kappa - eta_v and
/// must stay positive for the characteristic function to exist.
struct RiskPremia {
    double eta_s = 0.0;
    double eta_v = 0.0;
};

/// AR(1) Gaussian law of the option pricing errors C_t - F_t.
struct PricingErrorParams {
    double rho_c = 0.0;
    double sigma_c = 0.0; // index points
};

struct ModelSpec {
    ModelKind kind = ModelKind::SV;
    DiffusionParams diffusion;
    AJDJumpParams ajd;
    VGJumpParams vg;
    LSJumpParams ls;
    RiskPremia premia;
    PricingErrorParams perr;
    double sigma_mjd_q = 0.0; // MJD constant Q-volatility

    bool has_variance_process() const { return kind != ModelKind::MJD; }
    bool has_ajd_jumps() const {
        return kind == ModelKind::MJD || kind == ModelKind::SVJ || kind == ModelKind::SVCJ;
    }
    double kappa_q() const { return diffusion.kappa - premia.eta_v; }
    double theta_q() const { return diffusion.kappa * diffusion.theta / kappa_q(); }
};

// ---------------------------------------------------------------------------
// Jump characteristic component Phi_J(u): the jump factor of the Q-measure
// characteristic function is exp(-t * Phi_J(u)), and Phi_J(-i) is the drift
// compensator.
// ---------------------------------------------------------------------------

inline Complex jump_cf_component(const ModelSpec& spec, Complex u) {
    const Complex iu = Complex(0.0, 1.0) * u;
    switch (spec.kind) {
    case ModelKind::SV:
        return Complex(0.0, 0.0);
    case ModelKind::MJD:
    case ModelKind::SVJ:
    case ModelKind::SVCJ: {
        const AJDJumpParams& j = spec.ajd;
        if (j.lambda == 0.0) return Complex(0.0, 0.0);
        const Complex num = std::exp(iu * j.mu_j_q - 0.5 * j.sigma_j * j.sigma_j * u * u);
        const Complex den = 1.0 - iu * j.mu_v * j.rho_j;
        return j.lambda * (1.0 - num / den);
    }
    case ModelKind::SVVG: {
        const VGJumpParams& j = spec.vg;
        const Complex arg =
            1.0 - iu * j.gamma_q * j.nu + 0.5 * j.sigma_q * j.sigma_q * j.nu * u * u;
        if (arg.real() <= 0.0)
            throw std::domain_error("jump_cf_component: VG log argument crosses the branch cut");
        return std::log(arg) / j.nu;
    }
    case ModelKind::SVLS: {
        const LSJumpParams& j = spec.ls;
        if (j.sigma == 0.0) return Complex(0.0, 0.0);
        // Finite-moment log-stable exponent (sigma*i*u)^alpha * sec(pi*alpha/2);
        // on the real axis this is (sigma|u|)^alpha (1 + i sign(u) tan(pi*alpha/2)).
        const Complex base = iu * j.sigma;
        if (base.imag() == 0.0 && base.real() <= 0.0 && !(base.real() == 0.0 && base.imag() == 0.0))
            throw std::domain_error("jump_cf_component: stable power on the branch cut");
        if (u == Complex(0.0, 0.0)) return Complex(0.0, 0.0);
        const double sec = 1.0 / std::cos(0.5 * M_PI * j.alpha);
        return std::pow(base, j.alpha) * sec;
    }
    }
    throw std::logic_error("jump_cf_component: unreachable");
}

/// Phi_J(-i), the martingale drift correction. Real by construction.
inline double drift_compensator(const ModelSpec& spec) {
    const Complex v = jump_cf_component(spec, Complex(0.0, -1.0));
    if (std::abs(v.imag()) > 1e-12)
        throw std::domain_error("drift_compensator: nonreal value");
    return v.real();
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline std::vector<std::string> validate_spec(const ModelSpec& spec) {
    std::vector<std::string> v;
    auto require = [&v](bool ok, const std::string& msg) {
        if (!ok) v.push_back(msg);
    };
    if (spec.has_variance_process()) {
        require(spec.diffusion.kappa > 0.0, "kappa must be positive");
        require(spec.diffusion.theta > 0.0, "theta must be positive");
        require(spec.diffusion.sigma_v > 0.0, "sigma_v must be positive");
        require(spec.diffusion.rho > -1.0 && spec.diffusion.rho < 1.0,
                "rho must lie in (-1, 1)");
        require(spec.kappa_q() > 0.0,
                "kappa - eta_v must be positive (Q-measure mean reversion)");
    } else {
        require(spec.sigma_mjd_q > 0.0, "sigma_mjd_q must be positive");
    }
    if (spec.has_ajd_jumps() && spec.ajd.lambda != 0.0) {
        require(spec.ajd.lambda >= 0.0 && spec.ajd.lambda * kDailyDt <= 1.0,
                "lambda scaled by dt must lie in [0, 1] (one jump per day)");
        require(spec.ajd.sigma_j > 0.0, "sigma_j must be positive");
        require(spec.ajd.mu_v >= 0.0, "mu_v must be nonnegative");
    }
    if (spec.kind == ModelKind::SVVG) {
        require(spec.vg.nu > 0.0, "nu must be positive");
        require(spec.vg.sigma_p > 0.0, "sigma_p must be positive");
        require(spec.vg.sigma_q > 0.0, "sigma_q must be positive");
    }
    if (spec.kind == ModelKind::SVLS) {
        require(spec.ls.alpha > 1.0 && spec.ls.alpha <= 2.0, "alpha must lie in (1, 2]");
        require(spec.ls.sigma > 0.0, "ls sigma must be positive");
    }
    require(std::abs(spec.perr.rho_c) < 1.0, "rho_c must lie in (-1, 1)");
    require(spec.perr.sigma_c > 0.0, "sigma_c must be positive");
    return v;
}

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

enum class PriorFamily {
    Normal,          // (mean, variance)
    TruncNormalPos,  // (mean, variance), restricted to positive values
    InvGammaAB,      // (A, B): density ~ x^{-(A+2)/2} exp(-B/(2x))
    Beta,            // (a, b)
    Uniform          // (lo, hi)
};

struct Prior {
    PriorFamily family = PriorFamily::Normal;
    double a = 0.0;
    double b = 1.0;
};

/// One prior per parameter, keyed by name. Defaults reproduce the
/// conditionally conjugate set used by the estimator.
struct PriorSet {
    std::map<std::string, Prior> priors;

    const Prior& at(const std::string& name) const {
        auto it = priors.find(name);
        if (it == priors.end()) throw std::invalid_argument("no prior for parameter: " + name);
        return it->second;
    }

    static PriorSet defaults() {
        PriorSet p;
        auto set = [&p](const std::string& n, PriorFamily f, double a, double b) {
            p.priors[n] = Prior{f, a, b};
        };
        set("kappa", PriorFamily::TruncNormalPos, 0.0, 1.0);
        set("theta", PriorFamily::TruncNormalPos, 0.0, 1.0);
        set("rho", PriorFamily::Uniform, -1.0, 1.0);
        set("sigma_v2", PriorFamily::InvGammaAB, 2.5, 0.1);
        set("eta_s", PriorFamily::Normal, 0.0, 100.0);
        set("eta_v", PriorFamily::Normal, 0.0, 100.0);
        set("rho_c", PriorFamily::Normal, 0.0, 1.0);
        set("sigma_c2", PriorFamily::InvGammaAB, 2.5, 0.1);
        set("mu_j_p", PriorFamily::Normal, 0.0, 100.0);
        set("mu_j_q", PriorFamily::Normal, 0.0, 100.0);
        set("sigma_j2", PriorFamily::InvGammaAB, 10.0, 40.0);
        set("lambda", PriorFamily::Beta, 2.0, 40.0); // daily jump probability
        set("mu_v", PriorFamily::InvGammaAB, 10.0, 20.0);
        set("rho_j", PriorFamily::Normal, 0.0, 4.0);
        set("gamma_p", PriorFamily::Normal, 0.0, 1.0);
        set("gamma_q", PriorFamily::Normal, 0.0, 1.0);
        set("nu", PriorFamily::InvGammaAB, 10.0, 20.0);
        set("sigma_p2", PriorFamily::InvGammaAB, 2.5, 0.1);
        set("sigma_q2", PriorFamily::InvGammaAB, 2.5, 0.1);
        set("alpha", PriorFamily::Uniform, 1.0, 2.0);
        set("sigma_ls_pow", PriorFamily::InvGammaAB, 2.5, 0.1); // sigma^{alpha/(alpha-1)}
        set("sigma_mjd_q2", PriorFamily::InvGammaAB, 2.5, 0.1);
        return p;
    }
};

/// Unnormalized log prior density.
inline double log_prior_density(const Prior& p, double x) {
    switch (p.family) {
    case PriorFamily::Normal:
        return -0.5 * (x - p.a) * (x - p.a) / p.b;
    case PriorFamily::TruncNormalPos:
        if (x <= 0.0) return -std::numeric_limits<double>::infinity();
        return -0.5 * (x - p.a) * (x - p.a) / p.b;
    case PriorFamily::InvGammaAB:
        if (x <= 0.0) return -std::numeric_limits<double>::infinity();
        return -0.5 * (p.a + 2.0) * std::log(x) - 0.5 * p.b / x;
    case PriorFamily::Beta:
        if (x <= 0.0 || x >= 1.0) return -std::numeric_limits<double>::infinity();
        return (p.a - 1.0) * std::log(x) + (p.b - 1.0) * std::log(1.0 - x);
    case PriorFamily::Uniform:
        if (x < p.a || x > p.b) return -std::numeric_limits<double>::infinity();
        return 0.0;
    }
    throw std::logic_error("log_prior_density: unreachable");
}

// ---------------------------------------------------------------------------
// Flat key-value config serialization: one "group.name = value" per line,
// '#' starts a comment, unknown keys are errors.
// ---------------------------------------------------------------------------

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config(const std::string& text) {
    ConfigMap cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": empty key or value");
        if (cfg.count(key))
            throw std::invalid_argument("config: duplicate key " + key);
        cfg[key] = value;
    }
    return cfg;
}

namespace detail {

inline std::vector<std::string> spec_keys(ModelKind kind) {
    std::vector<std::string> keys = {"model.kind", "premia.eta_s", "perr.rho_c", "perr.sigma_c"};
    if (kind != ModelKind::MJD) {
        for (const char* k : {"diffusion.kappa", "diffusion.theta", "diffusion.sigma_v",
                              "diffusion.rho", "premia.eta_v"})
            keys.push_back(k);
    } else {
        keys.push_back("mjd.sigma_q");
    }
    if (kind == ModelKind::MJD || kind == ModelKind::SVJ || kind == ModelKind::SVCJ) {
        for (const char* k : {"jumps.lambda", "jumps.mu_j_p", "jumps.mu_j_q", "jumps.sigma_j"})
            keys.push_back(k);
    }
    if (kind == ModelKind::SVCJ) {
        keys.push_back("jumps.mu_v");
        keys.push_back("jumps.rho_j");
    }
    if (kind == ModelKind::SVVG) {
        for (const char* k : {"vg.nu", "vg.gamma_p", "vg.sigma_p", "vg.gamma_q", "vg.sigma_q"})
            keys.push_back(k);
    }
    if (kind == ModelKind::SVLS) {
        keys.push_back("ls.alpha");
        keys.push_back("ls.sigma");
    }
    return keys;
}

inline double parse_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double x;
    try {
        x = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad numeric value for " + key);
    }
    if (pos != value.size())
        throw std::invalid_argument("config: bad numeric value for " + key);
    return x;
}

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace detail

inline ModelSpec model_spec_from_config(const ConfigMap& cfg) {
    auto it = cfg.find("model.kind");
    if (it == cfg.end()) throw std::invalid_argument("config: missing model.kind");
    ModelSpec spec;
    spec.kind = model_kind_from_string(it->second);
    const auto keys = detail::spec_keys(spec.kind);
    for (const auto& [key, value] : cfg) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw std::invalid_argument("config: unknown key " + key + " for model " +
                                        to_string(spec.kind));
    }
    auto get = [&cfg](const std::string& key) -> std::optional<double> {
        auto j = cfg.find(key);
        if (j == cfg.end()) return std::nullopt;
        return detail::parse_double(key, j->second);
    };
    auto need = [&get](const std::string& key) {
        auto v = get(key);
        if (!v) throw std::invalid_argument("config: missing key " + key);
        return *v;
    };
    spec.premia.eta_s = need("premia.eta_s");
    spec.perr.rho_c = need("perr.rho_c");
    spec.perr.sigma_c = need("perr.sigma_c");
    if (spec.kind == ModelKind::MJD) {
        spec.sigma_mjd_q = need("mjd.sigma_q");
    } else {
        spec.diffusion.kappa = need("diffusion.kappa");
        spec.diffusion.theta = need("diffusion.theta");
        spec.diffusion.sigma_v = need("diffusion.sigma_v");
        spec.diffusion.rho = need("diffusion.rho");
        spec.premia.eta_v = need("premia.eta_v");
    }
    if (spec.has_ajd_jumps()) {
        spec.ajd.lambda = need("jumps.lambda");
        spec.ajd.mu_j_p = need("jumps.mu_j_p");
        spec.ajd.mu_j_q = need("jumps.mu_j_q");
        spec.ajd.sigma_j = need("jumps.sigma_j");
        if (spec.kind == ModelKind::SVCJ) {
            spec.ajd.mu_v = need("jumps.mu_v");
            spec.ajd.rho_j = need("jumps.rho_j");
        }
    }
    if (spec.kind == ModelKind::SVVG) {
        spec.vg.nu = need("vg.nu");
        spec.vg.gamma_p = need("vg.gamma_p");
        spec.vg.sigma_p = need("vg.sigma_p");
        spec.vg.gamma_q = need("vg.gamma_q");
        spec.vg.sigma_q = need("vg.sigma_q");
    }
    if (spec.kind == ModelKind::SVLS) {
        spec.ls.alpha = need("ls.alpha");
        spec.ls.sigma = need("ls.sigma");
    }
    return spec;
}

inline std::string model_spec_to_config(const ModelSpec& spec) {
    std::ostringstream out;
    out << "model.kind = " << to_string(spec.kind) << "\n";
    auto put = [&out](const std::string& key, double v) {
        out << key << " = " << detail::format_double(v) << "\n";
    };
    if (spec.kind == ModelKind::MJD) {
        put("mjd.sigma_q", spec.sigma_mjd_q);
    } else {
        put("diffusion.kappa", spec.diffusion.kappa);
        put("diffusion.theta", spec.diffusion.theta);
        put("diffusion.sigma_v", spec.diffusion.sigma_v);
        put("diffusion.rho", spec.diffusion.rho);
    }
    if (spec.has_ajd_jumps()) {
        put("jumps.lambda", spec.ajd.lambda);
        put("jumps.mu_j_p", spec.ajd.mu_j_p);
        put("jumps.mu_j_q", spec.ajd.mu_j_q);
        put("jumps.sigma_j", spec.ajd.sigma_j);
        if (spec.kind == ModelKind::SVCJ) {
            put("jumps.mu_v", spec.ajd.mu_v);
            put("jumps.rho_j", spec.ajd.rho_j);
        }
    }
    if (spec.kind == ModelKind::SVVG) {
        put("vg.nu", spec.vg.nu);
        put("vg.gamma_p", spec.vg.gamma_p);
        put("vg.sigma_p", spec.vg.sigma_p);
        put("vg.gamma_q", spec.vg.gamma_q);
        put("vg.sigma_q", spec.vg.sigma_q);
    }
    if (spec.kind == ModelKind::SVLS) {
        put("ls.alpha", spec.ls.alpha);
        put("ls.sigma", spec.ls.sigma);
    }
    put("premia.eta_s", spec.premia.eta_s);
    if (spec.kind != ModelKind::MJD) put("premia.eta_v", spec.premia.eta_v);
    put("perr.rho_c", spec.perr.rho_c);
    put("perr.sigma_c", spec.perr.sigma_c);
    return out.str();
}

inline std::string prior_family_name(PriorFamily f) {
    switch (f) {
    case PriorFamily::Normal: return "normal";
    case PriorFamily::TruncNormalPos: return "truncnormal";
    case PriorFamily::InvGammaAB: return "invgamma";
    case PriorFamily::Beta: return "beta";
    case PriorFamily::Uniform: return "uniform";
    }
    throw std::logic_error("prior_family_name: unreachable");
}

inline PriorSet prior_set_from_config(const ConfigMap& cfg) {
    PriorSet p = PriorSet::defaults();
    for (const auto& [key, value] : cfg) {
        if (key.rfind("prior.", 0) != 0)
            throw std::invalid_argument("prior config: unknown key " + key);
        const std::string name = key.substr(6);
        if (!p.priors.count(name))
            throw std::invalid_argument("prior config: unknown parameter " + name);
        const auto open = value.find('(');
        const auto comma = value.find(',');
        const auto close = value.find(')');
        if (open == std::string::npos || comma == std::string::npos ||
            close == std::string::npos || !(open < comma && comma < close))
            throw std::invalid_argument("prior config: expected family(a,b) for " + name);
        const std::string fam = value.substr(0, open);
        Prior prior;
        if (fam == "normal") prior.family = PriorFamily::Normal;
        else if (fam == "truncnormal") prior.family = PriorFamily::TruncNormalPos;
        else if (fam == "invgamma") prior.family = PriorFamily::InvGammaAB;
        else if (fam == "beta") prior.family = PriorFamily::Beta;
        else if (fam == "uniform") prior.family = PriorFamily::Uniform;
        else throw std::invalid_argument("prior config: unknown family " + fam);
        prior.a = detail::parse_double(key, value.substr(open + 1, comma - open - 1));
        prior.b = detail::parse_double(key, value.substr(comma + 1, close - comma - 1));
        p.priors[name] = prior;
    }
    return p;
}

inline std::string prior_set_to_config(const PriorSet& p) {
    std::ostringstream out;
    for (const auto& [name, prior] : p.priors) {
        out << "prior." << name << " = " << prior_family_name(prior.family) << "("
            << detail::format_double(prior.a) << "," << detail::format_double(prior.b) << ")\n";
    }
    return out.str();
}

} // namespace modelrisk
