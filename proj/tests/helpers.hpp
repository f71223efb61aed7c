// Shared fixtures for the test suites: representative parameter sets for each
// model kind, at realistic magnitudes.
#pragma once

#include "modelrisk/models.hpp"

namespace testutil {

using namespace modelrisk;

inline ModelSpec sv_spec() {
    ModelSpec s;
    s.kind = ModelKind::SV;
    s.diffusion = {4.5557, 0.0347, 0.4667, -0.8173};
    s.premia = {2.0, -19.8169};
    s.perr = {0.92, 2.7};
    return s;
}

inline ModelSpec svj_spec() {
    ModelSpec s = sv_spec();
    s.kind = ModelKind::SVJ;
    s.ajd.lambda = 2.1108;
    s.ajd.mu_j_p = -0.05;
    s.ajd.mu_j_q = -0.0872;
    s.ajd.sigma_j = 0.0184;
    return s;
}

inline ModelSpec svcj_spec() {
    ModelSpec s = svj_spec();
    s.kind = ModelKind::SVCJ;
    s.ajd.mu_v = 0.0106;
    s.ajd.rho_j = -0.7;
    return s;
}

inline ModelSpec svvg_spec() {
    ModelSpec s = sv_spec();
    s.kind = ModelKind::SVVG;
    s.vg = {0.0264, -0.1, 0.9, -0.3185, 1.2652};
    return s;
}

inline ModelSpec svls_spec() {
    ModelSpec s = sv_spec();
    s.kind = ModelKind::SVLS;
    s.ls.alpha = 1.9268;
    s.ls.sigma = 0.48;
    return s;
}

inline ModelSpec mjd_spec() {
    ModelSpec s;
    s.kind = ModelKind::MJD;
    s.sigma_mjd_q = 0.15;
    s.ajd.lambda = 2.1108;
    s.ajd.mu_j_p = -0.05;
    s.ajd.mu_j_q = -0.0872;
    s.ajd.sigma_j = 0.0184;
    s.premia = {2.0, 0.0};
    s.perr = {0.92, 2.7};
    return s;
}

} // namespace testutil
