#pragma once

#include "portsolve/mixed.hpp"

namespace portsolve {

/// Van der Pol steady-state problem parameters. The period is data: the
/// limit-cycle period of v'' - mu(1-v^2)v' + v = 0 depends on mu and must
/// be supplied (or estimated; see vdp_default_period).
struct VdpParams {
    double mu = 1.5;
    double period_T = 7.0963736;
    Index n_samples = 5000;
    double amplitude_init = 2.0;

    void validate() const {
        if (!(mu > 0.0)) throw ValidationError("mu must be positive");
        if (n_samples < 2) throw ValidationError("need at least 2 samples");
        if (!(period_T > 0.0)) throw ValidationError("period must be positive");
    }
};

/// The van der Pol operators: a1 = (s^2+1)/s (lossless, DC-pole rule),
/// a2(v) = mu*v^3/3, b(v) = mu*v, autonomous (zero drive).
inline MixedProblem vdp_problem(const VdpParams& params) {
    params.validate();
    const double mu = params.mu;
    ArrayXd num(3), den(2);
    num << 1.0, 0.0, 1.0;
    den << 1.0, 0.0;
    return MixedProblem(
        OperatorSpec::lti(std::move(num), std::move(den)),
        OperatorSpec::static_nonlinearity([mu](double v) { return mu * v * v * v / 3.0; },
                                          [mu](double v) { return mu * v * v; }),
        OperatorSpec::gain(mu), Signal::zero(params.n_samples, params.period_T));
}

/// Runs mmdr on vdp_problem from the symmetry-breaking initial iterate
/// amplitude_init * sin(2*pi*t/T). Sets trivial_fixed_point when the
/// converged waveform collapsed to the zero equilibrium (norm < 1e-3),
/// which usually means the initialization or the period is wrong.
inline SolveResult vdp_solve(const VdpParams& params, const SolverConfig& cfg) {
    params.validate();
    const MixedProblem p = vdp_problem(params);
    const Signal x1 =
        Signal::sinusoid(params.n_samples, params.period_T, params.amplitude_init);
    SolveResult result = mmdr(p, x1, cfg);
    result.trivial_fixed_point = result.converged && norm(result.solution) < 1e-3;
    return result;
}

/// Limit-cycle period measured by RK4 integration to transient decay and
/// interpolated zero crossings.
double estimate_vdp_period(double mu);

/// Period for the demo values of mu, pinned from the RK4 oracle; other mu
/// fall back to estimate_vdp_period.
double vdp_default_period(double mu);

/// Optional refinement of the period: scans `points` candidates in
/// [T*(1-span), T*(1+span)] and keeps the one whose converged solve has the
/// smallest zero-inclusion residual. Returns {best params, best result}.
std::pair<VdpParams, SolveResult> vdp_scan_period(VdpParams params, const SolverConfig& cfg,
                                                  double span = 0.02, int points = 9);

}  // namespace portsolve
