#pragma once

#include <utility>

#include "portsolve/operators.hpp"
#include "portsolve/splitting.hpp"

namespace portsolve {

/// The mixed-monotone zero-finding problem 0 in a1(v) + a2(v) - b(v) - drive:
/// two monotone paths and one anti-monotone path (-b), plus a port drive
/// (the zero signal for autonomous oscillators).
struct MixedProblem {
    OperatorSpec a1;
    OperatorSpec a2;
    OperatorSpec b;  // monotone, single-valued; entered positively, subtracted here
    Signal drive;

    MixedProblem(OperatorSpec a1_, OperatorSpec a2_, OperatorSpec b_, Signal drive_)
        : a1(std::move(a1_)), a2(std::move(a2_)), b(std::move(b_)), drive(std::move(drive_)) {
        if (!a1.declared_monotone() || !a2.declared_monotone())
            throw ValidationError("mixed problem needs declared-monotone a1 and a2");
        if (!b.declared_monotone())
            throw ValidationError(
                "mixed problem needs a declared-monotone b (it is entered positively "
                "and subtracted by the algorithm)");
    }
};

/// Zero-inclusion residual ||a1(x)+a2(x)-b(x)-drive|| on the evaluable
/// subspace (DC-pole paths see the zero-mean part of x and leave the DC
/// component of the inclusion unconstrained).
inline double mixed_residual(const MixedProblem& p, const Signal& x) {
    return detail::inclusion_residual({{&p.a1, 1.0}, {&p.a2, 1.0}, {&p.b, -1.0}}, x, p.drive);
}

/// Mixed-monotone Douglas-Rachford iteration:
///
///   x_{j+1} = res_{alpha*a2}(z_j)
///   y_{j+1} = b(x_{j+1})
///   z_{j+1} = T_alpha(a1 - y_{j+1} - drive, a2)(z_j)
///
/// stopping when ||x_{j+1} - x_j|| <= epsilon. z_1 is x_1 + alpha*a2(x_1),
/// which makes res_{alpha*a2}(z_1) reproduce x_1 exactly; the stopping test
/// is therefore armed only from the second pass (the first successive
/// distance is zero by construction).
inline SolveResult mmdr(const MixedProblem& p, const Signal& x1, const SolverConfig& cfg) {
    cfg.validate();
    check_compatible(x1, p.drive);
    const double a = cfg.alpha;

    SolveResult result;
    Signal x = x1;
    Signal z = x1 + a * apply(p.a2, x1);
    detail::require_finite_iterate(z);
    for (long j = 0; j < cfg.max_iter; ++j) {
        Signal xn = resolvent(p.a2, a, z);
        detail::require_finite_iterate(xn);
        const Signal y = apply(p.b, xn);
        const OperatorSpec a1_shifted =
            OperatorSpec::offset_output(p.a1, -(y + p.drive));
        // T_alpha(a1_shifted, a2)(z); res_{alpha*a2}(z) is xn, reuse it.
        const Signal reflected_a2 = 2.0 * xn - z;
        z = 0.5 * (z + cayley(a1_shifted, a, reflected_a2));
        detail::require_finite_iterate(z);

        const double step = norm(xn - x);
        result.residuals.push_back(step);
        x = std::move(xn);
        ++result.iterations;
        if (j >= 1 && step <= cfg.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.solution = std::move(x);
    result.fixed_point_residual = mixed_residual(p, result.solution);
    return result;
}

}  // namespace portsolve
