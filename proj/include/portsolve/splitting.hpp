#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <variant>
#include <vector>

#include "portsolve/operators.hpp"
#include "portsolve/signal.hpp"

namespace portsolve {

struct InitZero {};
struct InitConstant {
    double value = 0.0;
};
struct InitSinusoid {
    double amplitude = 1.0;
    int harmonic = 1;
};
/// Zero / constant / sinusoid / user-supplied initial iterate.
using InitPolicy = std::variant<InitZero, InitConstant, InitSinusoid, Signal>;

/// Step sizes, stopping tolerance and iteration budget shared by every
/// fixed-point driver. `level_alphas` addresses nested solves: entry 0 is
/// the innermost level; levels past the end fall back to `alpha`.
struct SolverConfig {
    double alpha = 0.1;
    std::vector<double> level_alphas;
    double epsilon = 1e-6;
    long max_iter = 10000;
    InitPolicy init = InitZero{};

    double alpha_for_level(std::size_t level) const {
        return level < level_alphas.size() ? level_alphas[level] : alpha;
    }

    Signal make_initial(Index n, double T) const {
        return std::visit(
            [&](const auto& p) -> Signal {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, InitZero>) return Signal::zero(n, T);
                if constexpr (std::is_same_v<P, InitConstant>)
                    return Signal::constant(n, T, p.value);
                if constexpr (std::is_same_v<P, InitSinusoid>)
                    return Signal::sinusoid(n, T, p.amplitude, p.harmonic);
                if constexpr (std::is_same_v<P, Signal>) {
                    if (p.size() != n || p.period_T != T)
                        throw LengthMismatch("user initial iterate is on the wrong grid");
                    return p;
                }
            },
            init);
    }

    void validate() const {
        if (!(alpha > 0.0)) throw ValidationError("step size alpha must be positive");
        for (double a : level_alphas)
            if (!(a > 0.0)) throw ValidationError("every level step size must be positive");
        if (!(epsilon > 0.0)) throw ValidationError("tolerance epsilon must be positive");
        if (max_iter < 1) throw ValidationError("max_iter must be at least 1");
    }
};

struct SolveResult {
    Signal solution;
    /// Nested solves: one auxiliary port variable per inverse node,
    /// innermost first. Empty for flat solves.
    std::vector<Signal> auxiliaries;
    long iterations = 0;
    /// ||x_{j+1} - x_j|| per iteration, in the l_{2,T} norm.
    std::vector<double> residuals;
    bool converged = false;
    /// Problem-specific verification residual (e.g. the zero-inclusion
    /// residual at the returned solution); NaN when not evaluable.
    double fixed_point_residual = std::numeric_limits<double>::quiet_NaN();
    /// Resolvent evaluations spent (nested/naive circuit solvers).
    long resolvent_evals = 0;
    /// Oscillator solves: converged to the zero equilibrium.
    bool trivial_fixed_point = false;
};

namespace detail {
// NaN/Inf, or magnitudes past any meaningful scale, both read as divergence.
inline void require_finite_iterate(const Signal& x) {
    if (!all_finite(x) || x.samples.abs().maxCoeff() > 1e150)
        throw NonFinite("fixed-point iterate diverged (non-finite or overflowing)");
}
}  // namespace detail

/// Iterates x <- map(x) until ||x_{j+1} - x_j|| <= epsilon or max_iter.
/// Exceeding the iteration cap is not an error: the result comes back with
/// converged=false. Divergence (NaN/Inf iterates) throws NonFinite.
template <class Map>
SolveResult fixed_point_drive(Map&& map, const Signal& x0, const SolverConfig& cfg) {
    cfg.validate();
    SolveResult result;
    Signal x = x0;
    detail::require_finite_iterate(x);
    for (long j = 0; j < cfg.max_iter; ++j) {
        Signal next = map(x);
        detail::require_finite_iterate(next);
        const double step = norm(next - x);
        result.residuals.push_back(step);
        x = std::move(next);
        ++result.iterations;
        if (step <= cfg.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.solution = std::move(x);
    return result;
}

namespace detail {
/// || sum_i sign_i * op_i(x) - drive || with DC-pole elements evaluated on
/// the zero-mean subspace (where their relation constrains nothing at DC,
/// the residual's DC part is dropped too). NaN if evaluation fails.
inline double inclusion_residual(
    const std::vector<std::pair<const OperatorSpec*, double>>& terms, const Signal& x,
    const Signal& drive) {
    bool any_dc_pole = false;
    try {
        Signal acc = -drive;
        for (const auto& [op, sign] : terms) {
            any_dc_pole = any_dc_pole || op->has_dc_pole();
            acc = acc + sign * guarded_apply(*op, x);
        }
        if (any_dc_pole) acc = strip_mean(acc);
        return norm(acc);
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}
}  // namespace detail

/// Forward/backward splitting for 0 in m1(x) + m2(x) - drive:
/// x <- res_{alpha*m2}(x - alpha*m1(x) + alpha*drive).
/// m1 is forward-evaluated (single-valued), m2 supplies the resolvent.
inline SolveResult forward_backward(const OperatorSpec& m1, const OperatorSpec& m2,
                                    const Signal& drive, const SolverConfig& cfg) {
    const double a = cfg.alpha;
    auto step = [&](const Signal& x) {
        return resolvent(m2, a, x - a * apply(m1, x) + a * drive);
    };
    SolveResult result =
        fixed_point_drive(step, cfg.make_initial(drive.size(), drive.period_T), cfg);
    result.fixed_point_residual =
        detail::inclusion_residual({{&m1, 1.0}, {&m2, 1.0}}, result.solution, drive);
    return result;
}

/// The Douglas-Rachford operator T = (I + R_{alpha*m1} R_{alpha*m2})/2.
inline std::function<Signal(const Signal&)> dr_map(const OperatorSpec& m1,
                                                   const OperatorSpec& m2, double alpha) {
    return [m1, m2, alpha](const Signal& z) {
        return 0.5 * (z + cayley(m1, alpha, cayley(m2, alpha, z)));
    };
}

/// Douglas-Rachford splitting for 0 in m1(x) + m2(x) - drive. The drive is
/// folded into m1 as a constant output shift; the driver iterates z through
/// dr_map (residual history is on z) and reports x = res_{alpha*m2}(z).
inline SolveResult douglas_rachford(const OperatorSpec& m1, const OperatorSpec& m2,
                                    const Signal& drive, const SolverConfig& cfg) {
    const OperatorSpec shifted = OperatorSpec::offset_output(m1, -drive);
    SolveResult result = fixed_point_drive(
        dr_map(shifted, m2, cfg.alpha), cfg.make_initial(drive.size(), drive.period_T), cfg);
    result.solution = resolvent(m2, cfg.alpha, result.solution);
    result.fixed_point_residual =
        detail::inclusion_residual({{&m1, 1.0}, {&m2, 1.0}}, result.solution, drive);
    return result;
}

}  // namespace portsolve
