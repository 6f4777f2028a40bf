#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <variant>

#include "portsolve/errors.hpp"
#include "portsolve/rootfind.hpp"
#include "portsolve/signal.hpp"

namespace portsolve {

class OperatorSpec;

/// y = g * x. Monotone iff g >= 0.
struct GainOp {
    double g = 0.0;
};

/// y[k] = f(x[k]) pointwise. `fprime` may be empty (bisection-only
/// resolvents). `declared_monotone` is the model builder's claim; it is
/// audited by check_monotone, never proven.
struct StaticNonlinearityOp {
    std::function<double(double)> f;
    std::function<double(double)> fprime;
    bool declared_monotone = true;
};

/// Rational transfer function G(s) = num(s)/den(s), coefficients in
/// descending powers of s, realized as a multiplier on the DFT grid.
struct LtiOp {
    ArrayXd num;
    ArrayXd den;
};

struct NegatedOp {
    std::shared_ptr<const OperatorSpec> inner;
};

/// x -> inner(x) + offset. Used to fold drives and iteration-dependent
/// shifts into an operator.
struct OffsetOutputOp {
    std::shared_ptr<const OperatorSpec> inner;
    Signal offset;
};

/// A circuit-element relation, represented operationally by its forward
/// map and resolvent. Values are immutable and cheap to copy.
class OperatorSpec {
   public:
    using Kind = std::variant<GainOp, StaticNonlinearityOp, LtiOp, NegatedOp, OffsetOutputOp>;

    static OperatorSpec gain(double g) { return OperatorSpec(GainOp{g}); }

    static OperatorSpec static_nonlinearity(std::function<double(double)> f,
                                            std::function<double(double)> fprime = {},
                                            bool declared_monotone = true) {
        if (!f) throw ValidationError("static nonlinearity needs a scalar map");
        return OperatorSpec(StaticNonlinearityOp{std::move(f), std::move(fprime),
                                                 declared_monotone});
    }

    static OperatorSpec lti(ArrayXd num, ArrayXd den) {
        if (num.size() == 0 || den.size() == 0)
            throw ValidationError("transfer function needs numerator and denominator");
        if ((den == 0.0).all())
            throw ValidationError("transfer function denominator is the zero polynomial");
        return OperatorSpec(LtiOp{std::move(num), std::move(den)});
    }

    /// Negation; Negated(Negated(x)) collapses back to x.
    static OperatorSpec negated(OperatorSpec inner) {
        if (const auto* n = std::get_if<NegatedOp>(&inner.kind_)) return *n->inner;
        return OperatorSpec(NegatedOp{std::make_shared<const OperatorSpec>(std::move(inner))});
    }

    static OperatorSpec offset_output(OperatorSpec inner, Signal offset) {
        return OperatorSpec(
            OffsetOutputOp{std::make_shared<const OperatorSpec>(std::move(inner)),
                           std::move(offset)});
    }

    const Kind& kind() const { return kind_; }

    /// The model builder's monotonicity claim (audited, not proven).
    /// LTI elements are taken at their declaration; negation flips it.
    bool declared_monotone() const {
        return std::visit(
            [](const auto& op) -> bool {
                using T = std::decay_t<decltype(op)>;
                if constexpr (std::is_same_v<T, GainOp>) return op.g >= 0.0;
                if constexpr (std::is_same_v<T, StaticNonlinearityOp>)
                    return op.declared_monotone;
                if constexpr (std::is_same_v<T, LtiOp>) return true;
                if constexpr (std::is_same_v<T, NegatedOp>)
                    return !op.inner->declared_monotone();
                if constexpr (std::is_same_v<T, OffsetOutputOp>)
                    return op.inner->declared_monotone();
            },
            kind_);
    }

    /// True when the element has a pole at s = 0 (den(0) ~ 0), in which
    /// case forward application is restricted to zero-mean inputs and the
    /// resolvent annihilates the DC coefficient.
    bool has_dc_pole() const {
        return std::visit(
            [](const auto& op) -> bool {
                using T = std::decay_t<decltype(op)>;
                if constexpr (std::is_same_v<T, LtiOp>)
                    return std::fabs(op.den[op.den.size() - 1]) < 1e-12;
                else if constexpr (std::is_same_v<T, NegatedOp>)
                    return op.inner->has_dc_pole();
                else if constexpr (std::is_same_v<T, OffsetOutputOp>)
                    return op.inner->has_dc_pole();
                else
                    return false;
            },
            kind_);
    }

    /// Whether resolvent() can run on this operator: declared monotone and
    /// not a negation (anti-monotone resolvents are not defined here).
    bool resolvent_capable() const {
        return std::visit(
            [this](const auto& op) -> bool {
                using T = std::decay_t<decltype(op)>;
                if constexpr (std::is_same_v<T, NegatedOp>)
                    return false;
                else if constexpr (std::is_same_v<T, OffsetOutputOp>)
                    return op.inner->resolvent_capable();
                else
                    return declared_monotone();
            },
            kind_);
    }

   private:
    explicit OperatorSpec(Kind k) : kind_(std::move(k)) {}
    Kind kind_;
};

namespace detail {

inline std::complex<double> polyval(const ArrayXd& coeffs, std::complex<double> s) {
    std::complex<double> acc = 0.0;
    for (Index i = 0; i < coeffs.size(); ++i) acc = acc * s + coeffs[i];
    return acc;
}

constexpr double kPoleTol = 1e-12;

inline void require_zero_mean(const Signal& x) {
    const double scale = 1.0 + x.samples.abs().maxCoeff();
    if (std::fabs(x.samples.mean()) > 1e-9 * scale)
        throw DomainViolation(
            "operator with a pole at s=0 applied to a signal with nonzero mean");
}

}  // namespace detail

/// Forward application y = op(x).
inline Signal apply(const OperatorSpec& op, const Signal& x) {
    return std::visit(
        [&](const auto& k) -> Signal {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GainOp>) {
                return {k.g * x.samples, x.period_T};
            } else if constexpr (std::is_same_v<T, StaticNonlinearityOp>) {
                ArrayXd y(x.size());
                for (Index i = 0; i < x.size(); ++i) y[i] = k.f(x.samples[i]);
                return {std::move(y), x.period_T};
            } else if constexpr (std::is_same_v<T, LtiOp>) {
                const Index n = x.size();
                Spectrum s = dft(x);
                for (Index q = 0; q < n; ++q) {
                    const std::complex<double> jw(0.0, bin_frequency(q, n, x.period_T));
                    const auto num = detail::polyval(k.num, jw);
                    const auto den = detail::polyval(k.den, jw);
                    if (std::abs(den) < detail::kPoleTol) {
                        if (q == 0) {
                            detail::require_zero_mean(x);
                            s.coefficients[0] = 0.0;  // zero-mean in, zero-mean out
                        } else {
                            throw PoleOnGrid("transfer function pole at sampled frequency " +
                                             std::to_string(jw.imag()) + " rad/s");
                        }
                    } else {
                        s.coefficients[q] *= num / den;
                    }
                }
                return idft(s);
            } else if constexpr (std::is_same_v<T, NegatedOp>) {
                return -apply(*k.inner, x);
            } else {  // OffsetOutputOp
                return apply(*k.inner, x) + k.offset;
            }
        },
        op.kind());
}

/// Resolvent: the unique y with y + alpha*op(y) = z.
///
/// Gain: z/(1+alpha*g). Static nonlinearity: per-sample safeguarded
/// Newton-bisection. LTI: coefficient-wise multiplier den/(den+alpha*num),
/// which sends the DC coefficient to zero at a DC pole (the resolvent of
/// the maximal monotone extension on the zero-mean subspace).
inline Signal resolvent(const OperatorSpec& op, double alpha, const Signal& z) {
    if (!(alpha > 0.0)) throw ValidationError("resolvent needs alpha > 0");
    return std::visit(
        [&](const auto& k) -> Signal {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, GainOp>) {
                const double d = 1.0 + alpha * k.g;
                if (std::fabs(d) < detail::kPoleTol)
                    throw ResolventSingular("1 + alpha*g vanishes");
                return {z.samples / d, z.period_T};
            } else if constexpr (std::is_same_v<T, StaticNonlinearityOp>) {
                ArrayXd y(z.size());
                for (Index i = 0; i < z.size(); ++i)
                    y[i] = resolve_scalar(k.f, k.fprime, alpha, z.samples[i]);
                return {std::move(y), z.period_T};
            } else if constexpr (std::is_same_v<T, LtiOp>) {
                const Index n = z.size();
                Spectrum s = dft(z);
                for (Index q = 0; q < n; ++q) {
                    const std::complex<double> jw(0.0, bin_frequency(q, n, z.period_T));
                    const auto num = detail::polyval(k.num, jw);
                    const auto den = detail::polyval(k.den, jw);
                    const auto shifted = den + alpha * num;
                    if (std::abs(shifted) < detail::kPoleTol)
                        throw ResolventSingular(
                            "1 + alpha*G singular at sampled frequency " +
                            std::to_string(jw.imag()) + " rad/s");
                    s.coefficients[q] *= den / shifted;
                }
                return idft(s);
            } else if constexpr (std::is_same_v<T, NegatedOp>) {
                throw ValidationError(
                    "resolvent of a negated (anti-monotone) operator is not defined");
            } else {  // OffsetOutputOp: y + alpha*(R(y)+c) = z  <=>  res_R(z - alpha*c)
                return resolvent(*k.inner, alpha, z - alpha * k.offset);
            }
        },
        op.kind());
}

/// Reflected resolvent (Cayley operator): 2*res_{alpha*op}(z) - z.
inline Signal cayley(const OperatorSpec& op, double alpha, const Signal& z) {
    return 2.0 * resolvent(op, alpha, z) - z;
}

/// Forward application with the DC-pole domain restriction handled by
/// projection: operators with a pole at s=0 see only the zero-mean part.
/// Used by residual certification, where the DC component of the inclusion
/// is unconstrained anyway.
inline Signal guarded_apply(const OperatorSpec& op, const Signal& x) {
    if (op.has_dc_pole()) return apply(op, strip_mean(x));
    return apply(op, x);
}

/// Result of a sampled monotonicity audit.
struct MonotonicityReport {
    long tested_pairs = 0;
    long inconclusive_pairs = 0;  // pairs whose evaluation raised an error
    /// Smallest observed <u1-u2 | y1-y2> / ||u1-u2||^2.
    double min_pairing = std::numeric_limits<double>::quiet_NaN();

    enum class Verdict { kMonotoneConsistent, kViolationFound };
    Verdict verdict = Verdict::kMonotoneConsistent;

    bool consistent() const { return verdict == Verdict::kMonotoneConsistent; }
};

/// Samples `trials` signal pairs from `sampler` and reports the minimum
/// normalized increment pairing. A violation is declared below -1e-9.
/// Evaluation errors are counted as inconclusive, not fatal.
inline MonotonicityReport check_monotone(const OperatorSpec& op, const SignalSampler& sampler,
                                         long trials, std::uint64_t seed = 0x5eedULL) {
    std::mt19937_64 rng(seed);
    MonotonicityReport report;
    double worst = std::numeric_limits<double>::infinity();
    for (long t = 0; t < trials; ++t) {
        const Signal u1 = sampler(rng);
        const Signal u2 = sampler(rng);
        const Signal du = u1 - u2;
        const double d2 = inner(du, du);
        if (d2 < 1e-24) continue;
        try {
            const Signal dy = apply(op, u1) - apply(op, u2);
            worst = std::min(worst, inner(du, dy) / d2);
            ++report.tested_pairs;
        } catch (const Error&) {
            ++report.inconclusive_pairs;
        }
    }
    if (report.tested_pairs > 0) report.min_pairing = worst;
    report.verdict = (report.tested_pairs > 0 && worst < -1e-9)
                         ? MonotonicityReport::Verdict::kViolationFound
                         : MonotonicityReport::Verdict::kMonotoneConsistent;
    return report;
}

}  // namespace portsolve
