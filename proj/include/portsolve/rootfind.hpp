#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "portsolve/errors.hpp"

namespace portsolve {

/// Solves x + alpha*f(x) = z for a scalar monotone f.
///
/// The residual g(x) = x + alpha*f(x) - z is strictly increasing when f is
/// monotone, so [z - alpha*|f(z)|, z + alpha*|f(z)|] always brackets the
/// root; the geometric expansion below only runs for a mis-declared f and
/// ends in BracketFailure. Inside the bracket: Newton steps when a
/// derivative is available and the step stays bracketed, bisection
/// otherwise. Stops at |g(x)| <= 1e-12*(1+|z|) or 200 iterations.
inline double resolve_scalar(const std::function<double(double)>& f,
                             const std::function<double(double)>& fprime, double alpha,
                             double z) {
    const double tol = 1e-12 * (1.0 + std::fabs(z));
    const auto g = [&](double x) { return x + alpha * f(x) - z; };

    double gz = g(z);
    if (std::fabs(gz) <= tol) return z;

    double h = alpha * std::fabs(f(z));
    if (!std::isfinite(h) || h > 1e300) h = 1e300;
    if (h <= 0.0) h = 1e-8 * (1.0 + std::fabs(z));

    double lo = z - h, hi = z + h;
    double glo = g(lo), ghi = g(hi);
    int grow = 0;
    while (!(glo <= 0.0 && ghi >= 0.0)) {
        if (++grow > 200 || !std::isfinite(h))
            throw BracketFailure(
                "no sign change while bracketing x + alpha*f(x) = z; "
                "nonlinearity is likely not monotone");
        h *= 2.0;
        lo = z - h;
        hi = z + h;
        glo = g(lo);
        ghi = g(hi);
    }

    double x = 0.5 * (lo + hi);
    double gx = g(x);
    for (int it = 0; it < 200 && std::fabs(gx) > tol; ++it) {
        bool stepped = false;
        if (fprime) {
            const double slope = 1.0 + alpha * fprime(x);
            if (std::isfinite(slope) && slope > 0.0) {
                const double xn = x - gx / slope;
                if (xn > lo && xn < hi) {
                    x = xn;
                    stepped = true;
                }
            }
        }
        if (!stepped) x = 0.5 * (lo + hi);
        gx = g(x);
        if (gx < 0.0)
            lo = x;
        else
            hi = x;
    }
    return x;
}

}  // namespace portsolve
