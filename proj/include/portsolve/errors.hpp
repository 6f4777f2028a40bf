#pragma once

#include <stdexcept>
#include <string>

namespace portsolve {

/// Base class of every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Two signals with incompatible length or period were combined.
struct LengthMismatch : Error {
    using Error::Error;
};

/// Generic precondition / construction failure.
struct ValidationError : Error {
    using Error::Error;
};

/// An LTI denominator vanishes at a sampled nonzero frequency.
struct PoleOnGrid : Error {
    using Error::Error;
};

/// An operator was evaluated outside its domain (e.g. a DC pole fed a
/// signal with nonzero mean).
struct DomainViolation : Error {
    using Error::Error;
};

/// The scalar resolvent root finder could not bracket a sign change;
/// usually a non-monotone nonlinearity mis-declared as monotone.
struct BracketFailure : Error {
    using Error::Error;
};

/// The resolvent multiplier 1/(1 + alpha*G) is singular at some frequency,
/// or 1 + alpha*g vanishes for a gain.
struct ResolventSingular : Error {
    using Error::Error;
};

/// A fixed-point iterate contains NaN/Inf (or has blown past any
/// physically meaningful magnitude); signals divergence.
struct NonFinite : Error {
    using Error::Error;
};

/// An inner fixed-point solve of the naive nested procedure failed to
/// converge within its iteration cap.
struct InnerSolveFailed : Error {
    using Error::Error;
};

/// A sum node has no child with a computable resolvent.
struct NoBackwardChild : Error {
    using Error::Error;
};

/// An inverse node wraps a subtree with zero effective gain.
struct ZeroDivision : Error {
    using Error::Error;
};

}  // namespace portsolve
