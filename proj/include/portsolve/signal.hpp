#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <utility>

#include "portsolve/errors.hpp"

namespace portsolve {

using Eigen::ArrayXcd;
using Eigen::ArrayXd;
using Eigen::Index;

/// One period of a real, uniformly sampled periodic signal in l_{2,T}.
///
/// `samples[k]` is the value at t_k = k * dt with dt = period_T / size().
/// The sample spacing is implied, never stored. Values are immutable by
/// convention once a signal leaves the function that built it, so sharing
/// across threads is safe.
struct Signal {
    ArrayXd samples;
    double period_T = 1.0;

    Signal() = default;

    Signal(ArrayXd s, double T) : samples(std::move(s)), period_T(T) {
        if (samples.size() < 2)
            throw ValidationError("signal needs at least 2 samples");
        if (!(period_T > 0.0) || !std::isfinite(period_T))
            throw ValidationError("signal period must be a positive finite number");
    }

    Index size() const { return samples.size(); }
    double dt() const { return period_T / static_cast<double>(samples.size()); }

    static Signal zero(Index n, double T) { return {ArrayXd::Zero(n), T}; }

    static Signal constant(Index n, double T, double value) {
        return {ArrayXd::Constant(n, value), T};
    }

    /// amplitude * sin(2*pi*harmonic*t/T + phase) sampled at t_k = k*T/n.
    static Signal sinusoid(Index n, double T, double amplitude, int harmonic = 1,
                           double phase = 0.0) {
        ArrayXd t = ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1)) * (T / double(n));
        return {amplitude * (2.0 * std::numbers::pi * harmonic / T * t + phase).sin(), T};
    }

    /// t_k = k * dt, k = 0..n-1.
    ArrayXd time_grid() const {
        const Index n = size();
        return ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1)) * dt();
    }
};

inline void check_compatible(const Signal& x, const Signal& y) {
    if (x.size() != y.size() || x.period_T != y.period_T)
        throw LengthMismatch("signals live on different grids (length " +
                             std::to_string(x.size()) + " vs " + std::to_string(y.size()) +
                             ", period " + std::to_string(x.period_T) + " vs " +
                             std::to_string(y.period_T) + ")");
}

/// l_{2,T} inner product: dt * sum_k x[k]*y[k].
inline double inner(const Signal& x, const Signal& y) {
    check_compatible(x, y);
    return x.dt() * (x.samples * y.samples).sum();
}

/// Induced norm sqrt(<x|x>); zero iff x is the zero signal.
inline double norm(const Signal& x) {
    return std::sqrt(std::max(0.0, x.dt() * x.samples.square().sum()));
}

inline bool all_finite(const Signal& x) { return x.samples.isFinite().all(); }

inline double mean(const Signal& x) { return x.samples.mean(); }

/// x minus its mean (projection onto the zero-mean subspace).
inline Signal strip_mean(const Signal& x) {
    return {x.samples - x.samples.mean(), x.period_T};
}

inline Signal operator+(const Signal& x, const Signal& y) {
    check_compatible(x, y);
    return {x.samples + y.samples, x.period_T};
}

inline Signal operator-(const Signal& x, const Signal& y) {
    check_compatible(x, y);
    return {x.samples - y.samples, x.period_T};
}

inline Signal operator-(const Signal& x) { return {-x.samples, x.period_T}; }

inline Signal operator*(double a, const Signal& x) { return {a * x.samples, x.period_T}; }

/// DFT of one period. coefficients[k] = sum_n x[n] exp(-2*pi*i*k*n/N)
/// (unscaled forward transform), so a constant c maps to N*c at k = 0.
struct Spectrum {
    ArrayXcd coefficients;
    double period_T = 1.0;

    Index size() const { return coefficients.size(); }
};

/// Signed frequency of bin k on an N-point grid with period T:
/// omega_k = 2*pi*k~/T with k~ = k for k <= N/2 and k~ = k - N otherwise.
inline double bin_frequency(Index k, Index n, double T) {
    const Index kt = (2 * k <= n) ? k : k - n;
    return 2.0 * std::numbers::pi * static_cast<double>(kt) / T;
}

namespace detail {
// One engine per thread; Eigen's FFT caches its twiddle plans per length.
inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine;
    return engine;
}
}  // namespace detail

inline Spectrum dft(const Signal& x) {
    Eigen::VectorXcd out;
    Eigen::VectorXd in = x.samples.matrix();
    detail::fft_engine().fwd(out, in);
    return {out.array(), x.period_T};
}

/// Inverse DFT; the imaginary residue of a not-quite-symmetric spectrum is
/// discarded, which equals transforming the Hermitian-symmetrized spectrum.
inline Signal idft(const Spectrum& s) {
    Eigen::VectorXcd out;
    Eigen::VectorXcd in = s.coefficients.matrix();
    detail::fft_engine().inv(out, in);
    return {out.array().real(), s.period_T};
}

/// A distribution over signals, drawn with an externally owned generator.
using SignalSampler = std::function<Signal(std::mt19937_64&)>;

/// Random band-limited signals: harmonics 1..max_harmonic with independent
/// N(0, amplitude^2) sine/cosine coefficients, plus an optional DC term.
inline SignalSampler band_limited_sampler(Index n, double T, int max_harmonic,
                                          double amplitude = 1.0, bool include_dc = false) {
    return [n, T, max_harmonic, amplitude, include_dc](std::mt19937_64& rng) {
        std::normal_distribution<double> coeff(0.0, amplitude);
        ArrayXd t = ArrayXd::LinSpaced(n, 0.0, double(n - 1)) * (T / double(n));
        ArrayXd acc = ArrayXd::Zero(n);
        if (include_dc) acc += coeff(rng);
        for (int h = 1; h <= max_harmonic; ++h) {
            const double w = 2.0 * std::numbers::pi * h / T;
            // draws sequenced explicitly: evaluation order inside one
            // expression is unspecified and would make streams toolchain-bound
            const double cs = coeff(rng);
            const double cc = coeff(rng);
            acc += cs * (w * t).sin() + cc * (w * t).cos();
        }
        return Signal{std::move(acc), T};
    };
}

/// Independent N(0, amplitude^2) samples; full-band noise.
inline SignalSampler white_sampler(Index n, double T, double amplitude = 1.0) {
    return [n, T, amplitude](std::mt19937_64& rng) {
        std::normal_distribution<double> dist(0.0, amplitude);
        ArrayXd s(n);
        for (Index k = 0; k < n; ++k) s[k] = dist(rng);
        return Signal{std::move(s), T};
    };
}

}  // namespace portsolve
