#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "portsolve/csv.hpp"
#include "portsolve/signal.hpp"
#include "support/oracles.hpp"

using namespace portsolve;

namespace {

Signal random_signal(Index n, double T, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    ArrayXd s(n);
    for (Index k = 0; k < n; ++k) s[k] = dist(rng);
    return {std::move(s), T};
}

}  // namespace

TEST_CASE("signal construction enforces the basic invariants") {
    CHECK_THROWS_AS(Signal(ArrayXd::Zero(1), 1.0), ValidationError);
    CHECK_THROWS_AS(Signal(ArrayXd::Zero(4), 0.0), ValidationError);
    CHECK_THROWS_AS(Signal(ArrayXd::Zero(4), -2.0), ValidationError);
    const Signal x = Signal::constant(4, 2.0, 1.0);
    CHECK(x.dt() == doctest::Approx(0.5));
}

TEST_CASE("inner product matches the dt-weighted sum") {
    // constant 1 over one period integrates to T
    const Signal ones = Signal::constant(4, 1.0, 1.0);
    CHECK(inner(ones, ones) == doctest::Approx(1.0));

    // orthogonality of the alternating signal against the constant
    Signal alt{ArrayXd(4), 1.0};
    alt.samples << 1.0, -1.0, 1.0, -1.0;
    CHECK(inner(alt, ones) == doctest::Approx(0.0));

    // one period of sin^2 integrates to pi; Simpson oracle cross-checks
    const double T = 2.0 * std::numbers::pi;
    const Signal s = Signal::sinusoid(1000, T, 1.0);
    const double reference =
        oracles::simpson([](double t) { return std::sin(t) * std::sin(t); }, 0.0, T, 4000);
    CHECK(reference == doctest::Approx(std::numbers::pi).epsilon(1e-10));
    CHECK(inner(s, s) == doctest::Approx(std::numbers::pi).epsilon(1e-3));

    CHECK_THROWS_AS(inner(ones, Signal::constant(8, 1.0, 1.0)), LengthMismatch);
}

TEST_CASE("norm") {
    CHECK(norm(Signal::zero(16, 3.0)) == 0.0);
    CHECK(norm(Signal::constant(10, 1.0, 2.0)) == doctest::Approx(2.0));
    const double T = 2.0 * std::numbers::pi;
    CHECK(norm(Signal::sinusoid(1000, T, 1.0)) ==
          doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-3));
}

TEST_CASE("dft of simple signals") {
    const Signal c = Signal::constant(8, 1.0, 2.0);
    const Spectrum C = dft(c);
    CHECK(std::abs(C.coefficients[0] - 16.0) < 1e-12);
    for (Index k = 1; k < 8; ++k) CHECK(std::abs(C.coefficients[k]) < 1e-12);

    ArrayXd imp = ArrayXd::Zero(8);
    imp[0] = 1.0;
    const Spectrum I = dft(Signal{imp, 1.0});
    for (Index k = 0; k < 8; ++k) CHECK(std::abs(I.coefficients[k] - 1.0) < 1e-12);
}

TEST_CASE("dft agrees with the naive O(N^2) oracle and round-trips") {
    std::mt19937_64 rng(7);
    const Signal x = random_signal(64, 1.0, rng);
    const Spectrum X = dft(x);
    std::vector<double> raw(x.samples.data(), x.samples.data() + x.size());
    const auto reference = oracles::naive_dft(raw);
    for (Index k = 0; k < x.size(); ++k)
        CHECK(std::abs(X.coefficients[k] - reference[size_t(k)]) < 1e-9);

    const Signal back = idft(X);
    CHECK((back.samples - x.samples).abs().maxCoeff() < 1e-12);
}

TEST_CASE("round-trip, Parseval and conjugate symmetry across lengths") {
    std::mt19937_64 rng(11);
    for (const Index n : {Index(2), Index(3), Index(64), Index(1000), Index(5000)}) {
        CAPTURE(n);
        const Signal x = random_signal(n, 2.5, rng);
        const Spectrum X = dft(x);

        const Signal back = idft(X);
        const double scale = x.samples.abs().maxCoeff();
        CHECK((back.samples - x.samples).abs().maxCoeff() <= 1e-12 * scale);

        // Parseval with this dft convention: dt/N * sum |X_k|^2 = ||x||^2
        const double lhs = norm(x) * norm(x);
        const double rhs = x.dt() / double(n) * X.coefficients.abs2().sum();
        CHECK(std::fabs(lhs - rhs) <= 1e-10 * (1.0 + lhs));

        for (Index k = 0; k < n; ++k) {
            const auto mirrored = std::conj(X.coefficients[(n - k) % n]);
            CHECK(std::abs(X.coefficients[k] - mirrored) <= 1e-12 * (1.0 + scale * n));
        }
    }
}

TEST_CASE("Cauchy-Schwarz on random pairs") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Signal x = random_signal(128, 1.5, rng);
        const Signal y = random_signal(128, 1.5, rng);
        CHECK(std::fabs(inner(x, y)) <= norm(x) * norm(y) + 1e-12);
    }
}

TEST_CASE("signed frequency grid") {
    const double T = 2.0;
    CHECK(bin_frequency(0, 8, T) == 0.0);
    CHECK(bin_frequency(1, 8, T) == doctest::Approx(std::numbers::pi));
    CHECK(bin_frequency(4, 8, T) == doctest::Approx(4.0 * std::numbers::pi));
    CHECK(bin_frequency(5, 8, T) == doctest::Approx(-3.0 * std::numbers::pi));
    CHECK(bin_frequency(7, 8, T) == doctest::Approx(-std::numbers::pi));
}

TEST_CASE("csv round-trip preserves every bit") {
    std::mt19937_64 rng(17);
    const Signal x = random_signal(33, 0.7, rng);
    std::ostringstream out;
    write_csv(out, x);
    std::istringstream in(out.str());
    const Signal back = read_csv(in);
    CHECK(back.size() == x.size());
    CHECK(back.period_T == doctest::Approx(x.period_T).epsilon(1e-12));
    for (Index k = 0; k < x.size(); ++k) CHECK(back.samples[k] == x.samples[k]);
}

TEST_CASE("csv rejects malformed input") {
    {
        std::istringstream in("v,t\n0,1\n");
        CHECK_THROWS_AS(read_csv(in), ValidationError);
    }
    {
        std::istringstream in("t,v\n0,1\n0.5,not_a_number\n");
        CHECK_THROWS_AS(read_csv(in), ValidationError);
    }
    {
        std::istringstream in("t,v\n0,1\n0.5,2\n0.7,3\n");  // nonuniform t
        CHECK_THROWS_AS(read_csv(in), ValidationError);
    }
}
