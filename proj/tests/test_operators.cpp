#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "portsolve/operators.hpp"
#include "support/oracles.hpp"

using namespace portsolve;

namespace {

const double kTwoPi = 2.0 * std::numbers::pi;

OperatorSpec cube_op(double scale = 1.0) {
    return OperatorSpec::static_nonlinearity(
        [scale](double x) { return scale * x * x * x; },
        [scale](double x) { return 3.0 * scale * x * x; });
}

OperatorSpec saturation_op(double limit = 1.0) {
    return OperatorSpec::static_nonlinearity(
        [limit](double x) { return limit * std::tanh(x / limit); },
        [limit](double x) {
            const double c = std::cosh(x / limit);
            return 1.0 / (c * c);
        });
}

OperatorSpec lossless_integrating_lti() {
    ArrayXd num(3), den(2);
    num << 1.0, 0.0, 1.0;  // s^2 + 1
    den << 1.0, 0.0;       // s
    return OperatorSpec::lti(num, den);
}

}  // namespace

TEST_CASE("forward application of the element kinds") {
    const Signal two = Signal::constant(8, 1.0, 2.0);
    CHECK((apply(OperatorSpec::gain(3.0), two).samples == 6.0).all());

    Signal x{ArrayXd(3), 1.0};
    x.samples << -1.0, 0.0, 2.0;
    const Signal y = apply(cube_op(), x);
    CHECK(y.samples[0] == doctest::Approx(-1.0));
    CHECK(y.samples[1] == doctest::Approx(0.0));
    CHECK(y.samples[2] == doctest::Approx(8.0));

    // (s^2+1)/s annihilates the fundamental on a T=2*pi grid: G(j*1) = 0
    const Signal s = Signal::sinusoid(1000, kTwoPi, 1.0);
    CHECK(norm(apply(lossless_integrating_lti(), s)) < 1e-6);

    // negation and output offset compose
    const Signal z = apply(OperatorSpec::negated(OperatorSpec::gain(2.0)), two);
    CHECK((z.samples == -4.0).all());
    const Signal w =
        apply(OperatorSpec::offset_output(OperatorSpec::gain(2.0), two), two);
    CHECK((w.samples == 6.0).all());
}

TEST_CASE("lti apply matches a naive frequency-domain oracle") {
    // G(s) = (s + 2) / (s^2 + s + 1): no poles on the imaginary axis
    ArrayXd num(2), den(3);
    num << 1.0, 2.0;
    den << 1.0, 1.0, 1.0;
    const OperatorSpec op = OperatorSpec::lti(num, den);

    std::mt19937_64 rng(23);
    std::normal_distribution<double> dist;
    const Index n = 64;
    const double T = 3.0;
    ArrayXd samples(n);
    for (Index k = 0; k < n; ++k) samples[k] = dist(rng);
    const Signal x{samples, T};

    std::vector<double> raw(x.samples.data(), x.samples.data() + n);
    auto spectrum = oracles::naive_dft(raw);
    for (Index k = 0; k < n; ++k) {
        const std::complex<double> jw(0.0, bin_frequency(k, n, T));
        const auto g = ((jw + 2.0)) / ((jw * jw + jw + 1.0));
        spectrum[size_t(k)] *= g;
    }
    const auto expected = oracles::naive_idft(spectrum);

    const Signal y = apply(op, x);
    for (Index k = 0; k < n; ++k)
        CHECK(y.samples[k] == doctest::Approx(expected[size_t(k)]).epsilon(1e-10));
}

TEST_CASE("lti apply error paths") {
    // 1/(s^2+1) has poles at +-j, which sit on the T=2*pi grid
    ArrayXd num(1), den(3);
    num << 1.0;
    den << 1.0, 0.0, 1.0;
    const OperatorSpec resonant = OperatorSpec::lti(num, den);
    CHECK_THROWS_AS(apply(resonant, Signal::sinusoid(64, kTwoPi, 1.0)), PoleOnGrid);

    CHECK_THROWS_AS(apply(lossless_integrating_lti(), Signal::constant(64, kTwoPi, 1.0)),
                    DomainViolation);
    CHECK(lossless_integrating_lti().has_dc_pole());
}

TEST_CASE("resolvent of gains and nonlinearities") {
    const Signal two = Signal::constant(6, 1.0, 2.0);
    CHECK((resolvent(OperatorSpec::gain(1.0), 1.0, two).samples == 1.0).all());

    // x + x^3 = 2 has the root 1
    const Signal r = resolvent(cube_op(), 1.0, two);
    CHECK(r.samples[0] == doctest::Approx(1.0).epsilon(1e-10));

    // x + x^3 = 1, frozen from the bisection oracle
    const double root = oracles::bisect_increasing(
        [](double x) { return x + x * x * x - 1.0; }, 0.0, 1.0);
    CHECK(root == doctest::Approx(0.6823278038280193).epsilon(1e-12));
    const Signal one = Signal::constant(6, 1.0, 1.0);
    const Signal q = resolvent(cube_op(), 1.0, one);
    CHECK(std::fabs(q.samples[3] - root) < 1e-8);
}

TEST_CASE("resolvent of an LTI element is the closed-form multiplier") {
    const double alpha = 0.05;
    const Index n = 256;
    const OperatorSpec op = lossless_integrating_lti();

    std::mt19937_64 rng(29);
    const Signal z = band_limited_sampler(n, kTwoPi, 6, 1.0, true)(rng);
    const Signal x = resolvent(op, alpha, z);

    std::vector<double> raw(z.samples.data(), z.samples.data() + n);
    auto spectrum = oracles::naive_dft(raw);
    for (Index k = 0; k < n; ++k) {
        if (k == 0) {
            spectrum[0] = 0.0;  // DC coefficient is annihilated at a DC pole
            continue;
        }
        const std::complex<double> jw(0.0, bin_frequency(k, n, kTwoPi));
        const auto g = (jw * jw + 1.0) / jw;
        spectrum[size_t(k)] /= (1.0 + alpha * g);
    }
    const auto expected = oracles::naive_idft(spectrum);
    for (Index k = 0; k < n; ++k)
        CHECK(x.samples[k] == doctest::Approx(expected[size_t(k)]).epsilon(1e-9));
    CHECK(std::fabs(mean(x)) < 1e-12);
}

TEST_CASE("resolvent singularities and misdeclarations") {
    const Signal one = Signal::constant(4, 1.0, 1.0);
    CHECK_THROWS_AS(resolvent(OperatorSpec::gain(-1.0), 1.0, one), ResolventSingular);

    ArrayXd num(1), den(1);
    num << -2.0;
    den << 1.0;
    CHECK_THROWS_AS(resolvent(OperatorSpec::lti(num, den), 0.5, one), ResolventSingular);

    // f(x) = -x mis-declared monotone: x - x = 1 has no root anywhere
    const OperatorSpec lying = OperatorSpec::static_nonlinearity(
        [](double x) { return -x; }, [](double) { return -1.0; }, true);
    CHECK_THROWS_AS(resolvent(lying, 1.0, one), BracketFailure);

    CHECK_THROWS_AS(resolvent(OperatorSpec::negated(OperatorSpec::gain(1.0)), 1.0, one),
                    ValidationError);
}

TEST_CASE("offset fold: res of R + c evaluates res_R(z - alpha*c)") {
    const Signal c = Signal::constant(8, 1.0, 3.0);
    const Signal z = Signal::sinusoid(8, 1.0, 2.0);
    const double alpha = 0.1;
    const Signal x =
        resolvent(OperatorSpec::offset_output(OperatorSpec::gain(2.0), c), alpha, z);
    // x + alpha*(2x + 3) = z  =>  x = (z - 0.3)/1.2
    const ArrayXd expected = (z.samples - 0.3) / 1.2;
    CHECK((x.samples - expected).abs().maxCoeff() < 1e-14);
}

TEST_CASE("cayley operator") {
    const Signal z = Signal::sinusoid(16, 1.0, 1.3, 2);
    const Signal id = cayley(OperatorSpec::gain(0.0), 0.7, z);
    CHECK((id.samples - z.samples).abs().maxCoeff() < 1e-15);

    const Signal two = Signal::constant(4, 1.0, 2.0);
    CHECK((cayley(OperatorSpec::gain(1.0), 1.0, two).samples.abs() < 1e-14).all());

    // 2*0.6823278... - 1, frozen from the bisection oracle
    const Signal one = Signal::constant(4, 1.0, 1.0);
    const Signal c = cayley(cube_op(), 1.0, one);
    CHECK(c.samples[0] == doctest::Approx(0.3646556076560386).epsilon(1e-7));
}

TEST_CASE("double negation collapses") {
    const OperatorSpec op = OperatorSpec::negated(OperatorSpec::negated(OperatorSpec::gain(2.0)));
    CHECK(std::holds_alternative<GainOp>(op.kind()));
    CHECK(op.declared_monotone());
}

TEST_CASE("monotonicity audit") {
    const SignalSampler sampler = band_limited_sampler(64, 1.0, 8);

    const auto gain_report = check_monotone(OperatorSpec::gain(2.0), sampler, 64);
    CHECK(gain_report.consistent());
    CHECK(gain_report.min_pairing == doctest::Approx(2.0).epsilon(1e-9));

    const auto neg_report =
        check_monotone(OperatorSpec::negated(OperatorSpec::gain(1.0)), sampler, 64);
    CHECK_FALSE(neg_report.consistent());
    CHECK(neg_report.min_pairing == doctest::Approx(-1.0).epsilon(1e-9));

    const double mu = 1.5;
    const auto cubic_report = check_monotone(
        OperatorSpec::static_nonlinearity([mu](double v) { return mu * v * v * v / 3.0; },
                                          [mu](double v) { return mu * v * v; }),
        sampler, 128);
    CHECK(cubic_report.consistent());
    CHECK(cubic_report.min_pairing >= -1e-9);
}

TEST_CASE("lossless LTI audits monotone-consistent on zero-mean inputs") {
    const auto report = check_monotone(lossless_integrating_lti(),
                                       band_limited_sampler(128, kTwoPi, 10), 128);
    CHECK(report.consistent());
    CHECK(report.min_pairing >= -1e-9);
    CHECK(report.inconclusive_pairs == 0);
}

TEST_CASE("LTI monotonicity matches the analytic real-part criterion") {
    const Index n = 32;
    const double T = kTwoPi;
    std::mt19937_64 coeff_rng(31);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);

    // single-harmonic probe pairs make every grid frequency observable
    const SignalSampler probe = [&](std::mt19937_64& rng) {
        std::uniform_int_distribution<int> harmonic(0, int(n / 2));
        std::uniform_real_distribution<double> phase(0.0, kTwoPi);
        std::uniform_real_distribution<double> amp(0.5, 1.5);
        const int h = harmonic(rng);
        const double a = amp(rng);
        if (h == 0) return Signal::constant(n, T, a);
        const double ph = phase(rng);
        return Signal::sinusoid(n, T, a, h, ph);
    };

    int checked = 0;
    while (checked < 20) {
        ArrayXd num(3), den(3);
        for (int i = 0; i < 3; ++i) num[i] = coeff(coeff_rng);
        for (int i = 0; i < 3; ++i) den[i] = coeff(coeff_rng);

        double min_real = std::numeric_limits<double>::infinity();
        bool usable = true;
        for (Index k = 0; k < n; ++k) {
            const std::complex<double> jw(0.0, bin_frequency(k, n, T));
            const auto d = detail::polyval(den, jw);
            if (std::abs(d) < 0.05) {
                usable = false;
                break;
            }
            min_real = std::min(min_real, (detail::polyval(num, jw) / d).real());
        }
        if (!usable || std::fabs(min_real) < 1e-3) continue;  // too close to call

        const auto report =
            check_monotone(OperatorSpec::lti(num, den), probe, 600, 1000 + checked);
        CHECK(report.consistent() == (min_real > 0.0));
        ++checked;
    }
}

TEST_CASE("resolvent consistency: x + alpha*op(x) reproduces z") {
    std::mt19937_64 rng(37);
    const SignalSampler sampler = band_limited_sampler(128, kTwoPi, 8);
    const double alpha = 0.3;
    for (const OperatorSpec& op : {OperatorSpec::gain(2.5), cube_op(0.7), saturation_op(),
                                   lossless_integrating_lti()}) {
        for (int trial = 0; trial < 16; ++trial) {
            const Signal z = sampler(rng);
            const Signal x = resolvent(op, alpha, z);
            const Signal reconstructed = x + alpha * apply(op, x);
            CHECK(norm(reconstructed - z) <= 1e-8 * (1.0 + norm(z)));
        }
    }
}

TEST_CASE("firm nonexpansiveness and cayley nonexpansiveness") {
    std::mt19937_64 rng(41);
    const SignalSampler sampler = band_limited_sampler(96, 1.0, 8);
    const double alpha = 0.4;
    for (const OperatorSpec& op :
         {OperatorSpec::gain(3.0), cube_op(), saturation_op(0.7)}) {
        for (int trial = 0; trial < 32; ++trial) {
            const Signal z1 = sampler(rng);
            const Signal z2 = sampler(rng);
            const Signal x1 = resolvent(op, alpha, z1);
            const Signal x2 = resolvent(op, alpha, z2);
            const double d = norm(x1 - x2);
            CHECK(inner(x1 - x2, z1 - z2) >= d * d - 1e-9);

            const Signal c1 = cayley(op, alpha, z1);
            const Signal c2 = cayley(op, alpha, z2);
            CHECK(norm(c1 - c2) <= norm(z1 - z2) + 1e-9);
        }
    }
}

TEST_CASE("per-sample resolvent is schedule-independent (bitwise repeatable)") {
    std::mt19937_64 rng(43);
    const Signal z = band_limited_sampler(256, 1.0, 12)(rng);
    const Signal a = resolvent(cube_op(), 0.2, z);
    const Signal b = resolvent(cube_op(), 0.2, z);
    CHECK((a.samples == b.samples).all());
}
