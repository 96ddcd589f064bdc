#include "doctest.h"

#include "microlocal/qft_examples.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <cmath>

using namespace microlocal;

namespace {
bool close(cplx a, cplx b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }
}  // namespace

TEST_CASE("K0 against reference values") {
    CHECK(close(bessel_k0({0.5, 0.3}), {0.760679778665956539583589053838, -0.434104569821073250354593195396}, 1e-12));
    CHECK(close(bessel_k0({15.0, -2.0}), {-4.63999478854599268e-8, 8.60658533421012093e-8}, 1e-10));
    CHECK(bessel_k0(1.0).real() == doctest::Approx(0.42102443824070834).epsilon(1e-13));
    for (double x : {0.1, 2.0, 11.5, 12.5, 30.0}) {
        CHECK(bessel_k0(x).real() == doctest::Approx(boost::math::cyl_bessel_k(0, x)).epsilon(1e-11));
        CHECK(std::abs(bessel_k0(x).imag()) < 1e-15);
    }
}

TEST_CASE("Tricomi U: terminating series and Laplace integral") {
    CHECK(tricomi_u_terminating(0.5, 3.5, 1.3) == doctest::Approx(1.94094496580372137463634868194).epsilon(1e-12));
    CHECK(tricomi_u_terminating(0.5, 4.5, 0.5) == doctest::Approx(39.5979797464466613664472842779).epsilon(1e-12));
    CHECK(tricomi_u_integral(0.5, 4.5, 0.5) == doctest::Approx(39.5979797464466613664472842779).epsilon(1e-9));
}

TEST_CASE("smeared function value and derivative routes") {
    CHECK(counterexample_g_value(0.0) == doctest::Approx(2.0 * std::sqrt(2.0 * kPi)).epsilon(1e-12));
    const CounterexampleReport r = counterexample_g(12);
    REQUIRE(r.rows.size() == 13);
    CHECK(r.rows[0].cauchy == doctest::Approx(5.0132565492620005).epsilon(1e-9));
    for (const auto& row : r.rows) CHECK_FALSE(row.flagged);
}

TEST_CASE("spectral measure transforms") {
    const SpectralMeasure e = SpectralMeasure::exp_alpha(1.0, 0.5);
    CHECK(e.total_mass() == doctest::Approx(4.0 / std::exp(1.0)).epsilon(1e-10));
    CHECK(close(spectral_fourier(e, 0.0), 4.0 / std::exp(1.0), 1e-10));
    CHECK(close(spectral_fourier(e, {0.7, -0.2}),
                {-0.0159923583445780861009408492841, -0.311324211660186183222514371195}, 1e-9));
    CHECK(log_moment(e, 5) == doctest::Approx(18.1954550256022204056708634239).epsilon(1e-10));
    const SpectralMeasure a = SpectralMeasure::atom(2.0, 3.0);
    CHECK(close(spectral_fourier(a, 1.0), 3.0 * std::exp(cplx{0.0, -2.0}), 1e-14));
    const SpectralMeasure x = SpectralMeasure::exp_alpha(0.0, 1.0);
    for (int k : {0, 3, 10, 20}) CHECK(log_moment(x, k) == doctest::Approx(std::lgamma(k + 1.0)).epsilon(1e-10));
}

TEST_CASE("spectral transform is holomorphic below the real axis") {
    const SpectralMeasure e = SpectralMeasure::exp_alpha(1.0, 0.5);
    const cplx t{0.4, -0.3};
    const double d = 1e-3;
    // Fourth-order central differences along the real and imaginary axes.
    auto diff = [&](cplx dir) {
        return (8.0 * (spectral_fourier(e, t + d * dir) - spectral_fourier(e, t - d * dir)) -
                (spectral_fourier(e, t + 2.0 * d * dir) - spectral_fourier(e, t - 2.0 * d * dir))) /
               (12.0 * d);
    };
    const cplx dx = diff(1.0);
    const cplx dy = diff({0.0, 1.0});
    CHECK(std::abs(dy - cplx{0, 1} * dx) < 1e-8 * (1.0 + std::abs(dx)));
}

TEST_CASE("analyticity classes of spectral measures") {
    CHECK(measure_analyticity_class(SpectralMeasure::atom(1.0)).cls == AnalyticityClass::ANALYTIC);
    CHECK(measure_analyticity_class(SpectralMeasure::exp_alpha(1.0, 1.0)).cls == AnalyticityClass::ANALYTIC);
    CHECK(measure_analyticity_class(SpectralMeasure::exp_alpha(1.0, 0.5)).cls == AnalyticityClass::GEVREY_NONANALYTIC);
}

TEST_CASE("two-point function: Bessel and momentum routes") {
    const SpectralMeasure a = SpectralMeasure::atom(1.0);
    const cplx ref{0.0714896362603290877783741453384, -0.001300870542037744737454014132};
    CHECK(close(two_point_kl(a, 0.3, 1.0, 0.04), ref, 1e-10));
    CHECK(close(two_point_momentum(1.0, 0.3, 1.0, 0.04), ref, 1e-6));
}

TEST_CASE("oscillator FBI profile: quadrature against closed form") {
    const TruncatedQM qm = harmonic_oscillator(10, 1.0);
    CHECK(qm.size() == 10);
    CHECK(qm.position_matrix[2][3] == doctest::Approx(std::sqrt(1.5)));
    const QmFbiProfile p = qm_fbi_profile(qm, 0.0, 1.0, make_h_ladder());
    CHECK(p.max_rel_diff < 1e-6);
    CHECK(p.fit.verdict == Verdict::EXP_SMALL);
}

TEST_CASE("correlator frequencies lie in the nested cone") {
    const TruncatedQM qm = harmonic_oscillator(10, 1.0);
    std::vector<cplx> phi(10, 0.0);
    phi[0] = 1.0;
    phi[2] = 0.5;
    for (const auto& term : qm_correlator_terms(qm, phi, 2)) CHECK(in_nested_cone(term.nu, 1e-12));
    CHECK(in_nested_cone({-1.0, 2.0}));
    CHECK_FALSE(in_nested_cone({2.0, -1.0}));
}

TEST_CASE("retarded propagator of a bump is supported in its causal future") {
    CommutatorOptions opt;
    opt.chart = Box::rect(-2, 2, -2, 2);
    const CommutatorResult g = commutator_1p1(spacetime_bump(0.0, 0.0, 0.3), PropagatorKind::RET, opt);
    CHECK(g.residual < 10 * opt.step * opt.step);
    CHECK(std::abs(g(-1.0, 0.0)) == 0.0);
    CHECK(std::abs(g(1.5, 0.0)) > 0.0);
    CHECK(std::abs(g(0.5, 1.5)) == 0.0);
}
