#include "doctest.h"

#include "microlocal/analytic_wf.hpp"
#include "microlocal/quadrature.hpp"

#include <cmath>

using namespace microlocal;

TEST_CASE("sech kernel integrates to one half on every line in the strip") {
    for (double y : {0.0, 0.4, -0.8}) {
        const double re = quad::integrate_gk([y](double x) { return sech_kernel({x, y}).real(); }, -60, 60, 1e-13);
        const double im = quad::integrate_gk([y](double x) { return sech_kernel({x, y}).imag(); }, -60, 60, 1e-13);
        CHECK(re == doctest::Approx(0.5).epsilon(1e-10));
        CHECK(std::abs(im) < 1e-10);
    }
}

TEST_CASE("sech decomposition reconstructs a Gaussian") {
    const SampledFamily g = gaussian_function();
    for (double x : {0.0, 0.6}) {
        CHECK(std::abs(sech_reconstruct(g, x) - std::exp(-x * x / 2)) < 1e-5);
    }
}

TEST_CASE("radius of convergence") {
    const RadiusEstimate r = analyticity_radius([](cplx z) { return 1.0 / (1.0 + z * z); }, 0.0, 0.5);
    CHECK(r.tag == RadiusTag::CONVERGED);
    CHECK(r.radius == doctest::Approx(1.0).epsilon(0.05));
    const RadiusEstimate e = analyticity_radius([](cplx z) { return std::exp(z); }, 0.0, 0.5);
    CHECK(e.tag == RadiusTag::ENTIRE_LIKE);
    std::vector<double> a;
    for (int k = 0; k < 30; ++k) a.push_back(std::pow(0.5, k));
    CHECK(analyticity_radius_from_coefficients(a).radius == doctest::Approx(2.0).epsilon(0.05));
    const RadiusEstimate rr = analyticity_radius_real([](double x) { return 1.0 / (4.0 + x * x); }, 0.0);
    CHECK(rr.radius == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("spectral boundary value closed forms") {
    CHECK(std::abs(spectral_boundary_value_at(0.0) - 2.0) < 1e-10);
}

TEST_CASE("one-sided detector: delta, Gaussian, boundary value") {
    const HLadder ladder = wfa_ladder();
    CHECK(one_sided_check(point_mass(0.0), 0.0, ladder).side == Side::BOTH);
    CHECK(one_sided_check(gaussian_function(), 0.0, ladder).side == Side::NONE);
    const OneSidedResult s = one_sided_check(spectral_boundary_value(), 0.0, ladder);
    CHECK_FALSE(s.disagree);
    CHECK((s.side == Side::UPPER || s.side == Side::LOWER));
}

TEST_CASE("Heaviside jump is flagged in both directions, smooth points are not") {
    const WfaReport r = wfa_detect(heaviside_family(), {{0.0, 0.0}, {1.0, 0.0}}, directions_1d(), wfa_ladder());
    CHECK(r.flagged_directions(0).size() == 2);
    CHECK(r.empty_at(1));
}

TEST_CASE("direction grids") {
    CHECK(directions_1d().size() == 2);
    const auto d = directions_2d(8);
    REQUIRE(d.size() == 8);
    CHECK(direction_angle(d[2]) == doctest::Approx(kPi / 2));
}
