#include "doctest.h"

#include "microlocal/analytic_wf.hpp"
#include "microlocal/transforms.hpp"

#include <cmath>

using namespace microlocal;

namespace {
SampledFamily stripped(SampledFamily f) {
    f.fbi_exact = nullptr;
    return f;
}
}  // namespace

TEST_CASE("normalising constant") {
    CHECK(fbi_alpha(0.1, 1) == doctest::Approx(std::pow(2.0, -0.5) * std::pow(kPi * 0.1, -0.75)));
    CHECK(fbi_alpha(0.1, 2) == doctest::Approx(0.5 * std::pow(kPi * 0.1, -1.5)));
}

TEST_CASE("coherent state: quadrature matches the closed form") {
    const PhasePoint c{{0.3, 0.0}, {0.7, 0.0}};
    const SampledFamily psi = coherent_state(c, 0.05);
    const SampledFamily raw = stripped(psi);
    for (double h : {0.1, 0.05, 0.02}) {
        for (PhasePoint pt : {PhasePoint{{0.3, 0}, {0.7, 0}}, PhasePoint{{0.1, 0}, {0.5, 0}},
                              PhasePoint{{0.5, 0}, {1.0, 0}}}) {
            const cplx exact = coherent_fbi(c, 0.05, h, pt, 1);
            const cplx quad = fbi_point(raw, h, pt);
            CHECK(std::abs(quad - exact) < 1e-9 * (1.0 + std::abs(exact)));
            CHECK(std::abs(fbi_point(psi, h, pt) - exact) < 1e-14 * (1.0 + std::abs(exact)));
        }
    }
}

TEST_CASE("xi line agrees with pointwise evaluation") {
    const SampledFamily g = gaussian_function();
    const double h = 0.05;
    const FbiBatch line = fbi_xi_line(g, h, 0.4, -1.0, 0.125, 17);
    REQUIRE(line.values.size() == 17);
    for (int k = 0; k < 17; k += 4) {
        const cplx p = fbi_point(g, h, {{0.4, 0}, {-1.0 + 0.125 * k, 0}});
        CHECK(std::abs(line.values[k] - p) < 1e-10);
    }
    const FbiBatch xs = fbi_x_line(g, h, 0.5, -1.0, 0.25, 9);
    for (int k = 0; k < 9; k += 4) {
        const cplx p = fbi_point(g, h, {{-1.0 + 0.25 * k, 0}, {0.5, 0}});
        CHECK(std::abs(xs.values[k] - p) < 1e-10);
    }
}

TEST_CASE("semiclassical Fourier transform of a Gaussian") {
    const SampledFamily g = gaussian_function();
    const double h = 0.5;
    for (double xi : {0.0, 0.3, 0.8}) {
        const cplx v = semiclassical_fourier(g, h, {xi, 0.0}).value;
        const double expect = std::exp(-xi * xi / (2 * h * h)) / std::sqrt(h);
        CHECK(std::abs(v - expect) < 1e-10);
    }
    const auto line = semiclassical_fourier_line(g, h, 0.0, 0.1, 8);
    for (int k = 0; k < 8; ++k) {
        const double xi = 0.1 * k;
        CHECK(std::abs(line[k] - std::exp(-xi * xi / (2 * h * h)) / std::sqrt(h)) < 1e-8);
    }
}

TEST_CASE("FBI transform is holomorphic in x - i xi after the Gaussian weight") {
    const SampledFamily g = gaussian_function();
    for (double h : {0.1, 0.05}) {
        CHECK(holomorphy_residual(g, h, 0.3, 0.5) < 1e-6);
        CHECK(holomorphy_residual(g, h, -0.7, -0.2) < 1e-6);
    }
}

TEST_CASE("radial inversion recovers a Gaussian") {
    const SampledFamily g = gaussian_function();
    for (double x : {-0.5, 0.0, 0.3}) {
        const RadialReconstruction r = fbi_radial_reconstruct(g, x);
        CHECK(r.converged);
        CHECK(std::abs(r.value - std::exp(-x * x / 2)) < 1e-3);
    }
}

TEST_CASE("adjoint reconstruction on a small window") {
    const SampledFamily g = gaussian_function();
    const double h = 0.05;
    const double s = std::sqrt(h) / 4;
    const FbiField field = fbi_field(g, FbiWindow{-6, 6, -2.5, 2.5, s, s}, {h});
    const Reconstruction r = fbi_adjoint_reconstruct(field, 0, 0.2);
    CHECK_FALSE(r.warning);
    CHECK(std::abs(r.value - std::exp(-0.02)) < 1e-6);
}

TEST_CASE("classical and modified transforms are rescalings") {
    const SampledFamily g = gaussian_function();
    const double xi = 8.0;
    const double h = 1.0 / xi;
    const cplx a = fbi_classical(g, 0.2, xi);
    const cplx b = fbi_point(g, h, {{0.2, 0}, {1.0, 0}}) / fbi_alpha(h, 1);
    CHECK(std::abs(a - b) < 1e-9 * std::abs(b));
    const cplx m = fbi_modified(g, {{0.2, 0}, {0.6, 0}}, 0.1, 2.0);
    const cplx ref = std::pow(2.0, -0.5) * fbi_point(g, 0.05, {{0.2, 0}, {0.3, 0}});
    CHECK(std::abs(m - ref) < 1e-12 * (1.0 + std::abs(ref)));
}
