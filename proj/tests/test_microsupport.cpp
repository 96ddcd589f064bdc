#include "doctest.h"

#include "microlocal/microsupport.hpp"

#include <cmath>

using namespace microlocal;

TEST_CASE("phase window nodes") {
    const PhaseWindow w = PhaseWindow::line(-1, 1, -1, 1, 0.5, 0.5);
    CHECK(w.nodes().size() == 25);
    CHECK(w.cell_diagonal() == doctest::Approx(std::sqrt(0.5)));
    PhaseWindow bad = w;
    bad.x_step = -1.0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("phase set distances") {
    const PhaseSet p = PhaseSet::point({{1.0, 0}, {1.0, 0}});
    CHECK(p.distance({{1.0, 0}, {2.0, 0}}) == doctest::Approx(1.0));
    const PhaseSet z = PhaseSet::zero_section(Box::interval(-1, 1));
    CHECK(z.distance({{0.0, 0}, {0.5, 0}}) == doctest::Approx(0.5));
    CHECK(z.distance({{2.0, 0}, {0.0, 0}}) == doctest::Approx(1.0));
}

TEST_CASE("smooth step and plateau") {
    CHECK(smooth_step(-0.1) == 0.0);
    CHECK(smooth_step(1.1) == 1.0);
    CHECK(smooth_step(0.5) == doctest::Approx(0.5));
    CHECK(plateau(0.0, -1, 1, 0.5) == 1.0);
    CHECK(plateau(2.0, -1, 1, 0.5) == 0.0);
}

TEST_CASE("coherent family is microsupported at its centre") {
    const SampledFamily psi = coherent_family({{0.0, 0}, {1.0, 0}});
    const HLadder ladder = make_h_ladder();
    const PhaseWindow w = PhaseWindow::line(-2, 2, -2, 2, 0.5, 0.5);
    ScanOptions opt;
    opt.weight_powers = {0};
    const MicrosupportMap map = microsupport_scan(psi, w, ladder, opt);
    REQUIRE(map.fits.size() == w.nodes().size());
    for (std::size_t i = 0; i < map.nodes.size(); ++i) {
        const auto& n = map.nodes[i];
        const double d = std::hypot(n.x[0], n.xi[0] - 1.0);
        if (d < 1e-12) CHECK(map.verdict(i) == Verdict::NOT_EXP_SMALL);
        if (d > 0.7) CHECK(map.verdict(i) == Verdict::EXP_SMALL);
    }
    const DecayFit away = uniform_small_check(psi, PhaseSet::point({{0, 0}, {1, 0}}), 0.5, w, ladder, opt);
    CHECK(away.verdict == Verdict::EXP_SMALL);
    const DecayFit near = uniform_small_check(psi, PhaseSet::point({{1.5, 0}, {-1, 0}}), 0.5, w, ladder, opt);
    CHECK(near.verdict == Verdict::NOT_EXP_SMALL);
}

TEST_CASE("pullback points move covectors by the transposed Jacobian") {
    const AnalyticMap F = linear_map(2.0);
    const auto pts = pullback_points({{{1.0, 0}, {1.0, 0}}}, F, -2.0, 2.0);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].x[0] == doctest::Approx(0.5));
    CHECK(pts[0].xi[0] == doctest::Approx(2.0));
    const auto pre = preimages(sine_perturbation(0.3), 0.4, -2, 2);
    REQUIRE(pre.size() == 1);
    CHECK(pre[0] + 0.3 * std::sin(pre[0]) == doctest::Approx(0.4));
}

TEST_CASE("bump normalisation is positive") {
    CHECK(bump_normalization(0.1, 0.3) > 0.0);
    CHECK(bump_normalization(0.05, 0.3) > 0.0);
}
