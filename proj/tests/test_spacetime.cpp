#include "doctest.h"

#include "microlocal/spacetime.hpp"

#include <cmath>

using namespace microlocal;

TEST_CASE("causal classification in Minkowski space") {
    const SpacetimeModel m = minkowski();
    CHECK(cone_classify(m, {0, 0}, {1, 0}) == CausalClass::TIMELIKE_FUTURE);
    CHECK(cone_classify(m, {0, 0}, {-1, 0.5}) == CausalClass::TIMELIKE_PAST);
    CHECK(cone_classify(m, {0, 0}, {1, 1}) == CausalClass::NULL_FUTURE);
    CHECK(cone_classify(m, {0, 0}, {0, 1}) == CausalClass::SPACELIKE);
    CHECK(cone_classify(m, {0, 0}, {0, 0}) == CausalClass::ZERO);
    CHECK(vector_classify(m, {0, 0}, {1, 0.2}) == CausalClass::TIMELIKE_FUTURE);
    const auto s = null_slopes(m, 0.3, 0.1);
    CHECK(s[0] == doctest::Approx(-1.0));
    CHECK(s[1] == doctest::Approx(1.0));
}

TEST_CASE("conformal factors leave the causal structure unchanged") {
    const SpacetimeModel c = conformal([](double t, double x) { return 1.0 + 0.3 * std::sin(t) * std::cos(x); });
    const auto s = null_slopes(c, 0.4, -0.2);
    CHECK(s[0] == doctest::Approx(-1.0));
    CHECK(s[1] == doctest::Approx(1.0));
}

TEST_CASE("Kruskal areal radius solves its defining equation") {
    const double M = 1.0;
    for (auto [T, X] : {std::pair{0.0, 1.0}, std::pair{0.3, 0.8}, std::pair{0.5, 0.6}}) {
        const double r = kruskal_r(T, X, M);
        CHECK(r > 0.0);
        CHECK((1.0 - r / (2 * M)) * std::exp(r / (2 * M)) == doctest::Approx(T * T - X * X).epsilon(1e-10));
    }
    CHECK(kruskal_r(0.0, 0.0, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("chronological future of a point is the open forward cone") {
    const SpacetimeModel m = minkowski(Box::rect(-1, 3, -2, 2));
    const Region f = chronological_set(m, Vec{0.0, 0.0}, TimeDirection::FUTURE, 64, 64);
    const Region exact = region_from_predicate(f.box, 64, 64, [](double t, double x) { return t > std::abs(x); });
    CHECK(hausdorff_cells(f, exact) <= 1.0);
    CHECK(chronologically_precedes(m, {0, 0}, {1.0, 0.5}));
    CHECK_FALSE(chronologically_precedes(m, {0, 0}, {1.0, 1.5}));
}

TEST_CASE("causal diamond") {
    const SpacetimeModel m = minkowski(Box::rect(-1, 3, -2, 2));
    const IZeroResult d = i_zero(m, {0, 0}, {2, 0}, 64, 64);
    CHECK(d.diagnostic.empty());
    const Region exact = region_from_predicate(d.region.box, 64, 64, [](double t, double x) {
        return t > std::abs(x) && 2.0 - t > std::abs(x);
    });
    CHECK(hausdorff_cells(d.region, exact) <= 1.0);
    CHECK_FALSE(i_zero(m, {0, 0}, {0.5, 1.5}, 64, 64).diagnostic.empty());
}

TEST_CASE("region algebra") {
    const Box b = Box::rect(0, 1, 0, 1);
    const Region a = region_from_predicate(b, 10, 10, [](double t, double) { return t < 0.5; });
    const Region c = region_from_predicate(b, 10, 10, [](double, double x) { return x < 0.5; });
    CHECK(a.count() == 50);
    CHECK(a.intersected(c).count() == 25);
    CHECK(a.united(c).count() == 75);
    CHECK(a.intersected(c).subset_of(a));
    CHECK(a.interior().count() < a.count());
    CHECK(region_from_json(to_json(a)).same_mask(a));
    CHECK(hausdorff_cells(a, a) == 0.0);
}

TEST_CASE("timelike envelope of a diamond is itself") {
    const SpacetimeModel m = minkowski(Box::rect(-1, 3, -2, 2));
    const Region d = i_zero(m, {0, 0}, {2, 0}, 64, 64).region;
    const EnvelopeResult e = timelike_envelope(m, d);
    CHECK(e.converged);
    CHECK(hausdorff_cells(e.region, d) <= 1.0);
}

TEST_CASE("tube boundaries are timelike surfaces with spacelike conormals") {
    const SpacetimeModel m = minkowski(Box::rect(-1, 3, -2, 2));
    const auto sides = tube_sweep(m, straight_segment({0, 0}, {2, 0}), 0.1);
    CHECK(sides.size() == 5);
    CHECK_THROWS_AS(tube_sweep(m, bent_segment_family(2.0, 0.2), 2.2), TubeError);
}

TEST_CASE("future causal covectors per cell") {
    const ConicSet c = causal_conic_set(minkowski(), Box::rect(0, 1, 0, 1), 2);
    CHECK(c.contains({0.5, 0.5}, {1, 0}));
    CHECK_FALSE(c.contains({0.5, 0.5}, {-1, 0}));
    CHECK_FALSE(c.contains({0.5, 0.5}, {0, 1}));
}
