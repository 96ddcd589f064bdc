#include "doctest.h"

#include "microlocal/wf_calculus.hpp"

#include <cmath>

using namespace microlocal;

TEST_CASE("cones in one dimension") {
    CHECK(Cone::positive().negated() == Cone::negative());
    CHECK(Cone::positive().united(Cone::negative()) == Cone::full(1));
    CHECK(Cone::positive().intersected(Cone::negative()).empty());
}

TEST_CASE("arcs wrap and merge") {
    CHECK(wrap_angle(-0.5) == doctest::Approx(2 * kPi - 0.5));
    const Cone a = Cone::arc(0.0, 1.0).united(Cone::arc(0.5, 2.0));
    REQUIRE(a.arcs.size() == 1);
    CHECK(a.arcs[0].length() == doctest::Approx(2.0));
    CHECK(a.contains({1.0, 1.0}));
    CHECK_FALSE(a.contains({-1.0, 0.0}));
    CHECK(Cone::arc(0.0, 1.0).negated().contains_angle(kPi + 0.5));
}

TEST_CASE("conic sets: union, intersection, json") {
    const ConicSet a = ConicSet::single(Box::interval(-1, 1), Cone::positive());
    const ConicSet b = ConicSet::single(Box::interval(0, 2), Cone::negative());
    CHECK_FALSE(cs_intersects(a, b));
    CHECK(cs_intersects(a, a.negated().negated()));
    const ConicSet u = cs_union(a, b);
    CHECK(u.contains({0.5, 0}, {1, 0}));
    CHECK(u.contains({1.5, 0}, {-1, 0}));
    CHECK_FALSE(u.contains({1.5, 0}, {1, 0}));
    const ConicSet back = conic_set_from_json(to_json(u));
    CHECK(back.contains({0.5, 0}, {1, 0}));
    CHECK_FALSE(back.contains({1.5, 0}, {1, 0}));
}

TEST_CASE("product rule rejects opposite directions at a shared point") {
    const ConicSet a = ConicSet::single(Box::interval(-1, 1), Cone::positive());
    const ConicSet b = ConicSet::single(Box::interval(0, 2), Cone::negative());
    CHECK_THROWS_AS(cs_product(a, b), CalculusError);
    const ConicSet p = cs_product(a, a);
    CHECK(p.contains({0.0, 0}, {1, 0}));
}

TEST_CASE("pullback by the diagonal is the product wave front bound") {
    const Box sq = Box::rect(-1, 1, -1, 1);
    const ConicSet w = ConicSet::single(sq, Cone::arc(0.0, 0.0));
    const ConicSet pulled = cs_pullback(w, diagonal_embedding(Box::interval(-1, 1)));
    CHECK(pulled.contains({0.0, 0}, {1, 0}));
    // (1, -1) is conormal to the diagonal.
    const ConicSet bad = ConicSet::single(sq, Cone::ray(7 * kPi / 4));
    CHECK_THROWS_AS(cs_pullback(bad, diagonal_embedding(Box::interval(-1, 1))), CalculusError);
}

TEST_CASE("tensor rule includes the zero-covector blocks") {
    const ConicSet a = ConicSet::single(Box::interval(0, 1), Cone::positive());
    const ConicSet t = cs_tensor(a, Box::interval(0, 1), a, Box::interval(0, 1));
    CHECK(t.contains({0.5, 0.5}, {1, 0}));
    CHECK(t.contains({0.5, 0.5}, {0, 1}));
    CHECK(t.contains({0.5, 0.5}, {1, 1}));
    CHECK_FALSE(t.contains({0.5, 0.5}, {-1, 0}));
}

TEST_CASE("characteristic set of the wave operator is the light cone") {
    const Symbol p = [](const Vec&, const Vec& xi) { return xi[0] * xi[0] - xi[1] * xi[1]; };
    const ConicSet c = char_set(p, 2, Box::rect(-1, 1, -1, 1), 4);
    CHECK(c.contains({0, 0}, {1, 1}, 1e-3));
    CHECK(c.contains({0, 0}, {-1, 1}, 1e-3));
    CHECK_FALSE(c.contains({0, 0}, {1, 0}));
}

TEST_CASE("spectrum cone and rightmost causality") {
    const SpectrumCone k = spectrum_cone(2);
    CHECK(k.in_K({{-1.0, 0.0}, {-1.0, 0.5}}));
    CHECK_FALSE(k.in_K({{1.0, 0.0}, {0.5, 0.0}}));
    CHECK(k.distance({{-1.0, 0.0}, {-1.0, 0.0}}) == 0.0);
    CHECK(rightmost_future_causal({{-1.0, 0.0}, {2.0, 1.0}}));
    CHECK(rightmost_future_causal({{1.0, 0.0}, {0.0, 0.0}}));
    CHECK_FALSE(rightmost_future_causal({{1.0, 0.0}, {-2.0, 0.0}}));
    CHECK_FALSE(rightmost_future_causal({{0.0, 0.0}, {0.0, 0.0}}));
}

TEST_CASE("holmgren and edge predicates") {
    Hypersurface s;
    s.phi = [](const Vec& p) { return p[1]; };
    s.grad = [](const Vec&) { return Vec{0.0, 1.0}; };
    const Box win = Box::rect(-1, 1, -1, 1);
    const ConicSet timelike = ConicSet::single(win, Cone::arc(-kPi / 8 + 2 * kPi, kPi / 8 + 2 * kPi));
    const UcpResult r = ucp_predicates(timelike, s, win);
    CHECK(r.holmgren_ok);
    CHECK(r.edge_ok);
    const ConicSet both = cs_union(timelike, timelike.negated());
    CHECK_FALSE(ucp_predicates(both, s, win).edge_ok);
}
