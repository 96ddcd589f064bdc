#include "doctest.h"

#include "microlocal/phase_core.hpp"

#include <cmath>
#include <stdexcept>

using namespace microlocal;

TEST_CASE("ladder invariants") {
    const HLadder l = make_h_ladder();
    CHECK(l.size() == 16);
    CHECK(l.largest() == doctest::Approx(0.5));
    CHECK(l.smallest() == doctest::Approx(0.5 * std::pow(0.8, 15)));
    CHECK_THROWS_AS(make_h_ladder(0.5, 0.3, 16), std::invalid_argument);
    CHECK_THROWS_AS(make_h_ladder(0.5, 0.8, 4), std::invalid_argument);
    CHECK_THROWS_AS(ladder_from_rungs({0.5, 0.6, 0.3, 0.2, 0.1, 0.05, 0.04, 0.03}), std::invalid_argument);
    const HLadder r = rescale_ladder(l, 0.25);
    CHECK(r.largest() == doctest::Approx(0.125));
}

TEST_CASE("boxes") {
    const Box a = Box::rect(0, 2, 0, 1);
    CHECK(a.contains({1.0, 0.5}));
    CHECK_FALSE(a.contains({2.5, 0.5}));
    CHECK(a.intersect(Box::rect(3, 4, 0, 1)).empty());
    CHECK(a.expanded(1.0).contains({-0.5, -0.5}));
}

TEST_CASE("grid axis keeps both ends") {
    const auto g = grid_axis(-1.0, 1.0, 0.25);
    REQUIRE(g.size() == 9);
    CHECK(g.front() == -1.0);
    CHECK(g.back() == doctest::Approx(1.0));
}

namespace {
DecayFit fit_of(double (*m)(double)) {
    const HLadder l = make_h_ladder();
    std::vector<double> mag;
    for (double h : l.rungs) mag.push_back(m(h));
    return fit_decay(l.rungs, mag);
}
}  // namespace

TEST_CASE("decay fit recovers exponential rates") {
    const DecayFit f = fit_of([](double h) { return std::sqrt(h) * std::exp(-0.25 / h); });
    CHECK(f.verdict == Verdict::EXP_SMALL);
    CHECK(f.delta_hat == doctest::Approx(0.25).epsilon(0.02 / 0.25));
    CHECK(f.r_squared > 0.99);
}

TEST_CASE("decay fit: constants and sub-exponential decay are not exponentially small") {
    CHECK(fit_of([](double) { return 3.0; }).verdict == Verdict::NOT_EXP_SMALL);
    CHECK(fit_of([](double h) { return std::pow(h, 2.0); }).verdict == Verdict::NOT_EXP_SMALL);
    CHECK(fit_of([](double h) { return std::exp(-1.0 / std::sqrt(h)); }).verdict != Verdict::EXP_SMALL);
}

TEST_CASE("decay fit: all-zero data is the infinite-rate sentinel") {
    const DecayFit f = fit_of([](double) { return 0.0; });
    CHECK(f.verdict == Verdict::EXP_SMALL);
    CHECK(std::isinf(f.delta_hat));
}

TEST_CASE("verdict strings round trip") {
    for (Verdict v : {Verdict::EXP_SMALL, Verdict::NOT_EXP_SMALL, Verdict::INCONCLUSIVE}) {
        CHECK(verdict_from_string(to_string(v)) == v);
    }
}

TEST_CASE("family algebra") {
    SampledFamily a = zero_family(1, Box::interval(-1, 1));
    a.eval = [](double, const Vec& x) { return cplx{x[0]}; };
    SampledFamily b = a;
    b.eval = [](double, const Vec&) { return cplx{0.0, 2.0}; };
    CHECK(family_sum(a, b)(0.1, 0.5) == cplx{0.5, 2.0});
    CHECK(family_product(a, b)(0.1, 0.5) == cplx{0.0, 1.0});
    CHECK(family_conj(b)(0.1, 0.0) == cplx{0.0, -2.0});
    CHECK(family_scale(a, 3.0)(0.1, 0.5) == cplx{1.5, 0.0});
    CHECK(family_shift(a, {1.0, 0.0})(0.1, 0.5).real() == doctest::Approx(-0.5));
}
