#pragma once

#include <array>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace microlocal {

using cplx = std::complex<double>;
using Vec = std::array<double, 2>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEps = std::numeric_limits<double>::epsilon();

/*
 * Decreasing sequence of semiclassical scales h_0 > h_1 > ... used for
 * all decay-rate estimates. At least 8 rungs, all in (0,1], with the
 * ratio of consecutive rungs in [0.5, 0.95].
 */
struct HLadder {
    std::vector<double> rungs;

    std::size_t size() const { return rungs.size(); }
    double operator[](std::size_t k) const { return rungs[k]; }
    double smallest() const { return rungs.back(); }
    double largest() const { return rungs.front(); }
};

HLadder make_h_ladder(double h_max = 0.5, double ratio = 0.8, int count = 16);

// Validates an explicit rung list against the ladder invariants.
HLadder ladder_from_rungs(std::vector<double> rungs);

// Multiplies every rung by lambda; the result must still satisfy the invariants.
HLadder rescale_ladder(const HLadder& ladder, double lambda);

// Axis-aligned closed box in R^d, d in {1, 2}.
struct Box {
    int dim = 1;
    Vec lo{0.0, 0.0};
    Vec hi{0.0, 0.0};

    static Box interval(double a, double b);
    static Box rect(double x0, double x1, double y0, double y1);

    bool contains(const Vec& x, double tol = 0.0) const;
    bool empty() const;
    double width(int axis) const { return hi[axis] - lo[axis]; }
    Box intersect(const Box& other) const;
    Box expanded(double r) const;
};

struct GridSamples {
    double step = 0.0;
    double origin = 0.0;
    std::vector<cplx> values;
};

/*
 * An h-indexed family of complex functions on a box. The evaluator is
 * the ground truth; fbi_exact, when present, is a closed-form FBI
 * transform used instead of quadrature (point measures are represented
 * this way). xi_extent bounds the momentum content |xi| of f_h in the
 * semiclassical scaling and is used to pick quadrature resolution.
 */
struct SampledFamily {
    int dim = 1;
    Box support = Box::interval(-1.0, 1.0);
    std::function<cplx(double h, const Vec& x)> eval;
    std::function<cplx(double h, const Vec& x, const Vec& xi)> fbi_exact;
    double xi_extent = 0.0;
    // sqrt(h) divided by the finest length scale of f_h; 2 for a Gaussian of width sqrt(h)/2.
    double sharpness = 1.0;
    // Point masses w delta(x - a) (d = 1) carried next to the density. Ignored
    // by eval; included by every transform when fbi_exact is absent.
    std::vector<std::pair<double, cplx>> atoms;
    // Points (d = 1) where f may fail to be analytic: support edges, kinks.
    std::vector<double> breakpoints;
    // True when the family does not depend on h.
    bool h_independent = false;
    std::string label;
    // Optional per-rung samples on a uniform grid (d = 1).
    std::shared_ptr<const std::map<double, GridSamples>> cache;

    cplx operator()(double h, double x) const { return eval(h, Vec{x, 0.0}); }
    cplx operator()(double h, const Vec& x) const { return eval(h, x); }
    bool has_exact_fbi() const { return static_cast<bool>(fbi_exact); }
};

SampledFamily zero_family(int dim, const Box& support);

// Attaches grid samples for every rung. Cached values equal the evaluator.
SampledFamily with_cache(SampledFamily f, const HLadder& ladder, double step = 0.0);
const GridSamples* cached_samples(const SampledFamily& f, double h);

SampledFamily family_sum(const SampledFamily& a, const SampledFamily& b);
SampledFamily family_product(const SampledFamily& a, const SampledFamily& b);
SampledFamily family_scale(const SampledFamily& f, cplx c);
SampledFamily family_conj(const SampledFamily& f);
SampledFamily family_shift(const SampledFamily& f, const Vec& a);

enum class Verdict { EXP_SMALL, NOT_EXP_SMALL, INCONCLUSIVE };

std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

struct DecayThresholds {
    double delta_min = 0.05;
    double rho_min = 0.98;
};

struct DecaySample {
    double h = 0.0;
    double magnitude = 0.0;
    // Absolute noise level of this sample; values at or below it carry no
    // information about the decay rate.
    double floor = 0.0;
};

struct DecayFit {
    double delta_hat = 0.0;
    double log_c_hat = 0.0;
    double r_squared = 0.0;
    Verdict verdict = Verdict::INCONCLUSIVE;

    // Diagnostics. prefactor_power is p in C h^p e^{-delta/h}.
    double prefactor_power = 0.0;
    double r2_poly = 0.0;
    double r2_exp2 = 0.0;
    double sse_exp = 0.0;
    double sse_stretched = 0.0;
    int rungs_used = 0;
    bool underflow_envelope = false;

    bool flagged() const { return verdict != Verdict::EXP_SMALL; }
};

/*
 * Decides whether |g(h)| behaves like C h^p e^{-delta/h} with delta > 0.
 *
 * The decay rate comes from a least-squares fit of
 *   log m = log C + p log h - delta / h,
 * which is exact for power-law prefactors. A competing fit
 *   log m = a + p log h - c h^{-1/2}
 * detects sub-exponential decay; when it explains the data better the
 * verdict cannot be EXP_SMALL. NOT_EXP_SMALL requires delta < delta_min/2
 * and a power law explaining the data at least as well as a pure
 * exponential. Rungs below 100 eps * max or below their noise floor are
 * dropped; if fewer than five survive the rate is read off the underflow
 * envelope.
 */
DecayFit fit_decay(std::span<const DecaySample> samples,
                   const DecayThresholds& thresholds = {});

DecayFit fit_decay(const std::vector<double>& h, const std::vector<double>& magnitude,
                   const DecayThresholds& thresholds = {});

// sup over grid nodes of region of (1+|x|^2)^N |f(h,x)|. step = 0 picks sqrt(h)/4.
double weighted_sup(const SampledFamily& f, double h, const Box& region, int weight_power,
                    double step = 0.0);

// Uniform grid coordinates covering [a,b] with spacing close to step, both ends included.
std::vector<double> grid_axis(double a, double b, double step);

}  // namespace microlocal
