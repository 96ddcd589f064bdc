#pragma once

#include "microlocal/microsupport.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace microlocal {

// Point mass w delta(x - x0) on the real line.
SampledFamily point_mass(double x0, cplx weight = 1.0);
// Indicator of [0, length].
SampledFamily heaviside_family(double length = 10.0);
// exp(-1/(1-x^2)) on (-1, 1), zero outside.
SampledFamily nonanalytic_bump();
// exp(-x^2/2) on [-half_width, half_width].
SampledFamily gaussian_function(double half_width = 12.0);

/*
 * u(t) = int_0^inf e^{-imt} e^{-sqrt m} dm, the boundary value of a function
 * holomorphic in Im t < 0. Evaluated by rotating the m-contour; the FBI
 * transform is the closed form
 *   alpha_h sqrt(2 pi h) int_0^inf e^{-sqrt m} e^{-(hm+eta)^2/2h} e^{-imt} dm.
 */
SampledFamily spectral_boundary_value(double half_width = 50.0);
cplx spectral_boundary_value_at(double t);

struct WfaOptions {
    ScanOptions scan;
    // Width of the region around the base points on which the cutoff equals one.
    double collar = 1.0;
    bool apply_cutoff = true;
};

struct WfaReport {
    int dim = 1;
    HLadder ladder;
    std::vector<Vec> base_points;
    // Unit covectors; d = 1 uses {+1, -1}.
    std::vector<Vec> directions;
    // fits[b * directions.size() + k]
    std::vector<DecayFit> fits;
    bool quality_low = false;

    const DecayFit& fit(std::size_t b, std::size_t k) const { return fits[b * directions.size() + k]; }
    // INCONCLUSIVE counts as flagged.
    bool flagged(std::size_t b, std::size_t k) const { return fit(b, k).flagged(); }
    std::vector<std::size_t> flagged_directions(std::size_t b) const;
    bool empty_at(std::size_t b) const { return flagged_directions(b).empty(); }
};

/*
 * Ladder for h-independent inputs, h in [0.0035, 0.1]. Flat singularities
 * give |T| ~ e^{-delta/h - c/sqrt h} near them, which looks sub-exponential
 * on the coarser default ladder.
 */
HLadder wfa_ladder();

std::vector<Vec> directions_1d();
// n angles 2 pi k / n on the circle.
std::vector<Vec> directions_2d(int n = 64);
double direction_angle(const Vec& v);

/*
 * Scans |T_h(chi u)(x, xi^)| over the ladder at every base point and
 * direction, chi a plateau cutoff equal to one on the base window plus the
 * collar. Families with a closed-form FBI are scanned without the cutoff.
 */
WfaReport wfa_detect(const SampledFamily& u, const std::vector<Vec>& base_points,
                     const std::vector<Vec>& directions, const HLadder& ladder,
                     const WfaOptions& options = {});

void write_wfa_csv(const WfaReport& report, std::ostream& os);
// Unit circle with flagged directions drawn as red spokes.
void write_wfa_polar_png(const WfaReport& report, std::size_t base, const std::string& path,
                         int size_px = 200);

// K(z) = (1/4) sech(pi z / 2), holomorphic in |Im z| < 1 with int K(x + iy) dx = 1/2.
cplx sech_kernel(cplx z);

/*
 * K_u(z) = int K(z - x) u(x) dx for |Im z| < 1 (d = 1, u read at h = 1).
 * Quadrature in x = Re z + w sinh t, w the distance of z to the strip edge.
 */
cplx sech_decompose(const SampledFamily& u, cplx z);

/*
 * lim_{eps -> 0} K_u(x + i - i eps) + K_u(x - i + i eps), extrapolated from
 * eps, eps/2, eps/4.
 */
cplx sech_reconstruct(const SampledFamily& u, double x, double eps = 1e-3);

enum class RadiusTag { CONVERGED, ENTIRE_LIKE, ZERO_TREND, UNSTABLE };
std::string to_string(RadiusTag t);

struct RadiusEstimate {
    // +inf when ENTIRE_LIKE.
    double radius = 0.0;
    RadiusTag tag = RadiusTag::UNSTABLE;
    // Highest order used.
    int order = 0;
    // |a_k| for k = 0..order.
    std::vector<double> coefficients;
};

/*
 * Radius of convergence of the Taylor series at center, from Cauchy
 * coefficients on the circle |z - center| = r (2 k_max nodes).
 */
RadiusEstimate analyticity_radius(const std::function<cplx(cplx)>& f, cplx center, double r,
                                  int k_max = 48);

// Same, for real-only inputs: Richardson-extrapolated central differences.
RadiusEstimate analyticity_radius_real(const std::function<double(double)>& f, double center,
                                       int k_max = 12);

/*
 * From Taylor coefficients a_k (zeros allowed). ZERO_TREND when the root
 * test values |a_k|^{1/k} increase strictly over the last nonzero orders.
 */
RadiusEstimate analyticity_radius_from_coefficients(const std::vector<double>& a);

enum class Side { NONE, UPPER, LOWER, BOTH };
std::string to_string(Side s);

struct OneSidedResult {
    Side side = Side::NONE;
    bool disagree = false;
    // FBI verdicts at (x0, +1) and (x0, -1).
    DecayFit fit_plus, fit_minus;
    Side fbi_side = Side::NONE;
    // Radii of K_u at x0 + i y_c and x0 - i y_c; y_c = 0.6, singular below 0.5.
    double radius_upper_half = 0.0;
    double radius_lower_half = 0.0;
    Side sech_side = Side::NONE;
};

/*
 * UPPER: WF_a at (x0, xi > 0); LOWER: (x0, xi < 0). The FBI detector is
 * cross-checked against analyticity of K_u: a singularity at x0 + i
 * belongs to xi < 0, one at x0 - i to xi > 0. Disagreement returns BOTH.
 */
OneSidedResult one_sided_check(const SampledFamily& u, double x0, const HLadder& ladder,
                               const WfaOptions& options = {});

}  // namespace microlocal
