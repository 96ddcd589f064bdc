#pragma once

#include "microlocal/analytic_wf.hpp"
#include "microlocal/spacetime.hpp"
#include "microlocal/wf_calculus.hpp"

#include "json.hpp"

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace microlocal {

// ---- Spectral measures ----

enum class DensityKind { NONE, EXP_ALPHA, CUSTOM };

/*
 * Sum of point masses w delta(m - m_j) plus an optional density on [m0, inf).
 * EXP_ALPHA is sigma(m) = e^{-m^alpha}. CUSTOM densities must state m_max.
 */
struct SpectralMeasure {
    std::vector<std::pair<double, double>> atoms;
    DensityKind density = DensityKind::NONE;
    double m0 = 0.0;
    double alpha = 1.0;
    std::function<double(double)> custom;
    double custom_m_max = 0.0;
    // Multiplies every atom weight and the density.
    double scale = 1.0;

    static SpectralMeasure atom(double mass, double weight = 1.0);
    static SpectralMeasure exp_alpha(double m0, double alpha);

    double sigma(double m) const;
    // Truncation point with tail below 1e-12 of the density mass.
    double m_max() const;
    double total_mass() const;
    // rho([0, m]) <= C (1 + m)^N.
    std::pair<double, int> envelope() const;
    void validate() const;
};

/*
 * mu^(t) = sum w e^{-i m t} + int e^{-i m t} sigma(m) dm for Im t <= 0.
 * Composite Gauss-Legendre with panels shorter than a quarter period.
 */
cplx spectral_fourier(const SpectralMeasure& rho, cplx t);

enum class AnalyticityClass { ANALYTIC, GEVREY_NONANALYTIC, UNRESOLVED };
std::string to_string(AnalyticityClass c);

struct MomentRow {
    int k = 0;
    double log_moment = 0.0;
    // (M_k / (M_0 k!))^{1/k}; normalising by the total mass makes the class scale invariant.
    double root = 0.0;
};

struct AnalyticityReport {
    AnalyticityClass cls = AnalyticityClass::UNRESOLVED;
    std::vector<MomentRow> table;
    // Slope of log root against log k over the upper half of the table.
    double slope = 0.0;
    int k_max_used = 0;
    bool k_max_lowered = false;
};

// log M_k, M_k = int m^k d rho(m).
double log_moment(const SpectralMeasure& rho, int k);

/*
 * ANALYTIC when the fitted slope is <= 0.1 (bounded roots), GEVREY_NONANALYTIC
 * when it is >= 0.5, UNRESOLVED in between.
 */
AnalyticityReport measure_analyticity_class(const SpectralMeasure& rho, int k_max = 24);

// ---- Kallen-Lehmann two-point function, 1+1 dimensions ----

// K_0(z) for Re z > 0: power series for |z| <= 12, Hankel expansion beyond.
cplx bessel_k0(cplx z);

/*
 * W(tau, x) = int d rho(m) (1/2 pi) K_0(m sqrt(x^2 - (tau - i eps)^2)), the
 * principal root. Atoms must have m > 0.
 */
cplx two_point_kl(const SpectralMeasure& rho, double tau, double x, double eps);

// Independent route for one mass: (1/2 pi) int_0^inf cos(kx) e^{-i w (tau - i eps)} / w dk.
cplx two_point_momentum(double mass, double tau, double x, double eps);

// tau -> W(tau, x0) on [-half_width, half_width] as an h-independent family.
SampledFamily two_point_family(const SpectralMeasure& rho, double x0, double eps, double half_width = 6.0);

// ---- Smearing counterexample ----

struct DerivativeRow {
    int k = 0;
    double cauchy = 0.0;
    double tricomi = 0.0;
    // Even k: route disagreement (flagged above 1e-6). Odd k: |a_k| over the
    // neighbouring even |a_k|, a_k = g^(k)(0)/k! (flagged above 1e-10).
    double rel_diff = 0.0;
    bool flagged = false;
    // (|g^(k)(0)| / k!)^{1/k}, zero for k = 0 and odd k.
    double root = 0.0;
};

struct CounterexampleReport {
    std::vector<DerivativeRow> rows;
    RadiusEstimate radius;
};

// U(a, b, z) for a - b + 1 a non-positive integer (terminating series).
double tricomi_u_terminating(double a, double b, double z);
// U(a, b, z) from its Laplace integral; independent check.
double tricomi_u_integral(double a, double b, double z);

/*
 * g(x) = int (x^2 + 1/(y^2+1))^{-1} e^{-y^2/2} dy. Derivatives at 0 by
 * (a) per-y Cauchy integrals on circles of radius 0.7/sqrt(1+y^2), then
 * quadrature in y; (b) sqrt(pi) cos(pi k/2) k! U(1/2, (k+5)/2, 1/2).
 */
CounterexampleReport counterexample_g(int k_max = 24);
double counterexample_g_value(double x);

// ---- Truncated quantum mechanics ----

struct TruncatedQM {
    std::vector<double> eigenvalues;
    // position_matrix[a][b] = <e_a, x e_b>
    std::vector<std::vector<double>> position_matrix;
    double alpha = 1.0;
    std::vector<cplx> state;

    int size() const { return static_cast<int>(eigenvalues.size()); }
    double omega(int n) const;
    void validate() const;
};

// lambda_n = n + 1/2, x_{n,n+1} = sqrt((n+1)/2); state c_n proportional to 1/(n+1).
TruncatedQM harmonic_oscillator(int n_levels = 10, double alpha = 1.0);

struct QmFbiRow {
    double h = 0.0;
    double quadrature = 0.0;
    double closed_form = 0.0;
    double rel_diff = 0.0;
};

struct QmFbiProfile {
    std::vector<QmFbiRow> rows;
    DecayFit fit;
    double max_rel_diff = 0.0;
};

/*
 * || T_h (U(t) state)(t0, eta) || by Gauss-Legendre quadrature in t along
 * t0 - i eta + [-W, W] (the signal is entire; the shift removes cancellation),
 * compared with alpha_h sqrt(2 pi h) (sum |c_n|^2 e^{-(h w_n + eta)^2 / h})^{1/2}.
 * Throws if W is too small for the largest rung.
 */
QmFbiProfile qm_fbi_profile(const TruncatedQM& model, double t0, double eta, const HLadder& ladder,
                            double window_half_width = 12.0);

struct CorrelatorTerm {
    cplx coeff;
    std::vector<double> nu;
};

/*
 * <phi, x(t_1) ... x(t_m) psi>, x(t) = U(-t) x U(t), psi the ground state e_0,
 * as sum coeff e^{i nu . t}. Terms with equal frequencies are merged.
 */
std::vector<CorrelatorTerm> qm_correlator_terms(const TruncatedQM& model, const std::vector<cplx>& phi, int m);

// The same for m <= 2 as an h-independent family on [-L, L]^m with closed-form FBI.
SampledFamily qm_correlator(const TruncatedQM& model, const std::vector<cplx>& phi, int m,
                            double half_width = 6.0);
cplx qm_correlator_value(const TruncatedQM& model, const std::vector<cplx>& phi, const std::vector<double>& t);

struct CorrelatorFinding {
    std::size_t base = 0;
    Vec direction;
};

struct CorrelatorReport {
    int m = 0;
    WfaReport wfa;
    std::size_t flagged = 0;
    // Flagged directions outside the nested cone by more than one angular bin.
    std::vector<CorrelatorFinding> cone_violations;
    // Flagged directions failing rightmost_future_causal (rightmost nonzero xi_j >= 0).
    std::vector<CorrelatorFinding> rightmost_violations;
    // Frequency vectors of the correlator, and those outside the nested cone.
    std::size_t frequencies = 0;
    std::vector<std::vector<double>> frequency_violations;
    bool empty_state = false;

    bool clean() const {
        return cone_violations.empty() && rightmost_violations.empty() && frequency_violations.empty();
    }
};

// xi_m >= 0, xi_{m-1} + xi_m >= 0, ..., within tol.
bool in_nested_cone(const std::vector<double>& xi, double tol = 0.0);

/*
 * wfa_detect on the correlator at the given base points (m = 1 or 2; 64
 * directions for m = 2), every flagged direction checked against the cone.
 * m = 3 checks the frequency vectors only.
 */
CorrelatorReport qm_correlator_wfa(const TruncatedQM& model, const std::vector<cplx>& phi, int m,
                                   const std::vector<Vec>& base_points, const HLadder& ladder);

// ---- 1+1 massless propagators ----

enum class PropagatorKind { RET, ADV, PJ };
std::string to_string(PropagatorKind k);

struct CommutatorOptions {
    // (t, x) chart on which the solution is tabulated.
    Box chart = Box::rect(-1.0, 3.0, -2.0, 2.0);
    double step = 0.02;
};

struct CommutatorResult {
    // Bilinear interpolation of the light-cone grid, zero outside the chart.
    SampledFamily family;
    // Nodes u_i = u_lo + i du, v_j = v_lo + j dv, with u = t - x, v = t + x.
    double u_lo = 0.0, v_lo = 0.0, du = 0.0;
    int nu = 0, nv = 0;
    std::vector<double> values;
    // sup |box G - f| at cell centres, mixed difference 4 d_u d_v.
    double residual = 0.0;
    bool clipped = false;

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * nv + j]; }
    double operator()(double t, double x) const;
};

/*
 * G f for box = d_t^2 - d_x^2 in light-cone coordinates:
 * RET = (1/4) int_{u' < u, v' < v} f, ADV the mirror image, PJ = RET - ADV.
 * f is real, compactly supported, evaluated at h = 1.
 */
CommutatorResult commutator_1p1(const SampledFamily& f, PropagatorKind kind, const CommutatorOptions& options = {});

// |G f| > threshold * max |G f| on a (t, x) grid.
Region propagator_support(const CommutatorResult& g, int nt, int nx, double threshold = 1e-9);

// A smooth bump exp(-1/(1-r^2)) of radius r0 centred at (t0, x0), as a 2-d family.
SampledFamily spacetime_bump(double t0, double x0, double r0);

}  // namespace microlocal
