#pragma once

#include "microlocal/phase_core.hpp"
#include "microlocal/transforms.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace microlocal {

// Phase-space scan grid. For dim = 2 both x and xi range over rectangles.
struct PhaseWindow {
    int dim = 1;
    Box x_box = Box::interval(-2.0, 2.0);
    Box xi_box = Box::interval(-2.0, 2.0);
    double x_step = 0.25;
    double xi_step = 0.25;

    static PhaseWindow line(double x_lo, double x_hi, double xi_lo, double xi_hi,
                            double x_step = 0.25, double xi_step = 0.25);

    std::vector<double> xs(int axis = 0) const;
    std::vector<double> xis(int axis = 0) const;
    // Row-major over (x..., xi...), xi fastest.
    std::vector<PhasePoint> nodes() const;
    double cell_diagonal() const;
    void validate() const;
};

// Finite union of balls and boxes in R^d x R^d.
struct PhaseSet {
    struct Ball {
        PhasePoint center;
        double radius = 0.0;
    };
    struct Rect {
        Box x;
        Box xi;
    };

    int dim = 1;
    std::vector<Ball> balls;
    std::vector<Rect> rects;

    static PhaseSet point(const PhasePoint& p, int dim = 1);
    // {(x, 0) : x in base}.
    static PhaseSet zero_section(const Box& base);

    bool empty() const { return balls.empty() && rects.empty(); }
    double distance(const PhasePoint& p) const;
    // Bounding box of the set on one phase-space axis (x axes first, then xi axes).
    std::pair<double, double> extent(int axis) const;
};

struct ScanOptions {
    DecayThresholds thresholds;
    std::vector<int> weight_powers{0, 2, 4};
    // Fraction of INCONCLUSIVE nodes above which a scan is marked low quality.
    double inconclusive_limit = 0.2;
};

struct MicrosupportMap {
    PhaseWindow window;
    HLadder ladder;
    std::vector<PhasePoint> nodes;
    std::vector<DecayFit> fits;
    ScanOptions options;
    bool quality_low = false;
    bool tail_warning = false;

    Verdict verdict(std::size_t i) const { return fits[i].verdict; }
    std::size_t count(Verdict v) const;
    std::vector<PhasePoint> nodes_with(Verdict v) const;
    // Nodes whose verdict is not EXP_SMALL.
    std::vector<PhasePoint> flagged_nodes() const;
};

// Noise level of a quadrature FBI value: about 1e3 eps alpha_h ||f_h||_1. Zero for exact transforms.
double fbi_noise_floor(const SampledFamily& f, double h);

/*
 * Weighted FBI magnitudes max_N (1+|x|^2+|xi|^2)^N |T_h u_h| at every
 * window node and rung, followed by one decay fit per node.
 */
MicrosupportMap microsupport_scan(const SampledFamily& u, const PhaseWindow& window,
                                  const HLadder& ladder, const ScanOptions& options = {});

/*
 * Per rung, the sup of the weighted FBI magnitude over window nodes at
 * distance > eps from K, then one decay fit of that sequence. Throws if
 * the window does not contain the eps-collar of K on axes where K does
 * not already span the window.
 */
DecayFit uniform_small_check(const SampledFamily& u, const PhaseSet& K, double eps,
                             const PhaseWindow& window, const HLadder& ladder,
                             const ScanOptions& options = {});

// Smooth step: 0 for t <= 0, 1 for t >= 1, C-infinity but not analytic at 0 and 1.
double smooth_step(double t);

// Smooth plateau: 1 on [a, b], 0 outside [a - ramp, b + ramp].
double plateau(double x, double a, double b, double ramp);

enum class BumpKind { POINT_GAUSSIAN, PLATEAU, TIME_STEP };

std::string to_string(BumpKind k);

struct BumpParams {
    // PLATEAU: chi_h = 1 on k_lo..k_hi (per axis for dim = 2).
    int dim = 1;
    Vec k_lo{-1.0, -1.0};
    Vec k_hi{1.0, 1.0};
    // Support radius of the cut-off Gaussian mollifier; its cutoff is 1 on half of it.
    double mollifier_radius = 1.0;
    // Transition width of the outer bump b.
    double ramp = 0.5;
    // POINT_GAUSSIAN centre.
    Vec center{0.0, 0.0};
    // TIME_STEP: rho_h = 0 for t <= -delta and 1 for t >= delta.
    double delta = 1.0;
};

struct BumpFamily {
    BumpKind kind = BumpKind::PLATEAU;
    BumpParams params;
    SampledFamily realization;
    // c_h per rung of the ladder the family was built for.
    std::vector<double> normalization;
};

/*
 * chi_h = c_h^{-1} (chi~ g_h) * b with g_h = (2 pi h)^{-d/2} e^{-x^2/2h},
 * chi~ a cutoff supported in the mollifier ball, b = 1 on K enlarged by
 * the mollifier radius. POINT_GAUSSIAN is c_h^{-1} chi~ g_h itself.
 * TIME_STEP glues the plateau on [0,1] (support [-1,2]) to 1 for t > 1
 * and rescales t -> t/delta.
 */
BumpFamily bump_family(BumpKind kind, const BumpParams& params, const HLadder& ladder);

// c_h = int chi~ g_h, by the same rule used for the convolution.
double bump_normalization(double h, double mollifier_radius, int dim = 1);

/*
 * h-independent f with compactly supported Fourier transform:
 * f^(k) = plateau equal to 1 on [-1/2, 1/2] and supported in [-1, 1],
 * f(x) = (1/2 pi) int f^(k) e^{ikx} dk, realized on [-half_width, half_width].
 */
SampledFamily compact_fourier_family(double half_width = 12.0);

// Real-analytic map R -> R with closed-form derivative.
struct AnalyticMap {
    std::function<double(double)> F;
    std::function<double(double)> dF;
    Box domain = Box::interval(-1e300, 1e300);
    std::string label;
};

AnalyticMap linear_map(double a, double b = 0.0);
AnalyticMap sine_perturbation(double eps);

// chi * (u o F), d = 1.
SampledFamily pullback_family(const SampledFamily& u, const AnalyticMap& F,
                              const SampledFamily& chi);

// Solutions of F(x) = y in [a, b] (sign changes on a fine grid, then bisection).
std::vector<double> preimages(const AnalyticMap& F, double y, double a, double b);

// Image of phase points under (F(x), eta) -> (x, F'(x) eta), restricted to x in [a, b].
std::vector<PhasePoint> pullback_points(const std::vector<PhasePoint>& pts, const AnalyticMap& F,
                                        double a, double b);

struct ContainmentReport {
    bool contained = true;
    double tolerance = 0.0;
    double worst_distance = 0.0;
    std::vector<PhasePoint> predicted;
    std::vector<PhasePoint> escaped;
};

// Checks that every point lies within tol of some predicted point.
ContainmentReport check_containment(const std::vector<PhasePoint>& pts,
                                    const std::vector<PhasePoint>& predicted, double tol);

struct ProductReport {
    MicrosupportMap u_map, v_map, product_map;
    ContainmentReport containment;
};

/*
 * Scans u, v and u v. Every NOT_EXP_SMALL node of the product must lie
 * within one grid cell of {(x, xi1 + xi2)} over NOT_EXP_SMALL nodes
 * (x, xi1) of u and (x, xi2) of v.
 */
ProductReport product_microsupport(const SampledFamily& u, const SampledFamily& v,
                                   const PhaseWindow& window, const HLadder& ladder,
                                   const ScanOptions& options = {});

void write_microsupport_csv(const MicrosupportMap& map, std::ostream& os);
// Verdict-coloured image for d = 1 windows: x horizontal, xi vertical.
void write_microsupport_png(const MicrosupportMap& map, const std::string& path, int cell_px = 8);

}  // namespace microlocal
