#pragma once

#include "microlocal/analytic_wf.hpp"
#include "microlocal/phase_core.hpp"

#include "json.hpp"

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace microlocal {

// Closed angular interval [lo, hi] in radians, 0 <= lo < 2 pi, lo <= hi <= lo + 2 pi.
struct Arc {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
};

/*
 * Set of directions in R^d \ 0. d = 1: a subset of {+, -}. d = 2: a finite
 * union of closed arcs, kept sorted and pairwise disjoint.
 */
struct Cone {
    int dim = 1;
    bool plus = false;
    bool minus = false;
    std::vector<Arc> arcs;

    static Cone none(int dim);
    static Cone full(int dim);
    static Cone positive() { return sign(true, false); }
    static Cone negative() { return sign(false, true); }
    static Cone sign(bool plus, bool minus);
    static Cone arc(double lo, double hi);
    static Cone ray(double angle) { return arc(angle, angle); }

    bool empty() const;
    bool contains_angle(double angle, double tol = 1e-12) const;
    // xi != 0; its direction is tested.
    bool contains(const Vec& xi, double tol = 1e-12) const;
    Cone negated() const;
    Cone united(const Cone& other) const;
    Cone intersected(const Cone& other) const;
    bool intersects(const Cone& other) const { return !intersected(other).empty(); }
    bool operator==(const Cone& other) const;
    void normalize();
};

// Wraps an angle into [0, 2 pi).
double wrap_angle(double a);

struct ConicCell {
    Box base;
    Cone cone;
};

// Finite union of base boxes times direction cones.
struct ConicSet {
    int dim = 1;
    std::vector<ConicCell> cells;

    static ConicSet single(const Box& base, const Cone& cone);

    bool empty() const;
    bool contains(const Vec& x, const Vec& xi, double tol = 1e-12) const;
    ConicSet negated() const;
    // Drops empty cells, then merges cells with equal cones whose union is a box
    // and cells sharing a base.
    void canonicalize();
};

ConicSet cs_union(const ConicSet& a, const ConicSet& b);
ConicSet cs_intersection(const ConicSet& a, const ConicSet& b);
bool cs_intersects(const ConicSet& a, const ConicSet& b);

// A rule application that would produce the zero covector. Names the offending cells.
class CalculusError : public std::invalid_argument {
public:
    CalculusError(const std::string& what, std::size_t first, std::size_t second)
        : std::invalid_argument(what), first_cell(first), second_cell(second) {}
    std::size_t first_cell;
    std::size_t second_cell;
};

// Real-analytic F: R^d_in -> R^d_out with closed-form Jacobian J[i][j] = dF_i/dx_j.
struct SmoothMap {
    int d_in = 1;
    int d_out = 1;
    std::function<Vec(const Vec&)> F;
    std::function<std::array<Vec, 2>(const Vec&)> jacobian;
    Box domain = Box::interval(-1.0, 1.0);
    std::string label;
};

SmoothMap smooth_map_1d(const AnalyticMap& f, const Box& domain);
SmoothMap affine_map_2d(const std::array<Vec, 2>& A, const Vec& b, const Box& domain);
// The diagonal x -> (x, x), R -> R^2.
SmoothMap diagonal_embedding(const Box& domain);

enum class CombineRule { SUM, TENSOR, PULLBACK, PRODUCT };
std::string to_string(CombineRule r);

struct CombineArgs {
    std::vector<ConicSet> sets;
    // TENSOR: supports of the two factors (the base of the zero-covector blocks).
    std::vector<Box> supports;
    // PULLBACK.
    SmoothMap map;
};

/*
 * Upper bounds from the calculus rules:
 *   SUM      W1 u W2
 *   TENSOR   (W1 x 0) u (0 x W2) u (W1 x W2), d1 = d2 = 1
 *   PULLBACK F^* W, rejected if W meets the conormal of F
 *   PRODUCT  W1 u W2 u (W1 + W2), rejected if W1 + W2 meets the zero section
 */
ConicSet cs_combine(CombineRule rule, const CombineArgs& args);

ConicSet cs_sum(const ConicSet& a, const ConicSet& b);
ConicSet cs_tensor(const ConicSet& a, const Box& support_a, const ConicSet& b, const Box& support_b);
ConicSet cs_pullback(const ConicSet& w, const SmoothMap& f);
ConicSet cs_product(const ConicSet& a, const ConicSet& b);

// {phi = 0} with closed-form phi and gradient.
struct Hypersurface {
    int dim = 2;
    std::function<double(const Vec&)> phi;
    std::function<Vec(const Vec&)> grad;
    std::string label;
};

/*
 * Cells (box around a piece of S, +-grad phi) over the window, refined until
 * the normal direction varies by less than max_angle_deg per cell.
 */
ConicSet conormal_of_hypersurface(const Hypersurface& s, const Box& window, int cells_per_axis = 16,
                                  double max_angle_deg = 3.0);

// Real principal symbol p(x, xi), positively homogeneous in xi.
using Symbol = std::function<double(const Vec& x, const Vec& xi)>;

/*
 * Directions with |p(x, xi^)| < tol * max |p(x, .)| on each base cell.
 * Throws if p is not homogeneous at two scales.
 */
ConicSet char_set(const Symbol& p, int dim, const Box& window, int cells_per_axis = 16,
                  double tol = 1e-9);

struct UcpResult {
    bool holmgren_ok = false;
    bool edge_ok = false;
};

// holmgren_ok: W misses the conormal of S over the window. edge_ok: W and -W are disjoint.
UcpResult ucp_predicates(const ConicSet& w, const Hypersurface& s, const Box& window);
UcpResult ucp_predicates(const ConicSet& w, const ConicSet& conormal);

// Forward/backward light cone in 1+spatial_dim Minkowski space:
// V+ = {xi_0 >= slope |xi_spatial|}, V- = -V+. Both closed and containing 0.
struct ConeModel {
    int spatial_dim = 1;
    double slope = 1.0;

    bool in_future(const std::vector<double>& xi) const;
    bool in_past(const std::vector<double>& xi) const;
    double dist_to_past(const std::vector<double>& xi) const;
};

using Covector = std::vector<double>;

/*
 * K = {(x_j, xi_j) : sum xi_j in V-} and Q = pr_2 K, with metric collars.
 * Neither depends on x, so dist((x, xi), K) = dist(xi, Q) = dist(sum xi_j, V-) / sqrt(n).
 */
struct SpectrumCone {
    int n = 1;
    ConeModel model;

    double distance(const std::vector<Covector>& xi) const;
    bool in_K(const std::vector<Covector>& xi) const { return in_K_eps(xi, 0.0); }
    bool in_K_eps(const std::vector<Covector>& xi, double eps) const;
    bool in_Q(const std::vector<Covector>& xi) const { return in_K(xi); }
    bool in_Q_eps(const std::vector<Covector>& xi, double eps) const { return in_K_eps(xi, eps); }
};

SpectrumCone spectrum_cone(int n, const ConeModel& model = {});

// True iff the last nonzero xi_j is in V+. All-zero tuples give false.
bool rightmost_future_causal(const std::vector<Covector>& xi, const ConeModel& model = {});

// Flagged (including INCONCLUSIVE) detector directions as cells of half-width cell_half_width.
// d = 2 directions become arcs of half a bin around the scanned angle.
ConicSet conic_set_from_wfa(const WfaReport& report, double cell_half_width);

nlohmann::json to_json(const Cone& c);
Cone cone_from_json(const nlohmann::json& j, int dim);
nlohmann::json to_json(const ConicSet& s);
ConicSet conic_set_from_json(const nlohmann::json& j);

// Occupancy image: first base axis horizontal, direction angle vertical (two rows for d = 1).
void write_conic_png(const ConicSet& s, const Box& window, const std::string& path,
                     int width_px = 360, int angle_bins = 180);

}  // namespace microlocal
