#pragma once

#include "microlocal/wf_calculus.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace microlocal {

enum class SpacetimePreset { MINKOWSKI, CONFORMAL, KRUSKAL_SLICE, CUSTOM };
std::string to_string(SpacetimePreset p);

// Components (g^00, g^01, g^11) of the inverse metric at (t, x).
using InverseMetric = std::function<std::array<double, 3>(double t, double x)>;

/*
 * A 1+1 Lorentzian chart with coordinates (t, x), signature (+, -), dt
 * future directed. Boxes use axis 0 for t and axis 1 for x.
 */
struct SpacetimeModel {
    SpacetimePreset preset = SpacetimePreset::MINKOWSKI;
    Box chart_box = Box::rect(-1.0, 3.0, -2.0, 2.0);
    InverseMetric inv_metric;
    // Kruskal mass; unused otherwise.
    double mass = 0.0;
    std::string label;

    std::array<double, 3> inverse_metric(double t, double x) const;
    bool in_chart(double t, double x) const;
};

SpacetimeModel minkowski(const Box& chart_box = Box::rect(-1.0, 3.0, -2.0, 2.0));
// g = omega^2 (dt^2 - dx^2) with omega > 0.
SpacetimeModel conformal(std::function<double(double, double)> omega,
                         const Box& chart_box = Box::rect(-1.0, 3.0, -2.0, 2.0));
/*
 * (T, X) slice of Schwarzschild-Kruskal: g = (32 M^3 / r) e^{-r/2M} (dT^2 - dX^2),
 * r(T, X) > 0 from (1 - r/2M) e^{r/2M} = T^2 - X^2. The chart must lie in T^2 - X^2 < 1.
 */
SpacetimeModel kruskal_slice(double mass, const Box& chart_box = Box::rect(-0.5, 0.5, 0.2, 1.2));
// Throws on g^00 <= 0 or non-finite entries at the grid nodes.
SpacetimeModel custom_spacetime(InverseMetric inv_metric, const Box& chart_box, std::string label = "custom");

// Areal radius on the Kruskal slice; Lambert-W start, Newton polish.
double kruskal_r(double T, double X, double mass);

enum class CausalClass { TIMELIKE_FUTURE, TIMELIKE_PAST, NULL_FUTURE, NULL_PAST, SPACELIKE, ZERO };
std::string to_string(CausalClass c);

// Covector xi = (xi_t, xi_x) at point = (t, x). NULL within 1e-10 relative.
CausalClass cone_classify(const SpacetimeModel& model, const Vec& point, const Vec& xi);
// Tangent vector v = (v^t, v^x), classified with the metric g.
CausalClass vector_classify(const SpacetimeModel& model, const Vec& point, const Vec& v);

// Null slopes dx/dt of the light cone at (t, x), first <= second.
std::array<double, 2> null_slopes(const SpacetimeModel& model, double t, double x);

/*
 * Cell-centred mask over a box: cell (i, j) has centre
 * (t_lo + (i + 1/2) dt, x_lo + (j + 1/2) dx). Cells sample an open set.
 */
struct Region {
    Box box = Box::rect(0.0, 1.0, 0.0, 1.0);
    int nt = 0;
    int nx = 0;
    std::vector<std::uint8_t> cells;
    bool boundary_clipped = false;
    std::vector<std::string> warnings;

    static Region blank(const Box& box, int nt, int nx);
    double dt() const { return box.width(0) / nt; }
    double dx() const { return box.width(1) / nx; }
    double t_center(int i) const { return box.lo[0] + (i + 0.5) * dt(); }
    double x_center(int j) const { return box.lo[1] + (j + 0.5) * dx(); }
    bool at(int i, int j) const { return cells[static_cast<std::size_t>(i) * nx + j] != 0; }
    void set(int i, int j, bool v) { cells[static_cast<std::size_t>(i) * nx + j] = v ? 1 : 0; }
    // Cell containing the point, or {-1, -1}.
    std::array<int, 2> cell_of(double t, double x) const;
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    // In-set cell with an out-of-set 4-neighbour or on the grid edge.
    bool is_boundary(int i, int j) const;
    bool same_mask(const Region& other) const;
    bool subset_of(const Region& other) const;
    // Cells with all 8 neighbours inside; grid-edge cells are never interior.
    Region interior() const;
    Region united(const Region& other) const;
    Region intersected(const Region& other) const;
};

Region region_from_predicate(const Box& box, int nt, int nx, const std::function<bool(double, double)>& inside);

// Hausdorff distance between two masks on the same grid, in cells (Chebyshev metric).
// Returns 0 when both are empty and a large value when exactly one is.
double hausdorff_cells(const Region& a, const Region& b);

enum class TimeDirection { FUTURE, PAST };

/*
 * OUTER widens the propagated front by half a cell of local null-slope variation,
 * INNER narrows it by the same amount; the true set lies in between.
 */
enum class ConeMargin { OUTER, INNER };

struct ChronoOptions {
    ConeMargin margin = ConeMargin::OUTER;
    int substeps = 4;
};

/*
 * I^+(seed) or I^- (seed) on the grid. The set is propagated row by row as
 * unions of x-intervals whose ends follow the null curves; a cell belongs to
 * it when its centre lies strictly inside an interval.
 */
Region chronological_set(const SpacetimeModel& model, const Vec& seed, TimeDirection dir, int nt, int nx,
                         const ChronoOptions& options = {});
Region chronological_set(const SpacetimeModel& model, const Region& seed, TimeDirection dir,
                         const ChronoOptions& options = {});
// The same, for a finite set of seed points.
Region chronological_set(const SpacetimeModel& model, const std::vector<Vec>& seeds, TimeDirection dir,
                         int nt, int nx, const ChronoOptions& options = {});

// True when q lies strictly inside I^+(p) by more than a 1e-9 margin.
bool chronologically_precedes(const SpacetimeModel& model, const Vec& p, const Vec& q,
                              const ChronoOptions& options = {});

struct IZeroResult {
    Region region;
    // Empty unless q is not in I^+(p).
    std::string diagnostic;
};

// I^+(p) intersected with I^-(q) without the cells of p and q.
IZeroResult i_zero(const SpacetimeModel& model, const Vec& p, const Vec& q, int nt, int nx,
                   const ChronoOptions& options = {});

struct EnvelopeOptions {
    ChronoOptions chrono;
    int max_iterations = 64;
};

struct EnvelopeResult {
    Region region;
    int iterations = 0;
    bool converged = false;
};

/*
 * Smallest mask A containing O with A closed under adding I^+(p) cap I^-(q)
 * for cell centres p, q joined by a timelike curve inside the interior of A.
 * Endpoints on the boundary of A do not count.
 */
EnvelopeResult timelike_envelope(const SpacetimeModel& model, const Region& o, const EnvelopeOptions& options = {});

// gamma_s(tau) = (t, x) for s, tau in [0, 1], with its tau-derivative.
struct CurveFamily {
    std::function<Vec(double s, double tau)> point;
    std::function<Vec(double s, double tau)> tangent;
    std::string label;
};

CurveFamily straight_segment(const Vec& p, const Vec& q);
// x = amplitude * s * sin(pi tau), t = duration * tau.
CurveFamily bent_segment_family(double duration, double amplitude);

struct TubeSide {
    Hypersurface surface;
    // t-range of this side times the chart x-range.
    Box window;
};

struct TubeBoundary {
    double s = 0.0;
    std::array<TubeSide, 2> sides;
};

struct TubeSweepOptions {
    std::vector<double> s_samples{0.0, 0.25, 0.5, 0.75, 1.0};
    int tau_samples = 200;
};

// Thrown when a boundary normal fails to be spacelike.
class TubeError : public std::invalid_argument {
public:
    TubeError(const std::string& what, double s, double t) : std::invalid_argument(what), s(s), t(t) {}
    double s;
    double t;
};

/*
 * Boundaries gamma_s +- delta n of the tube around each gamma_s, n the
 * g-unit spacelike normal. Each side is the graph x = B(t), written as
 * phi = x - B(t). Every sampled boundary conormal must be SPACELIKE.
 */
std::vector<TubeBoundary> tube_sweep(const SpacetimeModel& model, const CurveFamily& gamma, double delta,
                                     const TubeSweepOptions& options = {});

// Future causal covectors V+ per cell, the arc between the two null directions around dt.
ConicSet causal_conic_set(const SpacetimeModel& model, const Box& window, int cells_per_axis = 16);

nlohmann::json to_json(const Region& r);
Region region_from_json(const nlohmann::json& j);
void write_region_png(const Region& r, const std::string& path, int cell_px = 2);

}  // namespace microlocal
