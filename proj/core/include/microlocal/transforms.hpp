#pragma once

#include "microlocal/phase_core.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace microlocal {

struct PhasePoint {
    Vec x{0.0, 0.0};
    Vec xi{0.0, 0.0};
};

inline constexpr double kWindowCut = 1e-18;

// 2^{-d/2} (pi h)^{-3d/4}
double fbi_alpha(double h, int dim);
// Gaussian truncation radius sqrt(2 h ln(1/cut)).
double window_radius(double h);

/*
 * L2-normalized coherent state
 *   psi(y) = (pi h)^{-d/4} exp(-(x0-y)^2/2h) exp(i (y-x0).xi0/h)
 * at a fixed scale h0. The returned family ignores its h argument for
 * evaluation; its closed-form FBI transform is exact at every h.
 */
SampledFamily coherent_state(const PhasePoint& center, double h0, int dim = 1);

// The h-dependent family h -> psi_{x0,xi0,h}, with support sized for h <= h_max.
SampledFamily coherent_family(const PhasePoint& center, int dim = 1, double h_max = 1.0);

// Closed-form T_h psi_{c,h0}(pt), d = 1 or 2.
cplx coherent_fbi(const PhasePoint& c, double h0, double h, const PhasePoint& pt, int dim);

struct TransformValue {
    cplx value{};
    bool tail_warning = false;
};

/*
 * (2 pi h)^{-d/2} int f(x) e^{-i x.xi/h} dx. Uses the cached grid with
 * Gregory end corrections when present, composite Gauss-Legendre
 * otherwise. For a coherent state at (x0, xi0) the realized phase is
 * e^{-i x0 eta / h}.
 */
TransformValue semiclassical_fourier(const SampledFamily& f, double h, const Vec& xi);

// Same transform on eta = xi0 + k dxi, k < count, via one FFT (d = 1).
std::vector<cplx> semiclassical_fourier_line(const SampledFamily& f, double h, double xi0,
                                             double dxi, int count);

struct FbiBatch {
    std::vector<cplx> values;
    bool tail_warning = false;
};

// Resolution limit for quadrature of T_h f at momenta up to |xi_max|.
double fbi_grid_step(const SampledFamily& f, double h, double xi_max);

// Single point by Gauss-Legendre (d = 1) or trapezoid lattice (d = 2).
cplx fbi_point(const SampledFamily& f, double h, const PhasePoint& pt);

// xi = xi0 + k dxi at fixed x: one windowed FFT (d = 1).
FbiBatch fbi_xi_line(const SampledFamily& f, double h, double x, double xi0, double dxi,
                     int count);

// x = x0 + k dx at fixed xi: sliding-window convolution on a shared lattice (d = 1).
FbiBatch fbi_x_line(const SampledFamily& f, double h, double xi, double x0, double dx,
                    int count);

/*
 * T_h f(x,xi) = alpha_h int exp(-(x-y)^2/2h) exp(i(x-y).xi/h) f(y) dy at
 * each point. Points sharing x with evenly spaced xi go through the FFT
 * path; everything else is evaluated pointwise.
 */
FbiBatch fbi_forward(const SampledFamily& f, const std::vector<PhasePoint>& pts, double h);

// Rectangular phase-space grid in d = 1.
struct FbiWindow {
    double x_lo = -2.0, x_hi = 2.0, xi_lo = -2.0, xi_hi = 2.0;
    double x_step = 0.25, xi_step = 0.25;

    std::vector<double> xs() const;
    std::vector<double> xis() const;
};

struct FbiField {
    std::string source;
    FbiWindow window;
    std::vector<double> rungs;
    // values[r][i * nxi + j] = T_{h_r} f(xs[i], xis[j]).
    std::vector<std::vector<cplx>> values;
    bool tail_warning = false;

    cplx at(std::size_t rung, std::size_t i, std::size_t j) const;
};

FbiField fbi_field(const SampledFamily& f, const FbiWindow& window,
                   const std::vector<double>& rungs);

void write_fbi_csv(const FbiField& field, std::ostream& os);
std::string fbi_field_header_json(const FbiField& field);

/*
 * Discrete Cauchy-Riemann residual of F = e^{xi^2/2h} T_h f in
 * z = x - i xi at one point: |d_xi F + i d_x F| / (|d_x F| + |d_xi F|).
 */
double holomorphy_residual(const SampledFamily& f, double h, double x, double xi);

struct Reconstruction {
    cplx value{};
    bool warning = false;
};

/*
 * u(y) = (2 pi h)^{-d/2} int int T_h u(x,xi) psi_{x,xi,h}(y) dx dxi by the
 * trapezoid rule over the field's window. warning is set when the field
 * is not negligible on the window boundary.
 */
Reconstruction fbi_adjoint_reconstruct(const FbiField& field, std::size_t rung, double y);

struct RadialReconstruction {
    cplx value{};
    double s_max = 0.0;
    bool converged = true;
};

/*
 * u(x) = 2^{-3/2} pi^{-1/4} sum_{xi = +-1} int_0^inf h^{-5/4}
 *        (1 + xi (h/i) d_x) T_h u(x, xi) dh,
 * integrated in s = 1/h with the x-derivative by central differences.
 */
RadialReconstruction fbi_radial_reconstruct(const SampledFamily& u, double x,
                                            double rel_tol = 1e-4);

// T_{mu,h} f = mu^{-d/2} T_{h/mu}(x, xi/mu).
cplx fbi_modified(const SampledFamily& f, const PhasePoint& pt, double h, double mu);

/*
 * Classical FBI transform with a = |xi|:
 *   T_a u(x,xi) = int exp(-a(x-y)^2/2) u(y) exp(-i xi(y-x)) dy.
 * This is the h = 1/|xi| slice T_h u(x, xi/|xi|) divided by alpha_h.
 */
cplx fbi_classical(const SampledFamily& u, double x, double xi);

}  // namespace microlocal
