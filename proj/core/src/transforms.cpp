#include "microlocal/transforms.hpp"

#include "microlocal/parallel.hpp"
#include "microlocal/quadrature.hpp"

#include <fftw3.h>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>

namespace microlocal {

namespace {

constexpr cplx kI{0.0, 1.0};

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// In-place forward DFT, G_k = sum_j g_j exp(-2 pi i jk/N).
void fft_forward(std::vector<cplx>& data) {
    const int n = static_cast<int>(data.size());
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
}

std::size_t next_pow2(double x) {
    std::size_t n = 1;
    while (static_cast<double>(n) < x) n <<= 1;
    return n;
}

bool breakpoint_inside(const SampledFamily& f, double a, double b) {
    for (double p : f.breakpoints) {
        if (p > a && p < b) return true;
    }
    return false;
}

// Lattice quadrature is only spectrally accurate when f has no
// breakpoints in the window and is negligible where the support box cuts it.
bool lattice_ok(const SampledFamily& f, double h, double a, double b) {
    if (f.dim != 1 || breakpoint_inside(f, a, b)) return false;
    const double lo = f.support.lo[0], hi = f.support.hi[0];
    double scale = 0.0;
    const double mid = 0.5 * (std::max(a, lo) + std::min(b, hi));
    scale = std::max(scale, std::abs(f.eval(h, Vec{mid, 0.0})));
    auto edge_small = [&](double e) {
        if (e <= a || e >= b) return true;
        return std::abs(f.eval(h, Vec{e, 0.0})) <= 1e-15 * std::max(scale, 1e-300);
    };
    return edge_small(lo) && edge_small(hi);
}

bool tail_check(const SampledFamily& f, double h, double a, double b) {
    if (f.dim != 1) return false;
    const double lo = f.support.lo[0], hi = f.support.hi[0];
    double peak = 0.0;
    for (double t : {0.25, 0.5, 0.75}) {
        const double y = lo + t * (hi - lo);
        peak = std::max(peak, std::abs(f.eval(h, Vec{y, 0.0})));
    }
    auto big = [&](double e) {
        if (e <= a || e >= b) return false;
        return std::abs(f.eval(h, Vec{e, 0.0})) > 1e-10 * std::max(peak, 1e-300);
    };
    // The window reaches past a support edge where f is still non-negligible.
    return (a < lo && big(lo + 1e-12)) || (b > hi && big(hi - 1e-12));
}

double panel_width(const SampledFamily& f, double h, double xi_abs) {
    double w = std::sqrt(h) / f.sharpness;
    const double k = xi_abs + f.xi_extent;
    if (k > 0.0) w = std::min(w, 10.0 * h / k);
    return w;
}

// Point-mass part: sum_j w_j alpha_h e^{-(x-a_j)^2/2h} e^{i(x-a_j) xi/h}.
cplx atoms_fbi(const SampledFamily& f, double h, double x, double xi) {
    cplx acc{};
    for (const auto& [pos, w] : f.atoms) {
        const double s = x - pos;
        acc += w * std::exp(-s * s / (2.0 * h)) * std::polar(1.0, s * xi / h);
    }
    return f.atoms.empty() ? acc : fbi_alpha(h, 1) * acc;
}

cplx fbi_point_1d(const SampledFamily& f, double h, double x, double xi) {
    const double r = window_radius(h);
    const double a = std::max(x - r, f.support.lo[0]);
    const double b = std::min(x + r, f.support.hi[0]);
    if (!(b > a)) return atoms_fbi(f, h, x, xi);
    const auto rule = quad::composite_gl(a, b, panel_width(f, h, std::abs(xi)), f.breakpoints);
    cplx acc{};
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
        const double s = x - rule.x[i];
        const double g = std::exp(-s * s / (2.0 * h));
        acc += rule.w[i] * g * std::polar(1.0, s * xi / h) * f.eval(h, Vec{rule.x[i], 0.0});
    }
    return fbi_alpha(h, 1) * acc + atoms_fbi(f, h, x, xi);
}

cplx fbi_point_2d(const SampledFamily& f, double h, const PhasePoint& pt) {
    const double r = window_radius(h);
    const double xi_max = std::max(std::abs(pt.xi[0]), std::abs(pt.xi[1]));
    const double step = fbi_grid_step(f, h, xi_max);
    const auto n = static_cast<long>(std::ceil(r / step));
    std::vector<double> y0, y1;
    std::vector<cplx> k0, k1;
    for (long j = -n; j <= n; ++j) {
        const double s = j * step;
        const double g = std::exp(-s * s / (2.0 * h));
        const double ya = pt.x[0] - s, yb = pt.x[1] - s;
        if (ya >= f.support.lo[0] && ya <= f.support.hi[0]) {
            y0.push_back(ya);
            k0.push_back(step * g * std::polar(1.0, s * pt.xi[0] / h));
        }
        if (yb >= f.support.lo[1] && yb <= f.support.hi[1]) {
            y1.push_back(yb);
            k1.push_back(step * g * std::polar(1.0, s * pt.xi[1] / h));
        }
    }
    cplx acc{};
    for (std::size_t i = 0; i < y0.size(); ++i) {
        cplx row{};
        for (std::size_t j = 0; j < y1.size(); ++j) row += k1[j] * f.eval(h, Vec{y0[i], y1[j]});
        acc += k0[i] * row;
    }
    return fbi_alpha(h, 2) * acc;
}

}  // namespace

double fbi_alpha(double h, int dim) {
    return std::pow(2.0, -0.5 * dim) * std::pow(kPi * h, -0.75 * dim);
}

double window_radius(double h) { return std::sqrt(2.0 * h * std::log(1.0 / kWindowCut)); }

cplx coherent_fbi(const PhasePoint& c, double h0, double h, const PhasePoint& pt, int dim) {
    cplx out = 1.0;
    for (int i = 0; i < dim; ++i) {
        const double x = pt.x[i], xi = pt.xi[i], x0 = c.x[i], xi0 = c.xi[i];
        const double a = 0.5 / h + 0.5 / h0;
        const cplx b = x / h + x0 / h0 + kI * (xi0 / h0 - xi / h);
        const cplx cc = -x * x / (2.0 * h) - x0 * x0 / (2.0 * h0) + kI * (x * xi / h - x0 * xi0 / h0);
        const cplx e = b * b / (4.0 * a) + cc;
        out *= fbi_alpha(h, 1) * std::pow(kPi * h0, -0.25) * std::sqrt(kPi / a) * std::exp(e);
    }
    return out;
}

namespace {

cplx coherent_value(const PhasePoint& c, double h, const Vec& y, int dim) {
    cplx v = std::pow(kPi * h, -0.25 * dim);
    for (int i = 0; i < dim; ++i) {
        const double s = y[i] - c.x[i];
        v *= std::exp(-s * s / (2.0 * h)) * std::polar(1.0, s * c.xi[i] / h);
    }
    return v;
}

Box centered_box(const PhasePoint& c, double r, int dim) {
    return dim == 1 ? Box::interval(c.x[0] - r, c.x[0] + r)
                    : Box::rect(c.x[0] - r, c.x[0] + r, c.x[1] - r, c.x[1] + r);
}

}  // namespace

SampledFamily coherent_state(const PhasePoint& center, double h0, int dim) {
    if (!(h0 > 0.0)) throw std::invalid_argument("coherent_state: h must be positive");
    if (dim != 1 && dim != 2) throw std::invalid_argument("coherent_state: dim must be 1 or 2");
    SampledFamily f;
    f.dim = dim;
    f.support = centered_box(center, window_radius(h0), dim);
    f.eval = [center, h0, dim](double, const Vec& y) { return coherent_value(center, h0, y, dim); };
    f.fbi_exact = [center, h0, dim](double h, const Vec& x, const Vec& xi) {
        return coherent_fbi(center, h0, h, PhasePoint{x, xi}, dim);
    };
    f.xi_extent = std::hypot(center.xi[0], center.xi[1]) + 0.0;
    f.h_independent = true;
    f.label = "coherent_state";
    return f;
}

SampledFamily coherent_family(const PhasePoint& center, int dim, double h_max) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("coherent_family: dim must be 1 or 2");
    SampledFamily f;
    f.dim = dim;
    f.support = centered_box(center, window_radius(h_max), dim);
    f.eval = [center, dim](double h, const Vec& y) { return coherent_value(center, h, y, dim); };
    f.fbi_exact = [center, dim](double h, const Vec& x, const Vec& xi) {
        return coherent_fbi(center, h, h, PhasePoint{x, xi}, dim);
    };
    f.xi_extent = std::hypot(center.xi[0], center.xi[1]);
    f.label = "coherent_family";
    return f;
}

TransformValue semiclassical_fourier(const SampledFamily& f, double h, const Vec& xi) {
    if (!(h > 0.0)) throw std::invalid_argument("semiclassical_fourier: h must be positive");
    TransformValue out;
    const double norm = std::pow(2.0 * kPi * h, -0.5 * f.dim);
    if (f.dim == 1) {
        const double a = f.support.lo[0], b = f.support.hi[0];
        if (const GridSamples* g = cached_samples(f, h)) {
            const auto w = quad::gregory_weights(g->values.size(), g->step);
            cplx acc{};
            for (std::size_t j = 0; j < g->values.size(); ++j) {
                const double y = g->origin + j * g->step;
                acc += w[j] * g->values[j] * std::polar(1.0, -y * xi[0] / h);
            }
            out.value = norm * acc;
        } else {
            const double width = std::min(panel_width(f, h, std::abs(xi[0])), 0.25 * (b - a));
            const auto rule = quad::composite_gl(a, b, width, f.breakpoints);
            cplx acc{};
            for (std::size_t j = 0; j < rule.x.size(); ++j) {
                acc += rule.w[j] * f.eval(h, Vec{rule.x[j], 0.0}) *
                       std::polar(1.0, -rule.x[j] * xi[0] / h);
            }
            out.value = norm * acc;
        }
        // Tail heuristic: boundary values times the local scale versus the L1 mass.
        const auto rule = quad::composite_gl(a, b, std::min(std::sqrt(h) / f.sharpness, 0.25 * (b - a)),
                                             f.breakpoints);
        double l1 = 0.0;
        for (std::size_t j = 0; j < rule.x.size(); ++j) {
            l1 += rule.w[j] * std::abs(f.eval(h, Vec{rule.x[j], 0.0}));
        }
        for (const auto& [pos, w] : f.atoms) out.value += norm * w * std::polar(1.0, -pos * xi[0] / h);
        const double edge = std::abs(f.eval(h, Vec{a, 0.0})) + std::abs(f.eval(h, Vec{b, 0.0}));
        out.tail_warning = edge * std::sqrt(h) > 1e-10 * l1 && l1 > 0.0;
        return out;
    }
    // d = 2: tensor trapezoid at resolution sqrt(h)/4 and the oscillation scale.
    const double step = std::min(std::sqrt(h) / (4.0 * f.sharpness),
                                 2.0 * kPi * h / (std::abs(xi[0]) + std::abs(xi[1]) +
                                                  f.xi_extent + 9.2 * std::sqrt(h * (1.0 + f.sharpness * f.sharpness))));
    const auto y0 = grid_axis(f.support.lo[0], f.support.hi[0], step);
    const auto y1 = grid_axis(f.support.lo[1], f.support.hi[1], step);
    const auto w0 = quad::gregory_weights(y0.size(), y0.size() > 1 ? y0[1] - y0[0] : 0.0);
    const auto w1 = quad::gregory_weights(y1.size(), y1.size() > 1 ? y1[1] - y1[0] : 0.0);
    cplx acc{};
    for (std::size_t i = 0; i < y0.size(); ++i) {
        for (std::size_t j = 0; j < y1.size(); ++j) {
            acc += w0[i] * w1[j] * f.eval(h, Vec{y0[i], y1[j]}) *
                   std::polar(1.0, -(y0[i] * xi[0] + y1[j] * xi[1]) / h);
        }
    }
    out.value = norm * acc;
    return out;
}

std::vector<cplx> semiclassical_fourier_line(const SampledFamily& f, double h, double xi0,
                                             double dxi, int count) {
    if (f.dim != 1) throw std::invalid_argument("semiclassical_fourier_line: d = 1 only");
    if (count <= 0) return {};
    if (count == 1 || !(dxi > 0.0)) {
        std::vector<cplx> out;
        for (int k = 0; k < count; ++k) {
            out.push_back(semiclassical_fourier(f, h, Vec{xi0 + k * dxi, 0.0}).value);
        }
        return out;
    }
    const double a = f.support.lo[0], b = f.support.hi[0];
    const double xi_max = std::max(std::abs(xi0), std::abs(xi0 + (count - 1) * dxi));
    const double step_max = std::min(
        std::sqrt(h) / (4.0 * f.sharpness),
        2.0 * kPi * h / (xi_max + f.xi_extent + 9.2 * std::sqrt(h * (1.0 + f.sharpness * f.sharpness))));
    const auto m = static_cast<long>(std::ceil((b - a) * 1.02 * dxi / (2.0 * kPi * h)));
    const long mm = std::max(1L, m);
    const double period = 2.0 * kPi * h * mm / dxi;
    const std::size_t n = next_pow2(std::max(period / step_max, double((count - 1) * mm + 1)));
    const double step = period / n;
    std::vector<cplx> g(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double y = a + j * step;
        if (y > b) break;
        g[j] = step * f.eval(h, Vec{y, 0.0}) * std::polar(1.0, -(j * step) * xi0 / h);
    }
    fft_forward(g);
    std::vector<cplx> out(count);
    const double norm = std::pow(2.0 * kPi * h, -0.5);
    for (int k = 0; k < count; ++k) {
        const double eta = xi0 + k * dxi;
        out[k] = norm * std::polar(1.0, -a * eta / h) * g[static_cast<std::size_t>(k * mm)];
        for (const auto& [pos, w] : f.atoms) out[k] += norm * w * std::polar(1.0, -pos * eta / h);
    }
    return out;
}

double fbi_grid_step(const SampledFamily& f, double h, double xi_max) {
    // The Gaussian window adds about 9.2 sqrt(h) of momentum spread, f itself sharpness times that.
    const double spread = 9.2 * std::sqrt(h * (1.0 + f.sharpness * f.sharpness));
    return std::min(std::sqrt(h) / (4.0 * f.sharpness),
                    2.0 * kPi * h / (std::abs(xi_max) + f.xi_extent + spread));
}

cplx fbi_point(const SampledFamily& f, double h, const PhasePoint& pt) {
    if (!(h > 0.0)) throw std::invalid_argument("fbi: h must be positive");
    if (f.fbi_exact) return f.fbi_exact(h, pt.x, pt.xi);
    return f.dim == 1 ? fbi_point_1d(f, h, pt.x[0], pt.xi[0]) : fbi_point_2d(f, h, pt);
}

FbiBatch fbi_xi_line(const SampledFamily& f, double h, double x, double xi0, double dxi,
                     int count) {
    FbiBatch out;
    if (count <= 0) return out;
    out.values.resize(count);
    const double r = window_radius(h);
    if (f.dim == 1) out.tail_warning = tail_check(f, h, x - r, x + r);
    const bool direct = f.fbi_exact || f.dim != 1 || count < 4 || !(dxi > 0.0) ||
                        !lattice_ok(f, h, x - r, x + r);
    if (direct) {
        for (int k = 0; k < count; ++k) {
            out.values[k] = fbi_point(f, h, PhasePoint{{x, 0.0}, {xi0 + k * dxi, 0.0}});
        }
        return out;
    }
    const double xi_max = std::max(std::abs(xi0), std::abs(xi0 + (count - 1) * dxi));
    const double step_max = fbi_grid_step(f, h, xi_max);
    const auto m = static_cast<long>(std::ceil(2.0 * r * 1.02 * dxi / (2.0 * kPi * h)));
    const long mm = std::max(1L, m);
    const double period = 2.0 * kPi * h * mm / dxi;
    const std::size_t n = next_pow2(std::max(period / step_max, double((count - 1) * mm + 1)));
    const double step = period / n;
    std::vector<cplx> g(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double s = 0.5 * period - j * step;  // x - y_j
        const double y = x - s;
        if (std::abs(s) > r || y < f.support.lo[0] || y > f.support.hi[0]) continue;
        g[j] = step * std::exp(-s * s / (2.0 * h)) * f.eval(h, Vec{y, 0.0}) *
               std::polar(1.0, -(j * step) * xi0 / h);
    }
    fft_forward(g);
    const double alpha = fbi_alpha(h, 1);
    for (int k = 0; k < count; ++k) {
        const double xi = xi0 + k * dxi;
        out.values[k] = alpha * std::polar(1.0, 0.5 * period * xi / h) *
                            g[static_cast<std::size_t>(k * mm)] +
                        atoms_fbi(f, h, x, xi);
    }
    return out;
}

FbiBatch fbi_x_line(const SampledFamily& f, double h, double xi, double x0, double dx,
                    int count) {
    FbiBatch out;
    if (count <= 0) return out;
    out.values.resize(count);
    const double r = window_radius(h);
    const double x1 = x0 + (count - 1) * dx;
    if (f.dim == 1) out.tail_warning = tail_check(f, h, x0 - r, x1 + r);
    const bool direct = f.fbi_exact || f.dim != 1 || count < 4 || !(dx > 0.0) ||
                        !lattice_ok(f, h, x0 - r, x1 + r);
    if (direct) {
        for (int k = 0; k < count; ++k) {
            out.values[k] = fbi_point(f, h, PhasePoint{{x0 + k * dx, 0.0}, {xi, 0.0}});
        }
        return out;
    }
    const double step_max = fbi_grid_step(f, h, std::abs(xi));
    const auto kk = static_cast<long>(std::ceil(dx / step_max));
    const double step = dx / kk;
    const auto half = static_cast<long>(std::ceil(r / step));
    const long total = (count - 1) * kk + 2 * half + 1;
    std::vector<cplx> samples(total);
    for (long j = 0; j < total; ++j) {
        const double y = x0 + (j - half) * step;
        if (y < f.support.lo[0] || y > f.support.hi[0]) continue;
        samples[j] = f.eval(h, Vec{y, 0.0});
    }
    std::vector<cplx> kernel(2 * half + 1);
    for (long l = -half; l <= half; ++l) {
        const double s = l * step;
        kernel[l + half] = step * std::exp(-s * s / (2.0 * h)) * std::polar(1.0, s * xi / h);
    }
    const double alpha = fbi_alpha(h, 1);
    for (int m = 0; m < count; ++m) {
        const long c = half + m * kk;
        cplx acc{};
        for (long l = -half; l <= half; ++l) acc += kernel[l + half] * samples[c - l];
        out.values[m] = alpha * acc + atoms_fbi(f, h, x0 + m * dx, xi);
    }
    return out;
}

FbiBatch fbi_forward(const SampledFamily& f, const std::vector<PhasePoint>& pts, double h) {
    FbiBatch out;
    out.values.resize(pts.size());
    if (f.fbi_exact || f.dim != 1) {
        for (std::size_t i = 0; i < pts.size(); ++i) out.values[i] = fbi_point(f, h, pts[i]);
        return out;
    }
    std::map<double, std::vector<std::size_t>> by_x;
    for (std::size_t i = 0; i < pts.size(); ++i) by_x[pts[i].x[0]].push_back(i);
    for (auto& [x, idx] : by_x) {
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return pts[a].xi[0] < pts[b].xi[0]; });
        bool uniform = idx.size() >= 4;
        double dxi = 0.0;
        if (uniform) {
            dxi = pts[idx[1]].xi[0] - pts[idx[0]].xi[0];
            for (std::size_t k = 1; k < idx.size() && uniform; ++k) {
                const double d = pts[idx[k]].xi[0] - pts[idx[k - 1]].xi[0];
                uniform = dxi > 0.0 && std::abs(d - dxi) <= 1e-9 * std::max(1.0, dxi);
            }
        }
        if (uniform) {
            const auto batch = fbi_xi_line(f, h, x, pts[idx[0]].xi[0], dxi,
                                           static_cast<int>(idx.size()));
            for (std::size_t k = 0; k < idx.size(); ++k) out.values[idx[k]] = batch.values[k];
            out.tail_warning = out.tail_warning || batch.tail_warning;
        } else {
            for (std::size_t i : idx) out.values[i] = fbi_point(f, h, pts[i]);
        }
    }
    return out;
}

std::vector<double> FbiWindow::xs() const { return grid_axis(x_lo, x_hi, x_step); }
std::vector<double> FbiWindow::xis() const { return grid_axis(xi_lo, xi_hi, xi_step); }

cplx FbiField::at(std::size_t rung, std::size_t i, std::size_t j) const {
    return values.at(rung).at(i * window.xis().size() + j);
}

FbiField fbi_field(const SampledFamily& f, const FbiWindow& window,
                   const std::vector<double>& rungs) {
    if (f.dim != 1) throw std::invalid_argument("fbi_field: d = 1 only");
    FbiField field;
    field.source = f.label;
    field.window = window;
    field.rungs = rungs;
    const auto xs = window.xs();
    const auto xis = window.xis();
    const double dxi = xis.size() > 1 ? xis[1] - xis[0] : 0.0;
    for (double h : rungs) {
        std::vector<cplx> grid(xs.size() * xis.size());
        std::vector<char> warn(xs.size(), 0);
        parallel_for(xs.size(), [&](std::size_t i) {
            const auto line = fbi_xi_line(f, h, xs[i], xis.front(), dxi,
                                          static_cast<int>(xis.size()));
            std::copy(line.values.begin(), line.values.end(), grid.begin() + i * xis.size());
            warn[i] = line.tail_warning;
        });
        field.tail_warning = field.tail_warning ||
                             std::any_of(warn.begin(), warn.end(), [](char c) { return c != 0; });
        field.values.push_back(std::move(grid));
    }
    return field;
}

void write_fbi_csv(const FbiField& field, std::ostream& os) {
    os << "h,x,xi,re,im\n";
    os.precision(17);
    const auto xs = field.window.xs();
    const auto xis = field.window.xis();
    for (std::size_t r = 0; r < field.rungs.size(); ++r) {
        for (std::size_t i = 0; i < xs.size(); ++i) {
            for (std::size_t j = 0; j < xis.size(); ++j) {
                const cplx v = field.values[r][i * xis.size() + j];
                os << field.rungs[r] << ',' << xs[i] << ',' << xis[j] << ',' << v.real() << ','
                   << v.imag() << '\n';
            }
        }
    }
}

std::string fbi_field_header_json(const FbiField& field) {
    nlohmann::json j;
    j["source"] = field.source;
    j["window"] = {{"x", {field.window.x_lo, field.window.x_hi}},
                   {"xi", {field.window.xi_lo, field.window.xi_hi}},
                   {"x_step", field.window.x_step},
                   {"xi_step", field.window.xi_step}};
    j["rungs"] = field.rungs;
    std::vector<double> alpha;
    for (double h : field.rungs) alpha.push_back(fbi_alpha(h, 1));
    j["alpha_h"] = alpha;
    j["normalization"] = "alpha_h = 2^{-d/2} (pi h)^{-3d/4}, kernel exp(-(x-y)^2/2h + i(x-y)xi/h)";
    j["tail_warning"] = field.tail_warning;
    return j.dump(2);
}

double holomorphy_residual(const SampledFamily& f, double h, double x, double xi) {
    const double s = 0.01 * std::sqrt(h);
    auto F = [&](double xx, double kk) {
        return std::exp(kk * kk / (2.0 * h)) * fbi_point(f, h, PhasePoint{{xx, 0.0}, {kk, 0.0}});
    };
    auto d4 = [&](auto&& g) {
        return (g(-2.0) - 8.0 * g(-1.0) + 8.0 * g(1.0) - g(2.0)) / (12.0 * s);
    };
    const cplx dx = d4([&](double k) { return F(x + k * s, xi); });
    const cplx dxi = d4([&](double k) { return F(x, xi + k * s); });
    const double scale = std::abs(dx) + std::abs(dxi);
    if (scale == 0.0) return 0.0;
    return std::abs(dxi + kI * dx) / scale;
}

Reconstruction fbi_adjoint_reconstruct(const FbiField& field, std::size_t rung, double y) {
    Reconstruction out;
    const double h = field.rungs.at(rung);
    const auto xs = field.window.xs();
    const auto xis = field.window.xis();
    const double dx = xs.size() > 1 ? xs[1] - xs[0] : 1.0;
    const double dk = xis.size() > 1 ? xis[1] - xis[0] : 1.0;
    const auto& grid = field.values.at(rung);
    cplx acc{};
    double peak = 0.0, edge = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double s = y - xs[i];
        const double g = std::pow(kPi * h, -0.25) * std::exp(-s * s / (2.0 * h));
        for (std::size_t j = 0; j < xis.size(); ++j) {
            const cplx t = grid[i * xis.size() + j];
            const double mag = std::abs(t);
            peak = std::max(peak, mag);
            if (i == 0 || j == 0 || i + 1 == xs.size() || j + 1 == xis.size()) {
                edge = std::max(edge, mag);
            }
            if (g == 0.0) continue;
            acc += t * g * std::polar(1.0, s * xis[j] / h);
        }
    }
    out.value = std::pow(2.0 * kPi * h, -0.5) * dx * dk * acc;
    out.warning = peak > 0.0 && edge > 1e-3 * peak;
    return out;
}

RadialReconstruction fbi_radial_reconstruct(const SampledFamily& u, double x, double rel_tol) {
    if (u.dim != 1) throw std::invalid_argument("fbi_radial_reconstruct: d = 1 only");
    const double pref = std::pow(2.0, -1.5) * std::pow(kPi, -0.25);
    auto integrand = [&](double s) {
        if (s <= 0.0) return cplx{};
        const double h = 1.0 / s;
        const double d = 0.05 * std::sqrt(h);
        cplx total{};
        for (double xi : {1.0, -1.0}) {
            auto T = [&](double xx) { return fbi_point(u, h, PhasePoint{{xx, 0.0}, {xi, 0.0}}); };
            const cplx t0 = T(x);
            const cplx dt = (T(x - 2 * d) - 8.0 * T(x - d) + 8.0 * T(x + d) - T(x + 2 * d)) /
                            (12.0 * d);
            total += t0 + xi * (h / kI) * dt;
        }
        return std::pow(s, -0.75) * total;
    };
    RadialReconstruction out;
    const auto& xn = quad::gl20_nodes();
    const auto& wn = quad::gl20_weights();
    cplx sum{};
    int quiet = 0;
    double s = 0.0;
    const double width = 1.0;
    const double s_cap = 4000.0;
    while (s < s_cap) {
        cplx chunk{};
        for (std::size_t i = 0; i < xn.size(); ++i) {
            chunk += 0.5 * width * wn[i] * integrand(s + 0.5 * width * (1.0 + xn[i]));
        }
        sum += chunk;
        s += width;
        const bool small = std::abs(chunk) <= 1e-3 * rel_tol * std::max(std::abs(sum), 1e-300);
        quiet = small ? quiet + 1 : 0;
        if (s >= 8.0 && quiet >= 3) break;
        if (std::abs(sum) == 0.0 && std::abs(chunk) == 0.0 && s >= 8.0) break;
    }
    out.value = pref * sum;
    out.s_max = s;
    out.converged = s < s_cap;
    return out;
}

cplx fbi_modified(const SampledFamily& f, const PhasePoint& pt, double h, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("fbi_modified: mu must be positive");
    PhasePoint q = pt;
    q.xi = {pt.xi[0] / mu, pt.xi[1] / mu};
    return std::pow(mu, -0.5 * f.dim) * fbi_point(f, h / mu, q);
}

cplx fbi_classical(const SampledFamily& u, double x, double xi) {
    if (xi == 0.0) throw std::invalid_argument("fbi_classical: xi must be non-zero");
    const double h = 1.0 / std::abs(xi);
    const double dir = xi > 0.0 ? 1.0 : -1.0;
    return fbi_point(u, h, PhasePoint{{x, 0.0}, {dir, 0.0}}) / fbi_alpha(h, 1);
}

}  // namespace microlocal
