#include "microlocal/microsupport.hpp"

#include "microlocal/io.hpp"
#include "microlocal/parallel.hpp"
#include "microlocal/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>

namespace microlocal {

PhaseWindow PhaseWindow::line(double x_lo, double x_hi, double xi_lo, double xi_hi,
                              double x_step, double xi_step) {
    PhaseWindow w;
    w.x_box = Box::interval(x_lo, x_hi);
    w.xi_box = Box::interval(xi_lo, xi_hi);
    w.x_step = x_step;
    w.xi_step = xi_step;
    return w;
}

std::vector<double> PhaseWindow::xs(int axis) const {
    return grid_axis(x_box.lo[axis], x_box.hi[axis], x_step);
}

std::vector<double> PhaseWindow::xis(int axis) const {
    return grid_axis(xi_box.lo[axis], xi_box.hi[axis], xi_step);
}

std::vector<PhasePoint> PhaseWindow::nodes() const {
    validate();
    std::vector<PhasePoint> out;
    if (dim == 1) {
        for (double x : xs()) {
            for (double k : xis()) out.push_back(PhasePoint{{x, 0.0}, {k, 0.0}});
        }
        return out;
    }
    const auto x0 = xs(0), x1 = xs(1), k0 = xis(0), k1 = xis(1);
    for (double a : x0) {
        for (double b : x1) {
            for (double c : k0) {
                for (double d : k1) out.push_back(PhasePoint{{a, b}, {c, d}});
            }
        }
    }
    return out;
}

double PhaseWindow::cell_diagonal() const {
    return std::sqrt(dim * (x_step * x_step + xi_step * xi_step));
}

void PhaseWindow::validate() const {
    if (dim != 1 && dim != 2) throw std::invalid_argument("PhaseWindow: dim must be 1 or 2");
    if (!(x_step > 0.0) || !(xi_step > 0.0)) {
        throw std::invalid_argument("PhaseWindow: steps must be positive");
    }
    if (x_box.dim != dim || xi_box.dim != dim || x_box.empty() || xi_box.empty()) {
        throw std::invalid_argument("PhaseWindow: boxes must be non-empty and match dim");
    }
}

PhaseSet PhaseSet::point(const PhasePoint& p, int dim) {
    PhaseSet s;
    s.dim = dim;
    s.balls.push_back({p, 0.0});
    return s;
}

PhaseSet PhaseSet::zero_section(const Box& base) {
    PhaseSet s;
    s.dim = base.dim;
    Box zero = base.dim == 1 ? Box::interval(0.0, 0.0) : Box::rect(0.0, 0.0, 0.0, 0.0);
    s.rects.push_back({base, zero});
    return s;
}

namespace {

double coord(const PhasePoint& p, int axis, int dim) {
    return axis < dim ? p.x[axis] : p.xi[axis - dim];
}

}  // namespace

double PhaseSet::distance(const PhasePoint& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : balls) {
        double s = 0.0;
        for (int a = 0; a < 2 * dim; ++a) {
            const double d = coord(p, a, dim) - coord(b.center, a, dim);
            s += d * d;
        }
        best = std::min(best, std::max(0.0, std::sqrt(s) - b.radius));
    }
    for (const auto& r : rects) {
        double s = 0.0;
        for (int a = 0; a < 2 * dim; ++a) {
            const double v = coord(p, a, dim);
            const double lo = a < dim ? r.x.lo[a] : r.xi.lo[a - dim];
            const double hi = a < dim ? r.x.hi[a] : r.xi.hi[a - dim];
            const double d = v < lo ? lo - v : (v > hi ? v - hi : 0.0);
            s += d * d;
        }
        best = std::min(best, std::sqrt(s));
    }
    return best;
}

std::pair<double, double> PhaseSet::extent(int axis) const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& b : balls) {
        const double c = coord(b.center, axis, dim);
        lo = std::min(lo, c - b.radius);
        hi = std::max(hi, c + b.radius);
    }
    for (const auto& r : rects) {
        lo = std::min(lo, axis < dim ? r.x.lo[axis] : r.xi.lo[axis - dim]);
        hi = std::max(hi, axis < dim ? r.x.hi[axis] : r.xi.hi[axis - dim]);
    }
    return {lo, hi};
}

std::size_t MicrosupportMap::count(Verdict v) const {
    return static_cast<std::size_t>(std::count_if(
        fits.begin(), fits.end(), [v](const DecayFit& f) { return f.verdict == v; }));
}

std::vector<PhasePoint> MicrosupportMap::nodes_with(Verdict v) const {
    std::vector<PhasePoint> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (fits[i].verdict == v) out.push_back(nodes[i]);
    }
    return out;
}

std::vector<PhasePoint> MicrosupportMap::flagged_nodes() const {
    std::vector<PhasePoint> out;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (fits[i].flagged()) out.push_back(nodes[i]);
    }
    return out;
}

double fbi_noise_floor(const SampledFamily& f, double h) {
    if (f.fbi_exact) return 0.0;
    double l1 = 0.0;
    if (f.dim == 1) {
        const auto rule = quad::composite_gl(f.support.lo[0], f.support.hi[0],
                                             std::sqrt(h) / 2.0, f.breakpoints);
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            l1 += rule.w[i] * std::abs(f.eval(h, Vec{rule.x[i], 0.0}));
        }
    } else {
        const double step = std::sqrt(h) / 2.0;
        const auto y0 = grid_axis(f.support.lo[0], f.support.hi[0], step);
        const auto y1 = grid_axis(f.support.lo[1], f.support.hi[1], step);
        const double s0 = y0.size() > 1 ? y0[1] - y0[0] : 0.0;
        const double s1 = y1.size() > 1 ? y1[1] - y1[0] : 0.0;
        for (double a : y0) {
            for (double b : y1) l1 += s0 * s1 * std::abs(f.eval(h, Vec{a, b}));
        }
    }
    return 1e3 * kEps * fbi_alpha(h, f.dim) * l1;
}

namespace {

double weight(const PhasePoint& p, int dim, int power) {
    double r2 = 0.0;
    for (int a = 0; a < dim; ++a) r2 += p.x[a] * p.x[a] + p.xi[a] * p.xi[a];
    return std::pow(1.0 + r2, power);
}

double max_weight(const PhasePoint& p, int dim, const std::vector<int>& powers) {
    double w = 0.0;
    for (int n : powers) w = std::max(w, weight(p, dim, n));
    return w;
}

// |T_h u| at the selected nodes; d = 1 nodes sharing x go through one FFT line.
std::vector<double> fbi_magnitudes(const SampledFamily& u, double h,
                                   const std::vector<PhasePoint>& nodes,
                                   const std::vector<char>& active, bool& tail) {
    std::vector<double> out(nodes.size(), 0.0);
    if (u.dim == 1 && !u.fbi_exact) {
        // Group consecutive nodes with equal x (window order is x-major).
        std::vector<std::pair<std::size_t, std::size_t>> groups;
        for (std::size_t i = 0; i < nodes.size();) {
            std::size_t j = i;
            while (j < nodes.size() && nodes[j].x[0] == nodes[i].x[0]) ++j;
            groups.emplace_back(i, j);
            i = j;
        }
        std::vector<char> warn(groups.size(), 0);
        parallel_for(groups.size(), [&](std::size_t g) {
            auto [a, b] = groups[g];
            std::vector<PhasePoint> pts;
            std::vector<std::size_t> idx;
            // Whole lines keep the FFT path even when only some nodes are requested.
            if (std::none_of(active.begin() + a, active.begin() + b, [](char c) { return c != 0; })) return;
            for (std::size_t i = a; i < b; ++i) {
                pts.push_back(nodes[i]);
                idx.push_back(i);
            }
            const auto batch = fbi_forward(u, pts, h);
            for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = std::abs(batch.values[k]);
            warn[g] = batch.tail_warning;
        });
        tail = tail || std::any_of(warn.begin(), warn.end(), [](char c) { return c != 0; });
        return out;
    }
    parallel_for(nodes.size(), [&](std::size_t i) {
        if (active[i]) out[i] = std::abs(fbi_point(u, h, nodes[i]));
    });
    return out;
}

}  // namespace

MicrosupportMap microsupport_scan(const SampledFamily& u, const PhaseWindow& window,
                                  const HLadder& ladder, const ScanOptions& options) {
    if (u.dim != window.dim) throw std::invalid_argument("microsupport_scan: dimension mismatch");
    if (options.weight_powers.empty()) throw std::invalid_argument("no weight powers");
    MicrosupportMap map;
    map.window = window;
    map.ladder = ladder;
    map.options = options;
    map.nodes = window.nodes();
    const std::size_t n = map.nodes.size();
    std::vector<std::vector<DecaySample>> samples(n);
    const std::vector<char> active(n, 1);
    for (std::size_t r = 0; r < ladder.size(); ++r) {
        const double h = ladder[r];
        const double floor = fbi_noise_floor(u, h);
        const auto mags = fbi_magnitudes(u, h, map.nodes, active, map.tail_warning);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = max_weight(map.nodes[i], u.dim, options.weight_powers);
            samples[i].push_back({h, w * mags[i], w * floor});
        }
    }
    map.fits.resize(n);
    parallel_for(n, [&](std::size_t i) { map.fits[i] = fit_decay(samples[i], options.thresholds); });
    const double inconclusive = static_cast<double>(map.count(Verdict::INCONCLUSIVE));
    map.quality_low = inconclusive > options.inconclusive_limit * static_cast<double>(n);
    return map;
}

DecayFit uniform_small_check(const SampledFamily& u, const PhaseSet& K, double eps,
                             const PhaseWindow& window, const HLadder& ladder,
                             const ScanOptions& options) {
    if (!(eps > 0.0)) throw std::invalid_argument("uniform_small_check: eps must be positive");
    if (K.empty() || K.dim != window.dim) throw std::invalid_argument("uniform_small_check: bad K");
    const int d = window.dim;
    for (int a = 0; a < 2 * d; ++a) {
        const auto [lo, hi] = K.extent(a);
        const double wlo = a < d ? window.x_box.lo[a] : window.xi_box.lo[a - d];
        const double whi = a < d ? window.x_box.hi[a] : window.xi_box.hi[a - d];
        const bool low_ok = lo <= wlo || lo - eps >= wlo;
        const bool high_ok = hi >= whi || hi + eps <= whi;
        if (!low_ok || !high_ok) {
            throw std::invalid_argument("uniform_small_check: window does not contain the eps-collar of K");
        }
    }
    const auto nodes = window.nodes();
    std::vector<char> active(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) active[i] = K.distance(nodes[i]) > eps;
    if (std::none_of(active.begin(), active.end(), [](char c) { return c != 0; })) {
        throw std::invalid_argument("uniform_small_check: no window node outside the eps-collar");
    }
    std::vector<DecaySample> samples;
    bool tail = false;
    for (std::size_t r = 0; r < ladder.size(); ++r) {
        const double h = ladder[r];
        const double floor = fbi_noise_floor(u, h);
        const auto mags = fbi_magnitudes(u, h, nodes, active, tail);
        double sup = 0.0, sup_floor = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!active[i]) continue;
            const double w = max_weight(nodes[i], d, options.weight_powers);
            sup = std::max(sup, w * mags[i]);
            sup_floor = std::max(sup_floor, w * floor);
        }
        samples.push_back({h, sup, sup_floor});
    }
    return fit_decay(samples, options.thresholds);
}

double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

double plateau(double x, double a, double b, double ramp) {
    if (x < a) return smooth_step((x - (a - ramp)) / ramp);
    if (x > b) return smooth_step(((b + ramp) - x) / ramp);
    return 1.0;
}

std::string to_string(BumpKind k) {
    switch (k) {
        case BumpKind::POINT_GAUSSIAN: return "POINT_GAUSSIAN";
        case BumpKind::PLATEAU: return "PLATEAU";
        case BumpKind::TIME_STEP: return "TIME_STEP";
    }
    return "PLATEAU";
}

namespace {

// chi~: 1 on [-r/2, r/2], supported in [-r, r].
double cutoff(double y, double r) { return plateau(y, -0.5 * r, 0.5 * r, 0.5 * r); }

double gauss_1d(double y, double h) {
    return std::exp(-y * y / (2.0 * h)) / std::sqrt(2.0 * kPi * h);
}

double mollifier_reach(double h, double r) { return std::min(r, window_radius(h)); }

quad::Rule mollifier_rule(double h, double r, std::vector<double> extra = {}) {
    const double m = mollifier_reach(h, r);
    extra.push_back(-0.5 * r);
    extra.push_back(0.5 * r);
    return quad::composite_gl(-m, m, std::sqrt(h) / 4.0, extra);
}

// One-dimensional chi_h for K = [a, b]: (1/c_h) int chi~(y) g_h(y) b(x - y) dy.
struct Plateau1d {
    double a, b, r, ramp;

    double outer(double z) const { return plateau(z, a - r, b + r, ramp); }

    std::vector<double> outer_breaks() const {
        return {a - r - ramp, a - r, b + r, b + r + ramp};
    }

    double operator()(double h, double c_h, double x) const {
        const double m = mollifier_reach(h, r);
        if (x - m >= a - r && x + m <= b + r) return 1.0;
        if (x - m >= b + r + ramp || x + m <= a - r - ramp) return 0.0;
        std::vector<double> cuts;
        for (double p : outer_breaks()) cuts.push_back(x - p);
        const auto rule = mollifier_rule(h, r, cuts);
        double acc = 0.0;
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            const double y = rule.x[i];
            acc += rule.w[i] * cutoff(y, r) * gauss_1d(y, h) * outer(x - y);
        }
        return acc / c_h;
    }
};

}  // namespace

double bump_normalization(double h, double mollifier_radius, int dim) {
    if (!(h > 0.0) || !(mollifier_radius > 0.0)) {
        throw std::invalid_argument("bump_normalization: bad parameters");
    }
    thread_local std::map<std::pair<double, double>, double> memo;
    const auto key = std::make_pair(h, mollifier_radius);
    if (auto it = memo.find(key); it != memo.end()) return dim == 2 ? it->second * it->second : it->second;
    const auto rule = mollifier_rule(h, mollifier_radius);
    double c = 0.0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
        c += rule.w[i] * cutoff(rule.x[i], mollifier_radius) * gauss_1d(rule.x[i], h);
    }
    if (memo.size() > 4096) memo.clear();
    memo[key] = c;
    return dim == 2 ? c * c : c;
}

BumpFamily bump_family(BumpKind kind, const BumpParams& params, const HLadder& ladder) {
    const auto& p = params;
    if (!(p.mollifier_radius > 0.0) || !(p.ramp > 0.0)) {
        throw std::invalid_argument("bump_family: mollifier radius and ramp must be positive");
    }
    if (p.dim != 1 && p.dim != 2) throw std::invalid_argument("bump_family: dim must be 1 or 2");
    BumpFamily out;
    out.kind = kind;
    out.params = p;
    for (double h : ladder.rungs) out.normalization.push_back(bump_normalization(h, p.mollifier_radius, p.dim));

    SampledFamily& f = out.realization;
    f.dim = p.dim;
    f.xi_extent = 0.0;
    f.label = "bump_" + to_string(kind);
    const double r = p.mollifier_radius;
    // c_h per component; computed on demand so any h is accepted.
    auto c1 = [r](double h) { return bump_normalization(h, r, 1); };

    switch (kind) {
        case BumpKind::PLATEAU: {
            std::array<Plateau1d, 2> axes{Plateau1d{p.k_lo[0], p.k_hi[0], r, p.ramp},
                                          Plateau1d{p.k_lo[1], p.k_hi[1], r, p.ramp}};
            for (int a = 0; a < p.dim; ++a) {
                if (!(p.k_hi[a] >= p.k_lo[a])) throw std::invalid_argument("bump_family: empty K");
            }
            const double reach = 2.0 * r + p.ramp;
            f.support = p.dim == 1 ? Box::interval(p.k_lo[0] - reach, p.k_hi[0] + reach)
                                   : Box::rect(p.k_lo[0] - reach, p.k_hi[0] + reach,
                                               p.k_lo[1] - reach, p.k_hi[1] + reach);
            const int dim = p.dim;
            f.eval = [axes, dim, c1](double h, const Vec& x) {
                const double c = c1(h);
                double v = axes[0](h, c, x[0]);
                if (dim == 2 && v != 0.0) v *= axes[1](h, c, x[1]);
                return cplx(v);
            };
            break;
        }
        case BumpKind::POINT_GAUSSIAN: {
            const Vec c = p.center;
            const int dim = p.dim;
            f.support = dim == 1 ? Box::interval(c[0] - r, c[0] + r)
                                 : Box::rect(c[0] - r, c[0] + r, c[1] - r, c[1] + r);
            f.breakpoints = {c[0] - r, c[0] - 0.5 * r, c[0] + 0.5 * r, c[0] + r};
            f.eval = [c, dim, r, c1](double h, const Vec& x) {
                const double n = c1(h);
                double v = 1.0;
                for (int a = 0; a < dim; ++a) v *= cutoff(x[a] - c[a], r) * gauss_1d(x[a] - c[a], h) / n;
                return cplx(v);
            };
            break;
        }
        case BumpKind::TIME_STEP: {
            if (!(p.delta > 0.0)) throw std::invalid_argument("bump_family: delta must be positive");
            if (p.dim != 1) throw std::invalid_argument("bump_family: TIME_STEP is one-dimensional");
            // rho~ = 1 on [0, 1] with support in [-1, 2].
            const Plateau1d rho{0.0, 1.0, 0.25, 0.5};
            const double delta = p.delta;
            const double t_max = p.k_hi[0] > delta ? p.k_hi[0] : 10.0 * delta;
            f.support = Box::interval(-delta, t_max);
            f.breakpoints = {t_max};
            f.eval = [rho, delta](double h, const Vec& x) {
                const double t = x[0] / delta;
                if (t > 1.0) return cplx(1.0);
                return cplx(rho(h, bump_normalization(h, 0.25, 1), t));
            };
            break;
        }
    }
    return out;
}

SampledFamily compact_fourier_family(double half_width) {
    if (!(half_width > 0.0)) throw std::invalid_argument("compact_fourier_family: bad width");
    // f(x) = (1/pi) [sin(x/2)/x + int_{1/2}^1 s(2(1-k)) cos(kx) dk], f^ being even.
    const auto rule = std::make_shared<quad::Rule>(quad::composite_gl(0.5, 1.0, 0.05));
    SampledFamily f;
    f.dim = 1;
    f.support = Box::interval(-half_width, half_width);
    f.breakpoints = {-half_width, half_width};
    f.h_independent = true;
    f.label = "compact_fourier";
    f.eval = [rule](double, const Vec& y) {
        const double x = y[0];
        double v = std::abs(x) < 1e-8 ? 0.5 - x * x / 48.0 : std::sin(0.5 * x) / x;
        for (std::size_t i = 0; i < rule->x.size(); ++i) {
            v += rule->w[i] * smooth_step(2.0 * (1.0 - rule->x[i])) * std::cos(rule->x[i] * x);
        }
        return cplx(v / kPi);
    };
    return f;
}

AnalyticMap linear_map(double a, double b) {
    AnalyticMap m;
    m.F = [a, b](double x) { return a * x + b; };
    m.dF = [a](double) { return a; };
    m.label = "linear";
    return m;
}

AnalyticMap sine_perturbation(double eps) {
    AnalyticMap m;
    m.F = [eps](double x) { return x + eps * std::sin(x); };
    m.dF = [eps](double x) { return 1.0 + eps * std::cos(x); };
    m.label = "sine_perturbation";
    return m;
}

SampledFamily pullback_family(const SampledFamily& u, const AnalyticMap& F,
                              const SampledFamily& chi) {
    if (u.dim != 1 || chi.dim != 1) throw std::invalid_argument("pullback_family: d = 1 only");
    if (chi.support.lo[0] < F.domain.lo[0] || chi.support.hi[0] > F.domain.hi[0]) {
        throw std::invalid_argument("pullback_family: F is not defined on supp(chi)");
    }
    SampledFamily out;
    out.dim = 1;
    out.support = chi.support;
    const Box ub = u.support;
    out.eval = [u, F, chi, ub](double h, const Vec& x) {
        const double y = F.F(x[0]);
        if (y < ub.lo[0] || y > ub.hi[0]) return cplx{};
        const cplx c = chi.eval(h, x);
        if (c == cplx{}) return cplx{};
        return c * u.eval(h, Vec{y, 0.0});
    };
    double jac = 0.0;
    for (double x : grid_axis(chi.support.lo[0], chi.support.hi[0], 0.01)) {
        jac = std::max(jac, std::abs(F.dF(x)));
    }
    out.xi_extent = u.xi_extent * jac + chi.xi_extent;
    out.sharpness = std::max(chi.sharpness, u.sharpness * jac);
    out.breakpoints = chi.breakpoints;
    for (double p : u.breakpoints) {
        for (double x : preimages(F, p, chi.support.lo[0], chi.support.hi[0])) out.breakpoints.push_back(x);
    }
    for (double e : {ub.lo[0], ub.hi[0]}) {
        for (double x : preimages(F, e, chi.support.lo[0], chi.support.hi[0])) out.breakpoints.push_back(x);
    }
    std::sort(out.breakpoints.begin(), out.breakpoints.end());
    out.label = "pullback(" + u.label + "," + F.label + ")";
    return out;
}

std::vector<double> preimages(const AnalyticMap& F, double y, double a, double b) {
    std::vector<double> roots;
    const int n = 2000;
    auto g = [&](double x) { return F.F(x) - y; };
    double xl = a, gl = g(a);
    if (gl == 0.0) roots.push_back(a);
    for (int i = 1; i <= n; ++i) {
        const double xr = a + (b - a) * i / n;
        const double gr = g(xr);
        if (gr == 0.0) {
            roots.push_back(xr);
        } else if (gl != 0.0 && (gl < 0.0) != (gr < 0.0)) {
            double lo = xl, hi = xr, glo = gl;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gm = g(mid);
                if ((gm < 0.0) == (glo < 0.0)) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        xl = xr;
        gl = gr;
    }
    return roots;
}

std::vector<PhasePoint> pullback_points(const std::vector<PhasePoint>& pts, const AnalyticMap& F,
                                        double a, double b) {
    std::vector<PhasePoint> out;
    for (const auto& p : pts) {
        for (double x : preimages(F, p.x[0], a, b)) {
            out.push_back(PhasePoint{{x, 0.0}, {F.dF(x) * p.xi[0], 0.0}});
        }
    }
    return out;
}

namespace {

double phase_distance(const PhasePoint& a, const PhasePoint& b) {
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
        s += (a.x[i] - b.x[i]) * (a.x[i] - b.x[i]) + (a.xi[i] - b.xi[i]) * (a.xi[i] - b.xi[i]);
    }
    return std::sqrt(s);
}

}  // namespace

ContainmentReport check_containment(const std::vector<PhasePoint>& pts,
                                    const std::vector<PhasePoint>& predicted, double tol) {
    ContainmentReport rep;
    rep.tolerance = tol;
    rep.predicted = predicted;
    for (const auto& p : pts) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : predicted) best = std::min(best, phase_distance(p, q));
        rep.worst_distance = std::max(rep.worst_distance, best);
        if (best > tol * (1.0 + 1e-9)) {
            rep.contained = false;
            rep.escaped.push_back(p);
        }
    }
    return rep;
}

ProductReport product_microsupport(const SampledFamily& u, const SampledFamily& v,
                                   const PhaseWindow& window, const HLadder& ladder,
                                   const ScanOptions& options) {
    ProductReport rep;
    rep.u_map = microsupport_scan(u, window, ladder, options);
    rep.v_map = microsupport_scan(v, window, ladder, options);
    rep.product_map = microsupport_scan(family_product(u, v), window, ladder, options);
    std::vector<PhasePoint> predicted;
    const auto nu = rep.u_map.nodes_with(Verdict::NOT_EXP_SMALL);
    const auto nv = rep.v_map.nodes_with(Verdict::NOT_EXP_SMALL);
    for (const auto& a : nu) {
        for (const auto& b : nv) {
            if (std::abs(a.x[0] - b.x[0]) > 1e-12 || std::abs(a.x[1] - b.x[1]) > 1e-12) continue;
            predicted.push_back(PhasePoint{a.x, {a.xi[0] + b.xi[0], a.xi[1] + b.xi[1]}});
        }
    }
    rep.containment = check_containment(rep.product_map.nodes_with(Verdict::NOT_EXP_SMALL),
                                        predicted, window.cell_diagonal());
    return rep;
}

void write_microsupport_csv(const MicrosupportMap& map, std::ostream& os) {
    const int d = map.window.dim;
    os << (d == 1 ? "x,xi" : "x1,x2,xi1,xi2") << ",delta_hat,r2,verdict\n";
    os.precision(17);
    for (std::size_t i = 0; i < map.nodes.size(); ++i) {
        const auto& p = map.nodes[i];
        for (int a = 0; a < d; ++a) os << p.x[a] << ',';
        for (int a = 0; a < d; ++a) os << p.xi[a] << ',';
        const auto& f = map.fits[i];
        if (std::isinf(f.delta_hat)) {
            os << "inf";
        } else {
            os << f.delta_hat;
        }
        os << ',' << f.r_squared << ',' << to_string(f.verdict) << '\n';
    }
}

void write_microsupport_png(const MicrosupportMap& map, const std::string& path, int cell_px) {
    if (map.window.dim != 1) throw std::invalid_argument("write_microsupport_png: d = 1 only");
    const auto xs = map.window.xs();
    const auto ks = map.window.xis();
    RgbImage img(static_cast<int>(xs.size()) * cell_px, static_cast<int>(ks.size()) * cell_px);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < ks.size(); ++j) {
            const Verdict v = map.fits[i * ks.size() + j].verdict;
            std::uint8_t r = 210, g = 225, b = 245;
            if (v == Verdict::NOT_EXP_SMALL) r = 200, g = 30, b = 30;
            if (v == Verdict::INCONCLUSIVE) r = 240, g = 160, b = 40;
            const int row = static_cast<int>(ks.size() - 1 - j);
            for (int dy = 0; dy < cell_px; ++dy) {
                for (int dx = 0; dx < cell_px; ++dx) {
                    img.set(static_cast<int>(i) * cell_px + dx, row * cell_px + dy, r, g, b);
                }
            }
        }
    }
    write_png(img, path);
}

}  // namespace microlocal
