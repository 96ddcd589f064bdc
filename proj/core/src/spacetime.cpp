#include "microlocal/spacetime.hpp"

#include "microlocal/io.hpp"
#include "microlocal/parallel.hpp"

#include <boost/math/special_functions/lambert_w.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace microlocal {

std::string to_string(SpacetimePreset p) {
    switch (p) {
        case SpacetimePreset::MINKOWSKI: return "MINKOWSKI";
        case SpacetimePreset::CONFORMAL: return "CONFORMAL";
        case SpacetimePreset::KRUSKAL_SLICE: return "KRUSKAL_SLICE";
        case SpacetimePreset::CUSTOM: return "CUSTOM";
    }
    return "CUSTOM";
}

std::string to_string(CausalClass c) {
    switch (c) {
        case CausalClass::TIMELIKE_FUTURE: return "TIMELIKE_FUTURE";
        case CausalClass::TIMELIKE_PAST: return "TIMELIKE_PAST";
        case CausalClass::NULL_FUTURE: return "NULL_FUTURE";
        case CausalClass::NULL_PAST: return "NULL_PAST";
        case CausalClass::SPACELIKE: return "SPACELIKE";
        case CausalClass::ZERO: return "ZERO";
    }
    return "ZERO";
}

std::array<double, 3> SpacetimeModel::inverse_metric(double t, double x) const { return inv_metric(t, x); }

bool SpacetimeModel::in_chart(double t, double x) const { return chart_box.contains(Vec{t, x}); }

namespace {

void validate_metric(const SpacetimeModel& m) {
    if (m.chart_box.dim != 2 || m.chart_box.empty() || m.chart_box.width(0) <= 0.0 || m.chart_box.width(1) <= 0.0) {
        throw std::invalid_argument("spacetime: chart box must be a nonempty 2-d box");
    }
    constexpr int n = 32;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            const double t = m.chart_box.lo[0] + m.chart_box.width(0) * i / n;
            const double x = m.chart_box.lo[1] + m.chart_box.width(1) * j / n;
            const auto g = m.inv_metric(t, x);
            if (!std::isfinite(g[0]) || !std::isfinite(g[1]) || !std::isfinite(g[2])) {
                throw std::invalid_argument("spacetime: inverse metric not finite at (" + std::to_string(t) + ", " +
                                            std::to_string(x) + ")");
            }
            if (!(g[0] > 0.0)) throw std::invalid_argument("spacetime: g^00 must be positive (dt timelike)");
            if (!(g[0] * g[2] - g[1] * g[1] < 0.0)) throw std::invalid_argument("spacetime: metric not Lorentzian");
        }
    }
}

}  // namespace

SpacetimeModel minkowski(const Box& chart_box) {
    SpacetimeModel m;
    m.preset = SpacetimePreset::MINKOWSKI;
    m.chart_box = chart_box;
    m.inv_metric = [](double, double) { return std::array<double, 3>{1.0, 0.0, -1.0}; };
    m.label = "minkowski";
    validate_metric(m);
    return m;
}

SpacetimeModel conformal(std::function<double(double, double)> omega, const Box& chart_box) {
    if (!omega) throw std::invalid_argument("conformal: omega required");
    SpacetimeModel m;
    m.preset = SpacetimePreset::CONFORMAL;
    m.chart_box = chart_box;
    m.inv_metric = [omega = std::move(omega)](double t, double x) {
        const double w = omega(t, x);
        if (!(w > 0.0)) throw std::invalid_argument("conformal: omega must be positive");
        const double a = 1.0 / (w * w);
        return std::array<double, 3>{a, 0.0, -a};
    };
    m.label = "conformal";
    validate_metric(m);
    return m;
}

double kruskal_r(double T, double X, double mass) {
    if (!(mass > 0.0)) throw std::invalid_argument("kruskal_r: mass must be positive");
    const double v = T * T - X * X;
    if (!(v < 1.0)) throw std::invalid_argument("kruskal_r: T^2 - X^2 must be below 1");
    // y = r / 2M solves (1 - y) e^y = v; y - 1 = W0(-v / e).
    double y = 1.0 + boost::math::lambert_w0(-v / std::exp(1.0));
    for (int it = 0; it < 8; ++it) {
        const double ey = std::exp(y);
        const double f = (1.0 - y) * ey - v;
        const double df = -y * ey;
        if (df == 0.0) break;
        const double step = f / df;
        y -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(y))) break;
    }
    return 2.0 * mass * y;
}

SpacetimeModel kruskal_slice(double mass, const Box& chart_box) {
    if (!(mass > 0.0)) throw std::invalid_argument("kruskal_slice: mass must be positive");
    const double max_t2 = std::max(chart_box.lo[0] * chart_box.lo[0], chart_box.hi[0] * chart_box.hi[0]);
    const double min_x2 = (chart_box.lo[1] <= 0.0 && chart_box.hi[1] >= 0.0)
                              ? 0.0
                              : std::min(chart_box.lo[1] * chart_box.lo[1], chart_box.hi[1] * chart_box.hi[1]);
    if (!(max_t2 - min_x2 < 1.0)) throw std::invalid_argument("kruskal_slice: chart leaves T^2 - X^2 < 1");
    SpacetimeModel m;
    m.preset = SpacetimePreset::KRUSKAL_SLICE;
    m.chart_box = chart_box;
    m.mass = mass;
    m.inv_metric = [mass](double T, double X) {
        const double r = kruskal_r(T, X, mass);
        const double a = r * std::exp(r / (2.0 * mass)) / (32.0 * mass * mass * mass);
        return std::array<double, 3>{a, 0.0, -a};
    };
    m.label = "kruskal";
    validate_metric(m);
    constexpr int n = 32;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; j <= n; ++j) {
            const double T = chart_box.lo[0] + chart_box.width(0) * i / n;
            const double X = chart_box.lo[1] + chart_box.width(1) * j / n;
            const double y = kruskal_r(T, X, mass) / (2.0 * mass);
            const double res = (1.0 - y) * std::exp(y) - (T * T - X * X);
            if (!(y > 0.0) || std::abs(res) >= 1e-10) {
                throw std::runtime_error("kruskal_slice: r solve residual too large");
            }
        }
    }
    return m;
}

SpacetimeModel custom_spacetime(InverseMetric inv_metric, const Box& chart_box, std::string label) {
    if (!inv_metric) throw std::invalid_argument("custom_spacetime: inverse metric required");
    SpacetimeModel m;
    m.preset = SpacetimePreset::CUSTOM;
    m.chart_box = chart_box;
    m.inv_metric = std::move(inv_metric);
    m.label = std::move(label);
    validate_metric(m);
    return m;
}

CausalClass cone_classify(const SpacetimeModel& model, const Vec& point, const Vec& xi) {
    if (!model.in_chart(point[0], point[1])) throw std::invalid_argument("cone_classify: point outside chart");
    if (xi[0] == 0.0 && xi[1] == 0.0) return CausalClass::ZERO;
    const auto g = model.inverse_metric(point[0], point[1]);
    const double q = g[0] * xi[0] * xi[0] + 2.0 * g[1] * xi[0] * xi[1] + g[2] * xi[1] * xi[1];
    const double scale = (std::abs(g[0]) + 2.0 * std::abs(g[1]) + std::abs(g[2])) * (xi[0] * xi[0] + xi[1] * xi[1]);
    const bool future = g[0] * xi[0] + g[1] * xi[1] > 0.0;
    if (std::abs(q) <= 1e-10 * scale) return future ? CausalClass::NULL_FUTURE : CausalClass::NULL_PAST;
    if (q > 0.0) return future ? CausalClass::TIMELIKE_FUTURE : CausalClass::TIMELIKE_PAST;
    return CausalClass::SPACELIKE;
}

CausalClass vector_classify(const SpacetimeModel& model, const Vec& point, const Vec& v) {
    if (!model.in_chart(point[0], point[1])) throw std::invalid_argument("vector_classify: point outside chart");
    if (v[0] == 0.0 && v[1] == 0.0) return CausalClass::ZERO;
    const auto g = model.inverse_metric(point[0], point[1]);
    const double det = g[0] * g[2] - g[1] * g[1];
    const double q = (g[2] * v[0] * v[0] - 2.0 * g[1] * v[0] * v[1] + g[0] * v[1] * v[1]) / det;
    const double scale =
        (std::abs(g[0]) + 2.0 * std::abs(g[1]) + std::abs(g[2])) * (v[0] * v[0] + v[1] * v[1]) / std::abs(det);
    const bool future = v[0] > 0.0;
    if (std::abs(q) <= 1e-10 * scale) return future ? CausalClass::NULL_FUTURE : CausalClass::NULL_PAST;
    if (q > 0.0) return future ? CausalClass::TIMELIKE_FUTURE : CausalClass::TIMELIKE_PAST;
    return CausalClass::SPACELIKE;
}

std::array<double, 2> null_slopes(const SpacetimeModel& model, double t, double x) {
    const auto g = model.inverse_metric(t, x);
    // Normalised by g^00 so that conformally related metrics give bitwise equal slopes.
    const double h01 = g[1] / g[0], h11 = g[2] / g[0];
    const double disc = std::sqrt(h01 * h01 - h11);
    return {h01 - disc, h01 + disc};
}

// ---- Region ----

Region Region::blank(const Box& box, int nt, int nx) {
    if (nt < 1 || nx < 1) throw std::invalid_argument("Region: grid must have at least one cell");
    if (box.dim != 2) throw std::invalid_argument("Region: box must be 2-d");
    Region r;
    r.box = box;
    r.nt = nt;
    r.nx = nx;
    r.cells.assign(static_cast<std::size_t>(nt) * nx, 0);
    return r;
}

std::array<int, 2> Region::cell_of(double t, double x) const {
    if (!box.contains(Vec{t, x})) return {-1, -1};
    const int i = std::min(nt - 1, static_cast<int>((t - box.lo[0]) / dt()));
    const int j = std::min(nx - 1, static_cast<int>((x - box.lo[1]) / dx()));
    return {i, j};
}

std::size_t Region::count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }

bool Region::is_boundary(int i, int j) const {
    if (!at(i, j)) return false;
    if (i == 0 || j == 0 || i == nt - 1 || j == nx - 1) return true;
    return !at(i - 1, j) || !at(i + 1, j) || !at(i, j - 1) || !at(i, j + 1);
}

bool Region::same_mask(const Region& o) const { return nt == o.nt && nx == o.nx && cells == o.cells; }

bool Region::subset_of(const Region& o) const {
    if (nt != o.nt || nx != o.nx) throw std::invalid_argument("Region: grids differ");
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (cells[k] && !o.cells[k]) return false;
    }
    return true;
}

Region Region::interior() const {
    Region r = blank(box, nt, nx);
    for (int i = 1; i + 1 < nt; ++i) {
        for (int j = 1; j + 1 < nx; ++j) {
            bool all = true;
            for (int di = -1; di <= 1 && all; ++di) {
                for (int dj = -1; dj <= 1 && all; ++dj) all = at(i + di, j + dj);
            }
            r.set(i, j, all);
        }
    }
    return r;
}

Region Region::united(const Region& o) const {
    if (nt != o.nt || nx != o.nx) throw std::invalid_argument("Region: grids differ");
    Region r = *this;
    for (std::size_t k = 0; k < cells.size(); ++k) r.cells[k] = cells[k] | o.cells[k];
    r.boundary_clipped = boundary_clipped || o.boundary_clipped;
    return r;
}

Region Region::intersected(const Region& o) const {
    if (nt != o.nt || nx != o.nx) throw std::invalid_argument("Region: grids differ");
    Region r = *this;
    for (std::size_t k = 0; k < cells.size(); ++k) r.cells[k] = cells[k] & o.cells[k];
    return r;
}

Region region_from_predicate(const Box& box, int nt, int nx, const std::function<bool(double, double)>& inside) {
    Region r = Region::blank(box, nt, nx);
    for (int i = 0; i < nt; ++i) {
        for (int j = 0; j < nx; ++j) r.set(i, j, inside(r.t_center(i), r.x_center(j)));
    }
    return r;
}

double hausdorff_cells(const Region& a, const Region& b) {
    if (a.nt != b.nt || a.nx != b.nx) throw std::invalid_argument("hausdorff_cells: grids differ");
    const bool ea = a.empty(), eb = b.empty();
    if (ea && eb) return 0.0;
    if (ea || eb) return std::numeric_limits<double>::infinity();
    const auto directed = [](const Region& p, const Region& q) {
        std::vector<std::array<int, 2>> qs;
        for (int i = 0; i < q.nt; ++i) {
            for (int j = 0; j < q.nx; ++j) {
                if (q.at(i, j)) qs.push_back({i, j});
            }
        }
        int worst = 0;
        for (int i = 0; i < p.nt; ++i) {
            for (int j = 0; j < p.nx; ++j) {
                if (!p.at(i, j) || q.at(i, j)) continue;
                int best = std::numeric_limits<int>::max();
                for (const auto& c : qs) best = std::min(best, std::max(std::abs(c[0] - i), std::abs(c[1] - j)));
                worst = std::max(worst, best);
            }
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

// ---- Front propagation ----

namespace {

struct Span {
    double a, b;
};

void merge_spans(std::vector<Span>& s) {
    std::sort(s.begin(), s.end(), [](const Span& x, const Span& y) { return x.a < y.a; });
    std::vector<Span> out;
    for (const auto& v : s) {
        if (!out.empty() && v.a < out.back().b) out.back().b = std::max(out.back().b, v.b);
        else out.push_back(v);
    }
    s = std::move(out);
}

class FrontSweep {
public:
    FrontSweep(const SpacetimeModel& model, const Region& grid, TimeDirection dir, const ChronoOptions& opt,
               const Region* allowed)
        : model_(model), grid_(grid), sigma_(dir == TimeDirection::FUTURE ? 1.0 : -1.0), opt_(opt),
          allowed_(allowed) {
        if (opt.substeps < 1) throw std::invalid_argument("chronological_set: substeps must be >= 1");
        if (allowed_) {
            runs_.resize(grid.nt);
            for (int i = 0; i < grid.nt; ++i) {
                for (int j = 0; j < grid.nx; ++j) {
                    if (!allowed_->at(i, j)) continue;
                    const double lo = grid.box.lo[1] + j * grid.dx(), hi = lo + grid.dx();
                    if (!runs_[i].empty() && runs_[i].back().b >= lo) runs_[i].back().b = hi;
                    else runs_[i].push_back({lo, hi});
                }
            }
        }
    }

    // Point sources (t, x) and whole-cell sources from a mask.
    Region run(std::vector<Vec> points, const Region* cell_sources) {
        Region out = Region::blank(grid_.box, grid_.nt, grid_.nx);
        const int nt = grid_.nt;
        const auto row = [&](int k) { return sigma_ > 0 ? k : nt - 1 - k; };
        std::sort(points.begin(), points.end(),
                  [&](const Vec& p, const Vec& q) { return sigma_ * p[0] < sigma_ * q[0]; });
        std::size_t next = 0;
        double tau = grid_.t_center(row(0));
        if (!points.empty() && sigma_ * points.front()[0] < sigma_ * tau) tau = points.front()[0];
        spans_.clear();
        for (int k = 0; k < nt; ++k) {
            const int i = row(k);
            const double target = grid_.t_center(i);
            while (next < points.size() && sigma_ * points[next][0] <= sigma_ * target) {
                advance(tau, points[next][0]);
                tau = points[next][0];
                spans_.push_back({points[next][1], points[next][1]});
                ++next;
            }
            advance(tau, target);
            tau = target;
            if (cell_sources) {
                for (int j = 0; j < grid_.nx; ++j) {
                    if (!cell_sources->at(i, j)) continue;
                    const double lo = grid_.box.lo[1] + j * grid_.dx();
                    spans_.push_back({lo, lo + grid_.dx()});
                }
            }
            merge_spans(spans_);
            std::size_t s = 0;
            for (int j = 0; j < grid_.nx; ++j) {
                const double xc = grid_.x_center(j);
                while (s < spans_.size() && spans_[s].b <= xc) ++s;
                const bool in = s < spans_.size() && spans_[s].a < xc && xc < spans_[s].b;
                if (in && (!allowed_ || allowed_->at(i, j))) out.set(i, j, true);
            }
        }
        // Seeds beyond the last row centre still leave the chart.
        if (next < points.size()) clipped_ = true;
        const double edge = sigma_ > 0 ? grid_.box.hi[0] : grid_.box.lo[0];
        advance(tau, edge);
        if (!spans_.empty()) clipped_ = true;
        out.boundary_clipped = clipped_;
        if (turning_warning_) out.warnings.push_back("resolution coarser than the cone turning scale");
        return out;
    }

private:
    std::array<double, 2> slopes(double t, double x) const {
        t = std::clamp(t, model_.chart_box.lo[0], model_.chart_box.hi[0]);
        x = std::clamp(x, model_.chart_box.lo[1], model_.chart_box.hi[1]);
        return null_slopes(model_, t, x);
    }

    // Signed displacement of the left (want_min) or right end over a step h.
    double end_step(double t, double x, double h, bool want_min) const {
        const auto pick = [&](const std::array<double, 2>& s) {
            const double u = s[0] * h, v = s[1] * h;
            return want_min ? std::min(u, v) : std::max(u, v);
        };
        const double d1 = pick(slopes(t, x));
        return pick(slopes(t + 0.5 * h, x + 0.5 * d1));
    }

    double margin(double t, double x, double h) {
        const double hx = 0.5 * grid_.dx(), ht = 0.5 * grid_.dt();
        const auto sx0 = slopes(t, x - hx), sx1 = slopes(t, x + hx);
        const auto st0 = slopes(t - ht, x), st1 = slopes(t + ht, x);
        double var = 0.0;
        for (int k = 0; k < 2; ++k) {
            var = std::max(var, std::abs(sx1[k] - sx0[k]) + std::abs(st1[k] - st0[k]));
        }
        // A cone turning by more than ~0.2 rad per cell is not resolved.
        if (var > 0.4) turning_warning_ = true;
        return 0.5 * var * std::abs(h);
    }

    void advance(double t0, double t1) {
        if (spans_.empty() || t0 == t1) return;
        const double cell = grid_.dt() / opt_.substeps;
        const int n = std::max(1, static_cast<int>(std::ceil(std::abs(t1 - t0) / cell - 1e-12)));
        const double h = (t1 - t0) / n;
        const double xlo = grid_.box.lo[1], xhi = grid_.box.hi[1];
        double t = t0;
        for (int k = 0; k < n; ++k) {
            for (auto& sp : spans_) {
                const double da = end_step(t, sp.a, h, true);
                const double db = end_step(t, sp.b, h, false);
                double ma = margin(t, sp.a, h), mb = margin(t, sp.b, h);
                if (opt_.margin == ConeMargin::INNER) {
                    ma = -ma;
                    mb = -mb;
                }
                sp.a += da - ma;
                sp.b += db + mb;
                if (sp.a < xlo) {
                    sp.a = xlo;
                    clipped_ = true;
                }
                if (sp.b > xhi) {
                    sp.b = xhi;
                    clipped_ = true;
                }
            }
            t = (k + 1 == n) ? t1 : t + h;
            spans_.erase(std::remove_if(spans_.begin(), spans_.end(), [](const Span& s) { return s.b < s.a; }),
                         spans_.end());
            if (allowed_) restrict_to(t);
            merge_spans(spans_);
            if (spans_.empty()) return;
        }
    }

    void restrict_to(double t) {
        const auto [i, j] = grid_.cell_of(t, grid_.box.lo[1]);
        (void)j;
        if (i < 0) {
            spans_.clear();
            return;
        }
        std::vector<Span> out;
        for (const auto& s : spans_) {
            for (const auto& r : runs_[i]) {
                const double a = std::max(s.a, r.a), b = std::min(s.b, r.b);
                if (b > a || (a == b && s.a == s.b && s.a > r.a && s.a < r.b)) out.push_back({a, b});
            }
        }
        spans_ = std::move(out);
    }

    const SpacetimeModel& model_;
    const Region& grid_;
    double sigma_;
    ChronoOptions opt_;
    const Region* allowed_;
    std::vector<std::vector<Span>> runs_;
    std::vector<Span> spans_;
    bool clipped_ = false;
    bool turning_warning_ = false;
};

bool same_box(const Box& a, const Box& b) {
    for (int i = 0; i < 2; ++i) {
        if (std::abs(a.lo[i] - b.lo[i]) > 1e-12 || std::abs(a.hi[i] - b.hi[i]) > 1e-12) return false;
    }
    return a.dim == b.dim;
}

Region model_grid(const SpacetimeModel& model, int nt, int nx) { return Region::blank(model.chart_box, nt, nx); }

void check_in_chart(const SpacetimeModel& model, const Vec& p, const char* what) {
    if (!model.in_chart(p[0], p[1])) throw std::invalid_argument(std::string(what) + ": point outside chart");
}

}  // namespace

Region chronological_set(const SpacetimeModel& model, const std::vector<Vec>& seeds, TimeDirection dir, int nt,
                         int nx, const ChronoOptions& options) {
    for (const auto& p : seeds) check_in_chart(model, p, "chronological_set");
    const Region grid = model_grid(model, nt, nx);
    FrontSweep sweep(model, grid, dir, options, nullptr);
    return sweep.run(seeds, nullptr);
}

Region chronological_set(const SpacetimeModel& model, const Vec& seed, TimeDirection dir, int nt, int nx,
                         const ChronoOptions& options) {
    return chronological_set(model, std::vector<Vec>{seed}, dir, nt, nx, options);
}

Region chronological_set(const SpacetimeModel& model, const Region& seed, TimeDirection dir,
                         const ChronoOptions& options) {
    if (!same_box(seed.box, model.chart_box)) throw std::invalid_argument("chronological_set: seed grid must cover the chart");
    FrontSweep sweep(model, seed, dir, options, nullptr);
    return sweep.run({}, &seed);
}

bool chronologically_precedes(const SpacetimeModel& model, const Vec& p, const Vec& q, const ChronoOptions& options) {
    check_in_chart(model, p, "chronologically_precedes");
    check_in_chart(model, q, "chronologically_precedes");
    if (!(q[0] > p[0])) return false;
    // Follow the two null curves from p up to t_q.
    const int n = std::max(64, options.substeps * 64);
    const double h = (q[0] - p[0]) / n;
    double a = p[1], b = p[1], t = p[0];
    for (int k = 0; k < n; ++k) {
        const auto step = [&](double x, bool lo) {
            const auto s1 = null_slopes(model, t, x);
            const double d1 = lo ? s1[0] * h : s1[1] * h;
            const auto s2 = null_slopes(model, t + 0.5 * h, x + 0.5 * d1);
            return lo ? s2[0] * h : s2[1] * h;
        };
        a += step(a, true);
        b += step(b, false);
        t += h;
    }
    return q[1] > a + 1e-9 && q[1] < b - 1e-9;
}

IZeroResult i_zero(const SpacetimeModel& model, const Vec& p, const Vec& q, int nt, int nx,
                   const ChronoOptions& options) {
    check_in_chart(model, p, "i_zero");
    check_in_chart(model, q, "i_zero");
    IZeroResult res;
    res.region = model_grid(model, nt, nx);
    if (!chronologically_precedes(model, p, q, options)) {
        res.diagnostic = "q is not in the chronological future of p";
        return res;
    }
    const Region fut = chronological_set(model, p, TimeDirection::FUTURE, nt, nx, options);
    const Region past = chronological_set(model, q, TimeDirection::PAST, nt, nx, options);
    res.region = fut.intersected(past);
    res.region.boundary_clipped = false;
    for (const auto& e : {p, q}) {
        const auto c = res.region.cell_of(e[0], e[1]);
        if (c[0] >= 0) res.region.set(c[0], c[1], false);
    }
    return res;
}

EnvelopeResult timelike_envelope(const SpacetimeModel& model, const Region& o, const EnvelopeOptions& options) {
    if (o.empty()) throw std::invalid_argument("timelike_envelope: O must be nonempty");
    if (!same_box(o.box, model.chart_box)) throw std::invalid_argument("timelike_envelope: O must be gridded over the chart");
    EnvelopeResult res;
    res.region = o;
    for (int it = 0; it < options.max_iterations; ++it) {
        const Region interior = res.region.interior();
        std::vector<std::array<int, 2>> starts;
        for (int i = 0; i < interior.nt; ++i) {
            for (int j = 0; j < interior.nx; ++j) {
                if (interior.at(i, j)) starts.push_back({i, j});
            }
        }
        Region next = res.region;
        std::mutex lock;
        parallel_for(starts.size(), [&](std::size_t k) {
            const Vec p{interior.t_center(starts[k][0]), interior.x_center(starts[k][1])};
            FrontSweep reach(model, interior, TimeDirection::FUTURE, options.chrono, &interior);
            const Region r = reach.run({p}, nullptr);
            if (r.empty()) return;
            std::vector<Vec> qs;
            for (int i = 0; i < r.nt; ++i) {
                for (int j = 0; j < r.nx; ++j) {
                    if (r.at(i, j)) qs.push_back(Vec{r.t_center(i), r.x_center(j)});
                }
            }
            FrontSweep back(model, interior, TimeDirection::PAST, options.chrono, nullptr);
            const Region past = back.run(qs, nullptr);
            FrontSweep fwd(model, interior, TimeDirection::FUTURE, options.chrono, nullptr);
            const Region fut = fwd.run({p}, nullptr);
            const Region add = fut.intersected(past);
            std::lock_guard<std::mutex> g(lock);
            for (std::size_t c = 0; c < add.cells.size(); ++c) next.cells[c] |= add.cells[c];
        });
        res.iterations = it + 1;
        if (next.same_mask(res.region)) {
            res.converged = true;
            break;
        }
        res.region = std::move(next);
    }
    // Growth touching the chart edge is reported as clipped.
    res.region.boundary_clipped = false;
    for (int i = 0; i < res.region.nt; ++i) {
        for (int j = 0; j < res.region.nx; ++j) {
            const bool edge = i == 0 || j == 0 || i == res.region.nt - 1 || j == res.region.nx - 1;
            if (edge && res.region.at(i, j) && !o.at(i, j)) res.region.boundary_clipped = true;
        }
    }
    if (!res.converged) res.region.warnings.push_back("iteration cap reached; partial envelope");
    return res;
}

// ---- Tubes ----

CurveFamily straight_segment(const Vec& p, const Vec& q) {
    CurveFamily c;
    c.point = [p, q](double, double tau) { return Vec{p[0] + tau * (q[0] - p[0]), p[1] + tau * (q[1] - p[1])}; };
    c.tangent = [p, q](double, double) { return Vec{q[0] - p[0], q[1] - p[1]}; };
    c.label = "segment";
    return c;
}

CurveFamily bent_segment_family(double duration, double amplitude) {
    CurveFamily c;
    c.point = [duration, amplitude](double s, double tau) {
        return Vec{duration * tau, amplitude * s * std::sin(kPi * tau)};
    };
    c.tangent = [duration, amplitude](double s, double tau) {
        return Vec{duration, amplitude * s * kPi * std::cos(kPi * tau)};
    };
    c.label = "bent";
    return c;
}

namespace {

// g-unit spacelike normal to the timelike vector v at (t, x), oriented towards +x.
Vec unit_normal(const SpacetimeModel& model, const Vec& at, const Vec& v) {
    const auto gi = model.inverse_metric(at[0], at[1]);
    const double det = gi[0] * gi[2] - gi[1] * gi[1];
    const double g00 = gi[2] / det, g01 = -gi[1] / det, g11 = gi[0] / det;
    const double l0 = g00 * v[0] + g01 * v[1], l1 = g01 * v[0] + g11 * v[1];
    Vec w{-l1, l0};
    const double n2 = g00 * w[0] * w[0] + 2.0 * g01 * w[0] * w[1] + g11 * w[1] * w[1];
    if (!(n2 < 0.0)) throw std::invalid_argument("tube_sweep: curve tangent is not timelike");
    const double s = (w[1] >= 0.0 ? 1.0 : -1.0) / std::sqrt(-n2);
    return Vec{w[0] * s, w[1] * s};
}

}  // namespace

std::vector<TubeBoundary> tube_sweep(const SpacetimeModel& model, const CurveFamily& gamma, double delta,
                                     const TubeSweepOptions& options) {
    if (!gamma.point || !gamma.tangent) throw std::invalid_argument("tube_sweep: curve family incomplete");
    if (!(delta > 0.0)) throw std::invalid_argument("tube_sweep: delta must be positive");
    if (options.tau_samples < 2) throw std::invalid_argument("tube_sweep: need at least two tau samples");
    std::vector<TubeBoundary> out;
    for (double s : options.s_samples) {
        // Timelike, future directed, with a small margin.
        for (int k = 0; k <= options.tau_samples; ++k) {
            const double tau = static_cast<double>(k) / options.tau_samples;
            const Vec p = gamma.point(s, tau), v = gamma.tangent(s, tau);
            if (!model.in_chart(p[0], p[1])) throw TubeError("tube_sweep: curve leaves the chart", s, p[0]);
            const auto gi = model.inverse_metric(p[0], p[1]);
            const double det = gi[0] * gi[2] - gi[1] * gi[1];
            const double q = (gi[2] * v[0] * v[0] - 2.0 * gi[1] * v[0] * v[1] + gi[0] * v[1] * v[1]) / det;
            if (!(v[0] > 0.0) || !(q > 1e-6 * (v[0] * v[0] + v[1] * v[1]))) {
                throw TubeError("tube_sweep: gamma_s is not future timelike", s, p[0]);
            }
        }
        TubeBoundary tb;
        tb.s = s;
        for (int side = 0; side < 2; ++side) {
            const double sign = side == 0 ? 1.0 : -1.0;
            // Copies: the level-set closures outlive this call.
            auto c = [model, gamma, s, sign, delta](double tau) {
                const Vec p = gamma.point(s, tau);
                const Vec n = unit_normal(model, p, gamma.tangent(s, tau));
                return Vec{p[0] + sign * delta * n[0], p[1] + sign * delta * n[1]};
            };
            auto dc = [c](double tau) {
                const double e = 1e-6;
                const double a = std::max(0.0, tau - e), b = std::min(1.0, tau + e);
                const Vec ca = c(a), cb = c(b);
                return Vec{(cb[0] - ca[0]) / (b - a), (cb[1] - ca[1]) / (b - a)};
            };
            for (int k = 0; k <= options.tau_samples; ++k) {
                const double tau = static_cast<double>(k) / options.tau_samples;
                const Vec p = c(tau), d = dc(tau);
                Vec at = p;
                at[0] = std::clamp(at[0], model.chart_box.lo[0], model.chart_box.hi[0]);
                at[1] = std::clamp(at[1], model.chart_box.lo[1], model.chart_box.hi[1]);
                const Vec conormal{-d[1], d[0]};
                if (!(d[0] > 0.0) || cone_classify(model, at, conormal) != CausalClass::SPACELIKE) {
                    throw TubeError("tube_sweep: boundary normal not spacelike at s = " + std::to_string(s) +
                                        ", t = " + std::to_string(p[0]),
                                    s, p[0]);
                }
            }
            const double t0 = c(0.0)[0], t1 = c(1.0)[0];
            // x = B(t) by bisection on the monotone time component; linear beyond the ends.
            auto solve = [c, dc, t0, t1](double t) {
                if (t <= t0) {
                    const Vec p = c(0.0), d = dc(0.0);
                    return std::array<double, 2>{p[1] + (t - p[0]) * d[1] / d[0], d[1] / d[0]};
                }
                if (t >= t1) {
                    const Vec p = c(1.0), d = dc(1.0);
                    return std::array<double, 2>{p[1] + (t - p[0]) * d[1] / d[0], d[1] / d[0]};
                }
                double lo = 0.0, hi = 1.0;
                for (int it = 0; it < 60; ++it) {
                    const double m = 0.5 * (lo + hi);
                    if (c(m)[0] < t) lo = m;
                    else hi = m;
                }
                const double tau = 0.5 * (lo + hi);
                const Vec p = c(tau), d = dc(tau);
                return std::array<double, 2>{p[1] + (t - p[0]) * d[1] / d[0], d[1] / d[0]};
            };
            TubeSide ts;
            ts.surface.dim = 2;
            ts.surface.phi = [solve](const Vec& y) { return y[1] - solve(y[0])[0]; };
            ts.surface.grad = [solve](const Vec& y) { return Vec{-solve(y[0])[1], 1.0}; };
            ts.surface.label = gamma.label + (side == 0 ? " +" : " -");
            ts.window = Box::rect(std::max(t0, model.chart_box.lo[0]), std::min(t1, model.chart_box.hi[0]),
                                  model.chart_box.lo[1], model.chart_box.hi[1]);
            tb.sides[side] = std::move(ts);
        }
        out.push_back(std::move(tb));
    }
    return out;
}

ConicSet causal_conic_set(const SpacetimeModel& model, const Box& window, int cells_per_axis) {
    if (window.dim != 2 || cells_per_axis < 1) throw std::invalid_argument("causal_conic_set: bad window");
    ConicSet s;
    s.dim = 2;
    const int n = cells_per_axis;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Box cell = Box::rect(window.lo[0] + window.width(0) * i / n, window.lo[0] + window.width(0) * (i + 1) / n,
                                       window.lo[1] + window.width(1) * j / n, window.lo[1] + window.width(1) * (j + 1) / n);
            double lo = 0.0, hi = 0.0;
            for (int a = 0; a <= 2; ++a) {
                for (int b = 0; b <= 2; ++b) {
                    const double t = cell.lo[0] + cell.width(0) * a / 2, x = cell.lo[1] + cell.width(1) * b / 2;
                    const auto g = model.inverse_metric(t, x);
                    // Null covectors (k, 1): k^2 + 2 h01 k + h11 = 0, signs fixed by future pairing.
                    const double h01 = g[1] / g[0], h11 = g[2] / g[0];
                    const double disc = std::sqrt(h01 * h01 - h11);
                    double up = -kPi, down = kPi;
                    for (double k : {-h01 - disc, -h01 + disc}) {
                        for (double sg : {1.0, -1.0}) {
                            const double x0 = sg * k, x1 = sg;
                            if (g[0] * x0 + g[1] * x1 <= 0.0) continue;
                            const double ang = std::atan2(x1, x0);
                            if (ang > 0.0) up = ang;
                            else down = ang;
                        }
                    }
                    if (a == 0 && b == 0) {
                        lo = down;
                        hi = up;
                    } else {
                        lo = std::min(lo, down);
                        hi = std::max(hi, up);
                    }
                }
            }
            s.cells.push_back({cell, Cone::arc(lo, hi)});
        }
    }
    s.canonicalize();
    return s;
}

// ---- Export ----

nlohmann::json to_json(const Region& r) {
    nlohmann::json rle = nlohmann::json::array();
    std::size_t k = 0;
    while (k < r.cells.size()) {
        std::size_t e = k;
        while (e < r.cells.size() && r.cells[e] == r.cells[k]) ++e;
        rle.push_back({static_cast<int>(r.cells[k]), e - k});
        k = e;
    }
    return nlohmann::json{{"box", {{"t", {r.box.lo[0], r.box.hi[0]}}, {"x", {r.box.lo[1], r.box.hi[1]}}}},
                          {"nt", r.nt},
                          {"nx", r.nx},
                          {"order", "row-major, rows = t"},
                          {"rle", rle},
                          {"count", r.count()},
                          {"boundary_clipped", r.boundary_clipped},
                          {"warnings", r.warnings}};
}

Region region_from_json(const nlohmann::json& j) {
    const auto t = j.at("box").at("t").get<std::vector<double>>();
    const auto x = j.at("box").at("x").get<std::vector<double>>();
    if (t.size() != 2 || x.size() != 2) throw std::invalid_argument("region: box.t and box.x need two entries");
    Region r = Region::blank(Box::rect(t[0], t[1], x[0], x[1]), j.at("nt").get<int>(), j.at("nx").get<int>());
    std::size_t k = 0;
    for (const auto& run : j.at("rle")) {
        const int v = run.at(0).get<int>();
        const auto n = run.at(1).get<std::size_t>();
        if (k + n > r.cells.size()) throw std::invalid_argument("region: rle longer than the grid");
        std::fill_n(r.cells.begin() + static_cast<std::ptrdiff_t>(k), n, v ? 1 : 0);
        k += n;
    }
    if (k != r.cells.size()) throw std::invalid_argument("region: rle shorter than the grid");
    r.boundary_clipped = j.value("boundary_clipped", false);
    return r;
}

void write_region_png(const Region& r, const std::string& path, int cell_px) {
    std::vector<std::vector<bool>> mask(r.nt, std::vector<bool>(r.nx));
    for (int i = 0; i < r.nt; ++i) {
        for (int j = 0; j < r.nx; ++j) mask[i][j] = r.at(i, j);
    }
    write_mask_png(mask, path, cell_px);
}

}  // namespace microlocal
