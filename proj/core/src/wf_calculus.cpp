#include "microlocal/wf_calculus.hpp"

#include "microlocal/io.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace microlocal {

namespace {

constexpr double kTwoPi = 2.0 * kPi;
constexpr double kSnap = 1e-12;

struct Interval {
    double lo, hi;
};

// Arcs as intervals of [0, 2 pi]; a wrapping arc becomes two pieces.
std::vector<Interval> to_intervals(const std::vector<Arc>& arcs) {
    std::vector<Interval> out;
    for (const auto& a : arcs) {
        if (a.length() >= kTwoPi - kSnap) return {{0.0, kTwoPi}};
        if (a.hi <= kTwoPi) {
            out.push_back({a.lo, a.hi});
        } else {
            out.push_back({a.lo, kTwoPi});
            out.push_back({0.0, a.hi - kTwoPi});
        }
    }
    std::sort(out.begin(), out.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    std::vector<Interval> merged;
    for (const auto& iv : out) {
        if (!merged.empty() && iv.lo <= merged.back().hi + kSnap) {
            merged.back().hi = std::max(merged.back().hi, iv.hi);
        } else {
            merged.push_back(iv);
        }
    }
    return merged;
}

std::vector<Arc> from_intervals(std::vector<Interval> iv) {
    if (iv.empty()) return {};
    if (iv.size() == 1 && iv[0].lo <= kSnap && iv[0].hi >= kTwoPi - kSnap) return {{0.0, kTwoPi}};
    // Join a piece ending at 2 pi with one starting at 0.
    if (iv.size() >= 2 && iv.front().lo <= kSnap && iv.back().hi >= kTwoPi - kSnap) {
        const Interval first = iv.front();
        iv.erase(iv.begin());
        iv.back().hi = kTwoPi + first.hi;
    }
    std::vector<Arc> out;
    for (const auto& x : iv) {
        double lo = x.lo, hi = x.hi;
        if (lo >= kTwoPi - kSnap) {
            lo -= kTwoPi;
            hi -= kTwoPi;
        }
        out.push_back({std::max(0.0, lo), std::max(std::max(0.0, lo), hi)});
    }
    std::sort(out.begin(), out.end(), [](const Arc& a, const Arc& b) { return a.lo < b.lo; });
    return out;
}

// Signed angular offset of b from a, in (-pi, pi].
double angle_offset(double a, double b) {
    double d = std::fmod(b - a, kTwoPi);
    if (d > kPi) d -= kTwoPi;
    if (d <= -kPi) d += kTwoPi;
    return d;
}

// Smallest arc containing angles that lie within a half-circle of ref.
Arc hull_around(double ref, const std::vector<double>& angles) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (double a : angles) {
        const double d = angle_offset(ref, a);
        if (first) {
            lo = hi = d;
            first = false;
        } else {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    }
    const double start = wrap_angle(ref + lo);
    return {start, start + (hi - lo)};
}

bool boxes_touch(const Box& a, const Box& b) {
    for (int i = 0; i < a.dim; ++i) {
        if (a.lo[i] > b.hi[i] + kSnap || b.lo[i] > a.hi[i] + kSnap) return false;
    }
    return true;
}

Box box_intersection(const Box& a, const Box& b) {
    Box r = a;
    for (int i = 0; i < a.dim; ++i) {
        r.lo[i] = std::max(a.lo[i], b.lo[i]);
        r.hi[i] = std::max(r.lo[i], std::min(a.hi[i], b.hi[i]));
    }
    return r;
}

bool box_contains_box(const Box& outer, const Box& inner) {
    for (int i = 0; i < outer.dim; ++i) {
        if (inner.lo[i] < outer.lo[i] - kSnap || inner.hi[i] > outer.hi[i] + kSnap) return false;
    }
    return true;
}

bool same_box(const Box& a, const Box& b) { return box_contains_box(a, b) && box_contains_box(b, a); }

// Total order on cones used for grouping.
bool cone_less(const Cone& a, const Cone& b) {
    if (a.plus != b.plus) return a.plus < b.plus;
    if (a.minus != b.minus) return a.minus < b.minus;
    if (a.arcs.size() != b.arcs.size()) return a.arcs.size() < b.arcs.size();
    for (std::size_t i = 0; i < a.arcs.size(); ++i) {
        if (a.arcs[i].lo != b.arcs[i].lo) return a.arcs[i].lo < b.arcs[i].lo;
        if (a.arcs[i].hi != b.arcs[i].hi) return a.arcs[i].hi < b.arcs[i].hi;
    }
    return false;
}

// Directions xi1 + xi2 with xi1 in a, xi2 in b, both nonzero; a and b free of antipodal pairs.
Arc arc_sum(const Arc& a, const Arc& b) {
    const double la = a.length();
    double b0 = wrap_angle(b.lo - a.lo);
    if (b0 > kPi) b0 -= kTwoPi;
    const double b1 = b0 + b.length();
    const double lo = std::min(0.0, b0), hi = std::max(la, b1);
    const double start = wrap_angle(a.lo + lo);
    return {start, start + (hi - lo)};
}

double jt_component(const std::array<Vec, 2>& J, int d_out, int j, const Vec& eta) {
    double v = 0.0;
    for (int i = 0; i < d_out; ++i) v += J[i][j] * eta[i];
    return v;
}

std::vector<Vec> box_samples(const Box& b, int per_axis) {
    std::vector<Vec> out;
    const int n = per_axis;
    if (b.dim == 1) {
        for (int i = 0; i < n; ++i) out.push_back(Vec{b.lo[0] + (b.hi[0] - b.lo[0]) * i / (n - 1), 0.0});
        return out;
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            out.push_back(Vec{b.lo[0] + (b.hi[0] - b.lo[0]) * i / (n - 1),
                              b.lo[1] + (b.hi[1] - b.lo[1]) * j / (n - 1)});
        }
    }
    return out;
}

std::vector<Box> grid_cells(const Box& window, int n) {
    std::vector<Box> out;
    if (window.dim == 1) {
        for (int i = 0; i < n; ++i) {
            const double a = window.lo[0] + window.width(0) * i / n;
            const double b = window.lo[0] + window.width(0) * (i + 1) / n;
            out.push_back(Box::interval(a, b));
        }
        return out;
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            out.push_back(Box::rect(window.lo[0] + window.width(0) * i / n,
                                    window.lo[0] + window.width(0) * (i + 1) / n,
                                    window.lo[1] + window.width(1) * j / n,
                                    window.lo[1] + window.width(1) * (j + 1) / n));
        }
    }
    return out;
}

}  // namespace

double wrap_angle(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r -= kTwoPi;
    return r;
}

Cone Cone::none(int dim) {
    Cone c;
    c.dim = dim;
    return c;
}

Cone Cone::full(int dim) {
    Cone c;
    c.dim = dim;
    if (dim == 1) {
        c.plus = c.minus = true;
    } else {
        c.arcs = {{0.0, kTwoPi}};
    }
    return c;
}

Cone Cone::sign(bool plus, bool minus) {
    Cone c;
    c.dim = 1;
    c.plus = plus;
    c.minus = minus;
    return c;
}

Cone Cone::arc(double lo, double hi) {
    if (!(hi >= lo)) throw std::invalid_argument("Cone::arc: hi < lo");
    Cone c;
    c.dim = 2;
    const double len = std::min(hi - lo, kTwoPi);
    const double start = wrap_angle(lo);
    c.arcs = {{start, start + len}};
    c.normalize();
    return c;
}

void Cone::normalize() {
    if (dim == 1) return;
    for (auto& a : arcs) {
        const double len = std::clamp(a.hi - a.lo, 0.0, kTwoPi);
        a.lo = wrap_angle(a.lo);
        a.hi = a.lo + len;
    }
    arcs = from_intervals(to_intervals(arcs));
}

bool Cone::empty() const { return dim == 1 ? !(plus || minus) : arcs.empty(); }

bool Cone::contains_angle(double angle, double tol) const {
    if (dim == 1) {
        const double c = std::cos(angle);
        return (c > 0.0 && plus) || (c < 0.0 && minus);
    }
    const double t = wrap_angle(angle);
    for (const auto& a : arcs) {
        if ((t >= a.lo - tol && t <= a.hi + tol) || (t + kTwoPi >= a.lo - tol && t + kTwoPi <= a.hi + tol)) {
            return true;
        }
        if (a.lo <= tol && t >= kTwoPi - tol) return true;
    }
    return false;
}

bool Cone::contains(const Vec& xi, double tol) const {
    if (dim == 1) {
        if (xi[0] == 0.0) throw std::invalid_argument("Cone::contains: zero covector");
        return xi[0] > 0.0 ? plus : minus;
    }
    if (xi[0] == 0.0 && xi[1] == 0.0) throw std::invalid_argument("Cone::contains: zero covector");
    return contains_angle(std::atan2(xi[1], xi[0]), tol);
}

Cone Cone::negated() const {
    Cone c = *this;
    if (dim == 1) {
        std::swap(c.plus, c.minus);
        return c;
    }
    for (auto& a : c.arcs) {
        const double len = a.length();
        a.lo = wrap_angle(a.lo + kPi);
        a.hi = a.lo + len;
    }
    c.normalize();
    return c;
}

Cone Cone::united(const Cone& other) const {
    if (dim != other.dim) throw std::invalid_argument("Cone: dimension mismatch");
    Cone c = *this;
    if (dim == 1) {
        c.plus = plus || other.plus;
        c.minus = minus || other.minus;
        return c;
    }
    c.arcs.insert(c.arcs.end(), other.arcs.begin(), other.arcs.end());
    c.normalize();
    return c;
}

Cone Cone::intersected(const Cone& other) const {
    if (dim != other.dim) throw std::invalid_argument("Cone: dimension mismatch");
    Cone c = none(dim);
    if (dim == 1) {
        c.plus = plus && other.plus;
        c.minus = minus && other.minus;
        return c;
    }
    const auto a = to_intervals(arcs), b = to_intervals(other.arcs);
    std::vector<Interval> out;
    for (const auto& x : a) {
        for (const auto& y : b) {
            const double lo = std::max(x.lo, y.lo), hi = std::min(x.hi, y.hi);
            if (hi >= lo - kSnap) out.push_back({lo, std::max(lo, hi)});
        }
    }
    // A point at 2 pi is the same direction as 0.
    for (auto& iv : out) {
        if (iv.lo >= kTwoPi - kSnap) iv = {0.0, 0.0};
    }
    std::sort(out.begin(), out.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
    std::vector<Interval> merged;
    for (const auto& iv : out) {
        if (!merged.empty() && iv.lo <= merged.back().hi + kSnap) {
            merged.back().hi = std::max(merged.back().hi, iv.hi);
        } else {
            merged.push_back(iv);
        }
    }
    c.arcs = from_intervals(merged);
    return c;
}

bool Cone::operator==(const Cone& other) const {
    if (dim != other.dim) return false;
    if (dim == 1) return plus == other.plus && minus == other.minus;
    if (arcs.size() != other.arcs.size()) return false;
    for (std::size_t i = 0; i < arcs.size(); ++i) {
        if (std::abs(arcs[i].lo - other.arcs[i].lo) > 1e-12 || std::abs(arcs[i].hi - other.arcs[i].hi) > 1e-12) {
            return false;
        }
    }
    return true;
}

ConicSet ConicSet::single(const Box& base, const Cone& cone) {
    if (base.dim != cone.dim) throw std::invalid_argument("ConicSet: base and cone dimensions differ");
    ConicSet s;
    s.dim = base.dim;
    s.cells.push_back({base, cone});
    return s;
}

bool ConicSet::empty() const {
    return std::all_of(cells.begin(), cells.end(), [](const ConicCell& c) { return c.cone.empty(); });
}

bool ConicSet::contains(const Vec& x, const Vec& xi, double tol) const {
    for (const auto& c : cells) {
        if (c.base.contains(x, tol) && c.cone.contains(xi, tol)) return true;
    }
    return false;
}

ConicSet ConicSet::negated() const {
    ConicSet s = *this;
    for (auto& c : s.cells) c.cone = c.cone.negated();
    return s;
}

void ConicSet::canonicalize() {
    std::vector<ConicCell> v;
    for (const auto& c : cells) {
        if (!c.cone.empty() && !c.base.empty()) v.push_back(c);
    }
    // Cells on the same base share one cone.
    std::vector<ConicCell> by_base;
    for (const auto& c : v) {
        auto it = std::find_if(by_base.begin(), by_base.end(),
                               [&](const ConicCell& o) { return same_box(o.base, c.base); });
        if (it == by_base.end()) by_base.push_back(c);
        else it->cone = it->cone.united(c.cone);
    }
    v = std::move(by_base);
    // Merge runs along each axis: equal cone, equal extent on the other axis, touching.
    for (int axis = 0; axis < dim; ++axis) {
        const int other = dim == 2 ? 1 - axis : axis;
        std::sort(v.begin(), v.end(), [&](const ConicCell& a, const ConicCell& b) {
            if (cone_less(a.cone, b.cone)) return true;
            if (cone_less(b.cone, a.cone)) return false;
            if (dim == 2) {
                if (a.base.lo[other] != b.base.lo[other]) return a.base.lo[other] < b.base.lo[other];
                if (a.base.hi[other] != b.base.hi[other]) return a.base.hi[other] < b.base.hi[other];
            }
            return a.base.lo[axis] < b.base.lo[axis];
        });
        std::vector<ConicCell> merged;
        for (const auto& c : v) {
            if (!merged.empty()) {
                auto& m = merged.back();
                const bool same_other = dim == 1 || (std::abs(m.base.lo[other] - c.base.lo[other]) <= kSnap &&
                                                     std::abs(m.base.hi[other] - c.base.hi[other]) <= kSnap);
                if (m.cone == c.cone && same_other && c.base.lo[axis] <= m.base.hi[axis] + kSnap) {
                    m.base.hi[axis] = std::max(m.base.hi[axis], c.base.hi[axis]);
                    continue;
                }
            }
            merged.push_back(c);
        }
        v = std::move(merged);
    }
    // Drop cells inside another cell whose cone contains theirs.
    std::vector<char> drop(v.size(), 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = 0; j < v.size() && !drop[i]; ++j) {
            if (i == j || drop[j]) continue;
            if (box_contains_box(v[j].base, v[i].base) && v[j].cone.united(v[i].cone) == v[j].cone) drop[i] = 1;
        }
    }
    cells.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!drop[i]) cells.push_back(v[i]);
    }
}

ConicSet cs_union(const ConicSet& a, const ConicSet& b) {
    if (a.dim != b.dim) throw std::invalid_argument("cs_union: dimension mismatch");
    ConicSet s = a;
    s.cells.insert(s.cells.end(), b.cells.begin(), b.cells.end());
    s.canonicalize();
    return s;
}

ConicSet cs_intersection(const ConicSet& a, const ConicSet& b) {
    if (a.dim != b.dim) throw std::invalid_argument("cs_intersection: dimension mismatch");
    ConicSet s;
    s.dim = a.dim;
    for (const auto& x : a.cells) {
        for (const auto& y : b.cells) {
            if (!boxes_touch(x.base, y.base)) continue;
            Cone c = x.cone.intersected(y.cone);
            if (!c.empty()) s.cells.push_back({box_intersection(x.base, y.base), c});
        }
    }
    s.canonicalize();
    return s;
}

bool cs_intersects(const ConicSet& a, const ConicSet& b) {
    for (const auto& x : a.cells) {
        for (const auto& y : b.cells) {
            if (boxes_touch(x.base, y.base) && x.cone.intersects(y.cone)) return true;
        }
    }
    return false;
}

SmoothMap smooth_map_1d(const AnalyticMap& f, const Box& domain) {
    SmoothMap m;
    m.d_in = m.d_out = 1;
    m.F = [F = f.F](const Vec& x) { return Vec{F(x[0]), 0.0}; };
    m.jacobian = [dF = f.dF](const Vec& x) { return std::array<Vec, 2>{Vec{dF(x[0]), 0.0}, Vec{0.0, 0.0}}; };
    m.domain = domain;
    m.label = f.label;
    return m;
}

SmoothMap affine_map_2d(const std::array<Vec, 2>& A, const Vec& b, const Box& domain) {
    SmoothMap m;
    m.d_in = m.d_out = 2;
    m.F = [A, b](const Vec& x) {
        return Vec{A[0][0] * x[0] + A[0][1] * x[1] + b[0], A[1][0] * x[0] + A[1][1] * x[1] + b[1]};
    };
    m.jacobian = [A](const Vec&) { return A; };
    m.domain = domain;
    m.label = "affine";
    return m;
}

SmoothMap diagonal_embedding(const Box& domain) {
    SmoothMap m;
    m.d_in = 1;
    m.d_out = 2;
    m.F = [](const Vec& x) { return Vec{x[0], x[0]}; };
    m.jacobian = [](const Vec&) { return std::array<Vec, 2>{Vec{1.0, 0.0}, Vec{1.0, 0.0}}; };
    m.domain = domain;
    m.label = "diagonal";
    return m;
}

std::string to_string(CombineRule r) {
    switch (r) {
        case CombineRule::SUM: return "SUM";
        case CombineRule::TENSOR: return "TENSOR";
        case CombineRule::PULLBACK: return "PULLBACK";
        case CombineRule::PRODUCT: return "PRODUCT";
    }
    return "SUM";
}

ConicSet cs_sum(const ConicSet& a, const ConicSet& b) { return cs_union(a, b); }

ConicSet cs_tensor(const ConicSet& a, const Box& support_a, const ConicSet& b, const Box& support_b) {
    if (a.dim != 1 || b.dim != 1) throw std::invalid_argument("cs_tensor: factors must be one-dimensional");
    ConicSet s;
    s.dim = 2;
    const auto rect = [](const Box& x, const Box& y) { return Box::rect(x.lo[0], x.hi[0], y.lo[0], y.hi[0]); };
    const auto rays = [](const Cone& c, double plus_angle) {
        Cone r = Cone::none(2);
        if (c.plus) r = r.united(Cone::ray(plus_angle));
        if (c.minus) r = r.united(Cone::ray(plus_angle + kPi));
        return r;
    };
    for (const auto& c : a.cells) s.cells.push_back({rect(c.base, support_b), rays(c.cone, 0.0)});
    for (const auto& c : b.cells) s.cells.push_back({rect(support_a, c.base), rays(c.cone, 0.5 * kPi)});
    for (const auto& x : a.cells) {
        for (const auto& y : b.cells) {
            Cone q = Cone::none(2);
            // Closed quadrants; their edges belong to the zero-augmented blocks anyway.
            for (int sx : {1, -1}) {
                if (!(sx > 0 ? x.cone.plus : x.cone.minus)) continue;
                for (int sy : {1, -1}) {
                    if (!(sy > 0 ? y.cone.plus : y.cone.minus)) continue;
                    const double a0 = std::atan2(0.0, sx), a1 = std::atan2(sy, 0.0);
                    double lo = a0, hi = a0 + angle_offset(a0, a1);
                    if (hi < lo) std::swap(lo, hi);
                    q = q.united(Cone::arc(lo, hi));
                }
            }
            s.cells.push_back({rect(x.base, y.base), q});
        }
    }
    s.canonicalize();
    return s;
}

ConicSet cs_product(const ConicSet& a, const ConicSet& b) {
    if (a.dim != b.dim) throw std::invalid_argument("cs_product: dimension mismatch");
    ConicSet s;
    s.dim = a.dim;
    s.cells = a.cells;
    s.cells.insert(s.cells.end(), b.cells.begin(), b.cells.end());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        for (std::size_t j = 0; j < b.cells.size(); ++j) {
            const auto& x = a.cells[i];
            const auto& y = b.cells[j];
            if (!boxes_touch(x.base, y.base) || x.cone.empty() || y.cone.empty()) continue;
            if (x.cone.intersects(y.cone.negated())) {
                throw CalculusError("cs_product: xi + eta = 0 possible between cell " + std::to_string(i) +
                                        " and cell " + std::to_string(j),
                                    i, j);
            }
            Cone sum = Cone::none(a.dim);
            if (a.dim == 1) {
                sum = x.cone.united(y.cone);
            } else {
                for (const auto& p : x.cone.arcs) {
                    for (const auto& q : y.cone.arcs) {
                        const Arc r = arc_sum(p, q);
                        sum = sum.united(Cone::arc(r.lo, r.hi));
                    }
                }
            }
            s.cells.push_back({box_intersection(x.base, y.base), sum});
        }
    }
    s.canonicalize();
    return s;
}

ConicSet cs_pullback(const ConicSet& w, const SmoothMap& f) {
    if (w.dim != f.d_out) throw std::invalid_argument("cs_pullback: set lives in the wrong dimension");
    if (!f.F || !f.jacobian) throw std::invalid_argument("cs_pullback: map needs F and its Jacobian");
    if (f.domain.dim != f.d_in) throw std::invalid_argument("cs_pullback: domain dimension");
    ConicSet out;
    out.dim = f.d_in;
    const auto cells = grid_cells(f.domain, f.d_in == 1 ? 256 : 32);
    for (const auto& dom : cells) {
        const auto samples = box_samples(dom, f.d_in == 1 ? 5 : 3);
        Box img;
        img.dim = f.d_out;
        bool first = true;
        std::vector<std::array<Vec, 2>> jac;
        for (const auto& x : samples) {
            const Vec y = f.F(x);
            for (int i = 0; i < f.d_out; ++i) {
                img.lo[i] = first ? y[i] : std::min(img.lo[i], y[i]);
                img.hi[i] = first ? y[i] : std::max(img.hi[i], y[i]);
            }
            first = false;
            jac.push_back(f.jacobian(x));
        }
        // Curvature margin: the sampled image box is widened by a quarter of its extent.
        for (int i = 0; i < f.d_out; ++i) {
            const double m = 0.25 * (img.hi[i] - img.lo[i]) + kSnap;
            img.lo[i] -= m;
            img.hi[i] += m;
        }
        for (std::size_t ci = 0; ci < w.cells.size(); ++ci) {
            const auto& cell = w.cells[ci];
            if (cell.cone.empty() || !boxes_touch(cell.base, img)) continue;
            // Directions eta of the cell, as samples (d_out = 1) or pieces of arcs shorter than pi/2.
            std::vector<std::pair<Vec, Vec>> pieces;
            if (f.d_out == 1) {
                if (cell.cone.plus) pieces.push_back({Vec{1.0, 0.0}, Vec{1.0, 0.0}});
                if (cell.cone.minus) pieces.push_back({Vec{-1.0, 0.0}, Vec{-1.0, 0.0}});
            } else {
                for (const auto& a : cell.cone.arcs) {
                    const int n = std::max(1, static_cast<int>(std::ceil(a.length() / (0.5 * kPi))));
                    for (int k = 0; k < n; ++k) {
                        const double t0 = a.lo + a.length() * k / n, t1 = a.lo + a.length() * (k + 1) / n;
                        pieces.push_back({Vec{std::cos(t0), std::sin(t0)}, Vec{std::cos(t1), std::sin(t1)}});
                    }
                }
            }
            Cone mapped = Cone::none(f.d_in);
            for (const auto& [ea, eb] : pieces) {
                const Vec em{ea[0] + eb[0], ea[1] + eb[1]};
                if (f.d_in == 1) {
                    // J^T eta is a scalar; its sign must be constant over the piece and the cell.
                    int sgn = 0;
                    for (const auto& J : jac) {
                        for (const Vec& e : {ea, eb, em}) {
                            const double v = jt_component(J, f.d_out, 0, e);
                            const double scale = std::abs(J[0][0]) + std::abs(J[1][0]);
                            const int s = v > 1e-12 * scale ? 1 : (v < -1e-12 * scale ? -1 : 0);
                            if (s == 0 || (sgn != 0 && s != sgn)) {
                                throw CalculusError("cs_pullback: conormal of the map meets cell " +
                                                        std::to_string(ci),
                                                    ci, ci);
                            }
                            sgn = s;
                        }
                    }
                    mapped = mapped.united(sgn > 0 ? Cone::positive() : Cone::negative());
                    continue;
                }
                std::vector<double> angles;
                for (const auto& J : jac) {
                    const double jn = std::hypot(std::hypot(J[0][0], J[0][1]), std::hypot(J[1][0], J[1][1]));
                    for (const Vec& e : {ea, eb, em}) {
                        const Vec v{jt_component(J, f.d_out, 0, e), jt_component(J, f.d_out, 1, e)};
                        if (std::hypot(v[0], v[1]) <= 1e-12 * jn) {
                            throw CalculusError("cs_pullback: conormal of the map meets cell " + std::to_string(ci),
                                                ci, ci);
                        }
                        angles.push_back(std::atan2(v[1], v[0]));
                    }
                    if (f.d_out == 2) {
                        // A kernel direction strictly inside the piece also collides.
                        const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
                        if (std::abs(det) <= 1e-12 * jn * jn) {
                            const Vec k{J[1][0] != 0.0 || J[1][1] != 0.0 ? -J[1][0] : -J[0][0],
                                        J[1][0] != 0.0 || J[1][1] != 0.0 ? J[0][0] : J[0][1]};
                            const double ta = std::atan2(ea[1], ea[0]);
                            const double span = angle_offset(ta, std::atan2(eb[1], eb[0]));
                            for (double kd : {std::atan2(k[1], k[0]), std::atan2(-k[1], -k[0])}) {
                                const double o = angle_offset(ta, kd);
                                if (o >= -kSnap && o <= span + kSnap) {
                                    throw CalculusError("cs_pullback: conormal of the map meets cell " +
                                                            std::to_string(ci),
                                                        ci, ci);
                                }
                            }
                        }
                    }
                }
                const Arc h = hull_around(angles.front(), angles);
                mapped = mapped.united(Cone::arc(h.lo, h.hi));
            }
            if (!mapped.empty()) out.cells.push_back({dom, mapped});
        }
    }
    out.canonicalize();
    return out;
}

ConicSet cs_combine(CombineRule rule, const CombineArgs& args) {
    const auto need = [&](std::size_t n) {
        if (args.sets.size() != n) {
            throw std::invalid_argument("cs_combine " + to_string(rule) + ": expected " + std::to_string(n) +
                                        " sets");
        }
    };
    switch (rule) {
        case CombineRule::SUM: {
            if (args.sets.empty()) throw std::invalid_argument("cs_combine SUM: no sets");
            ConicSet s = args.sets.front();
            for (std::size_t i = 1; i < args.sets.size(); ++i) s = cs_sum(s, args.sets[i]);
            return s;
        }
        case CombineRule::TENSOR:
            need(2);
            if (args.supports.size() != 2) throw std::invalid_argument("cs_combine TENSOR: two supports needed");
            return cs_tensor(args.sets[0], args.supports[0], args.sets[1], args.supports[1]);
        case CombineRule::PULLBACK:
            need(1);
            return cs_pullback(args.sets[0], args.map);
        case CombineRule::PRODUCT:
            need(2);
            return cs_product(args.sets[0], args.sets[1]);
    }
    throw std::invalid_argument("cs_combine: unknown rule");
}

ConicSet conormal_of_hypersurface(const Hypersurface& s, const Box& window, int cells_per_axis,
                                  double max_angle_deg) {
    if (!s.phi || !s.grad) throw std::invalid_argument("conormal_of_hypersurface: phi and grad required");
    if (window.dim != s.dim) throw std::invalid_argument("conormal_of_hypersurface: window dimension");
    if (cells_per_axis < 1) throw std::invalid_argument("conormal_of_hypersurface: cells_per_axis >= 1");
    ConicSet out;
    out.dim = s.dim;
    const double max_spread = max_angle_deg * kPi / 180.0;
    std::vector<std::pair<Box, int>> todo;
    for (const auto& c : grid_cells(window, cells_per_axis)) todo.push_back({c, 0});
    while (!todo.empty()) {
        auto [cell, depth] = todo.back();
        todo.pop_back();
        const auto samples = box_samples(cell, 3);
        bool pos = false, neg = false, zero = false;
        for (const auto& x : samples) {
            const double v = s.phi(x);
            pos = pos || v > 0.0;
            neg = neg || v < 0.0;
            zero = zero || v == 0.0;
        }
        const Vec c = samples[samples.size() / 2];
        const Vec gc = s.grad(c);
        double diag = 0.0;
        for (int i = 0; i < s.dim; ++i) diag += cell.width(i) * cell.width(i);
        diag = std::sqrt(diag);
        const double gn = s.dim == 1 ? std::abs(gc[0]) : std::hypot(gc[0], gc[1]);
        const bool hit = (pos && neg) || zero || std::abs(s.phi(c)) <= 0.525 * gn * diag;
        if (!hit) continue;
        if (s.dim == 1) {
            for (const auto& x : samples) {
                if (s.grad(x)[0] == 0.0) throw std::invalid_argument("conormal_of_hypersurface: vanishing gradient");
            }
            out.cells.push_back({cell, Cone::full(1)});
            continue;
        }
        std::vector<double> angles;
        for (const auto& x : samples) {
            const Vec g = s.grad(x);
            if (std::hypot(g[0], g[1]) == 0.0) throw std::invalid_argument("conormal_of_hypersurface: vanishing gradient");
            angles.push_back(std::atan2(g[1], g[0]));
        }
        const Arc h = hull_around(angles[angles.size() / 2], angles);
        if (h.length() > max_spread && depth < 8) {
            const double mx = 0.5 * (cell.lo[0] + cell.hi[0]), my = 0.5 * (cell.lo[1] + cell.hi[1]);
            todo.push_back({Box::rect(cell.lo[0], mx, cell.lo[1], my), depth + 1});
            todo.push_back({Box::rect(mx, cell.hi[0], cell.lo[1], my), depth + 1});
            todo.push_back({Box::rect(cell.lo[0], mx, my, cell.hi[1]), depth + 1});
            todo.push_back({Box::rect(mx, cell.hi[0], my, cell.hi[1]), depth + 1});
            continue;
        }
        const Cone cone = Cone::arc(h.lo, h.hi);
        out.cells.push_back({cell, cone.united(cone.negated())});
    }
    out.canonicalize();
    return out;
}

namespace {

void check_homogeneous(const Symbol& p, int dim, const Box& window) {
    std::vector<Vec> xs = box_samples(window, 3);
    double degree = std::numeric_limits<double>::quiet_NaN();
    for (const auto& x : xs) {
        for (int k = 0; k < (dim == 1 ? 2 : 8); ++k) {
            const double a = dim == 1 ? (k == 0 ? 0.0 : kPi) : kTwoPi * k / 8 + 0.1;
            const Vec e{std::cos(a), dim == 1 ? 0.0 : std::sin(a)};
            const double p1 = p(x, e);
            const double p2 = p(x, Vec{2 * e[0], 2 * e[1]});
            const double p3 = p(x, Vec{3 * e[0], 3 * e[1]});
            if (std::isnan(degree) && std::abs(p1) > 1e-300 && std::abs(p2) > 1e-300) {
                degree = std::log(std::abs(p2 / p1)) / std::log(2.0);
            }
            if (std::isnan(degree)) continue;
            const double s2 = std::pow(2.0, degree), s3 = std::pow(3.0, degree);
            const bool ok2 = std::abs(p2 - s2 * p1) <= 1e-9 * (std::abs(p2) + s2 * std::abs(p1)) + 1e-300;
            const bool ok3 = std::abs(p3 - s3 * p1) <= 1e-9 * (std::abs(p3) + s3 * std::abs(p1)) + 1e-300;
            if (!ok2 || !ok3) throw std::invalid_argument("char_set: symbol is not positively homogeneous in xi");
        }
    }
}

// Characteristic angles of p(x, .) on the circle.
std::vector<double> circle_roots(const Symbol& p, const Vec& x, double tol, bool& everywhere) {
    constexpr int n = 720;
    std::vector<double> g(n);
    double scale = 0.0;
    const auto at = [&](double t) { return p(x, Vec{std::cos(t), std::sin(t)}); };
    for (int i = 0; i < n; ++i) {
        g[i] = at(kTwoPi * i / n);
        scale = std::max(scale, std::abs(g[i]));
    }
    everywhere = scale == 0.0;
    std::vector<double> roots;
    if (everywhere) return roots;
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        double a = kTwoPi * i / n, b = a + kTwoPi / n;
        if (g[i] == 0.0) {
            roots.push_back(a);
        } else if ((g[i] < 0.0) != (g[j] < 0.0) && g[j] != 0.0) {
            double ga = g[i];
            for (int it = 0; it < 60; ++it) {
                const double m = 0.5 * (a + b), gm = at(m);
                if ((gm < 0.0) == (ga < 0.0)) {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            roots.push_back(wrap_angle(0.5 * (a + b)));
        } else {
            const int k = (i + n - 1) % n;
            if (std::abs(g[i]) < std::abs(g[k]) && std::abs(g[i]) < std::abs(g[j]) && (g[k] < 0.0) == (g[i] < 0.0) &&
                (g[j] < 0.0) == (g[i] < 0.0)) {
                // Touching zero without a sign change: golden-section search on |p|.
                const double r = 0.5 * (std::sqrt(5.0) - 1.0);
                double lo = kTwoPi * (i - 1) / n, hi = kTwoPi * (i + 1) / n;
                for (int it = 0; it < 100; ++it) {
                    const double m1 = hi - r * (hi - lo), m2 = lo + r * (hi - lo);
                    if (std::abs(at(m1)) < std::abs(at(m2))) hi = m2;
                    else lo = m1;
                }
                const double t = 0.5 * (lo + hi);
                if (std::abs(at(t)) < tol * scale) roots.push_back(wrap_angle(t));
            }
        }
    }
    return roots;
}

}  // namespace

ConicSet char_set(const Symbol& p, int dim, const Box& window, int cells_per_axis, double tol) {
    if (!p) throw std::invalid_argument("char_set: symbol required");
    if (window.dim != dim) throw std::invalid_argument("char_set: window dimension");
    check_homogeneous(p, dim, window);
    ConicSet out;
    out.dim = dim;
    for (const auto& cell : grid_cells(window, cells_per_axis)) {
        const auto samples = box_samples(cell, 3);
        if (dim == 1) {
            Cone c = Cone::none(1);
            for (int sgn : {1, -1}) {
                bool hit = false, pos = false, neg = false;
                for (const auto& x : samples) {
                    const double v = p(x, Vec{double(sgn), 0.0});
                    const double scale = std::max(std::abs(p(x, Vec{1.0, 0.0})), std::abs(p(x, Vec{-1.0, 0.0})));
                    hit = hit || std::abs(v) <= tol * scale || scale == 0.0;
                    pos = pos || v > 0.0;
                    neg = neg || v < 0.0;
                }
                if (hit || (pos && neg)) c = c.united(sgn > 0 ? Cone::positive() : Cone::negative());
            }
            if (!c.empty()) out.cells.push_back({cell, c});
            continue;
        }
        std::vector<double> roots;
        bool all = false;
        for (const auto& x : samples) {
            bool every = false;
            const auto r = circle_roots(p, x, tol, every);
            all = all || every;
            roots.insert(roots.end(), r.begin(), r.end());
        }
        if (all) {
            out.cells.push_back({cell, Cone::full(2)});
            continue;
        }
        if (roots.empty()) continue;
        // Cluster root angles across the samples into arcs.
        std::sort(roots.begin(), roots.end());
        constexpr double gap = 5.0 * kPi / 180.0;
        std::vector<std::vector<double>> groups{{roots.front()}};
        for (std::size_t i = 1; i < roots.size(); ++i) {
            if (roots[i] - roots[i - 1] > gap) groups.push_back({});
            groups.back().push_back(roots[i]);
        }
        if (groups.size() > 1 && groups.front().front() + kTwoPi - groups.back().back() <= gap) {
            groups.front().insert(groups.front().end(), groups.back().begin(), groups.back().end());
            groups.pop_back();
        }
        Cone c = Cone::none(2);
        for (const auto& g : groups) {
            const Arc h = hull_around(g.front(), g);
            c = c.united(Cone::arc(h.lo, h.hi));
        }
        out.cells.push_back({cell, c});
    }
    out.canonicalize();
    return out;
}

UcpResult ucp_predicates(const ConicSet& w, const ConicSet& conormal) {
    UcpResult r;
    r.holmgren_ok = !cs_intersects(w, conormal);
    r.edge_ok = !cs_intersects(w, w.negated());
    return r;
}

UcpResult ucp_predicates(const ConicSet& w, const Hypersurface& s, const Box& window) {
    return ucp_predicates(w, conormal_of_hypersurface(s, window));
}

namespace {

double spatial_norm(const std::vector<double>& xi) {
    double s = 0.0;
    for (std::size_t i = 1; i < xi.size(); ++i) s += xi[i] * xi[i];
    return std::sqrt(s);
}

// Distance from (t, r), r >= 0, to the planar cone {t >= a r}.
double dist_to_forward(double t, double r, double a) {
    if (t >= a * r) return 0.0;
    const double n = std::hypot(a, 1.0);
    const double ut = a / n, ur = 1.0 / n;
    const double lam = t * ut + r * ur;
    if (lam <= 0.0) return std::hypot(t, r);
    return std::hypot(t - lam * ut, r - lam * ur);
}

}  // namespace

bool ConeModel::in_future(const std::vector<double>& xi) const {
    if (xi.size() != static_cast<std::size_t>(spatial_dim + 1)) throw std::invalid_argument("ConeModel: covector size");
    return xi[0] >= slope * spatial_norm(xi);
}

bool ConeModel::in_past(const std::vector<double>& xi) const {
    if (xi.size() != static_cast<std::size_t>(spatial_dim + 1)) throw std::invalid_argument("ConeModel: covector size");
    return -xi[0] >= slope * spatial_norm(xi);
}

double ConeModel::dist_to_past(const std::vector<double>& xi) const {
    if (xi.size() != static_cast<std::size_t>(spatial_dim + 1)) throw std::invalid_argument("ConeModel: covector size");
    return dist_to_forward(-xi[0], spatial_norm(xi), slope);
}

double SpectrumCone::distance(const std::vector<Covector>& xi) const {
    if (xi.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("SpectrumCone: expected n covectors");
    Covector sum(model.spatial_dim + 1, 0.0);
    for (const auto& c : xi) {
        if (c.size() != sum.size()) throw std::invalid_argument("SpectrumCone: covector size");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += c[i];
    }
    return model.dist_to_past(sum) / std::sqrt(static_cast<double>(n));
}

bool SpectrumCone::in_K_eps(const std::vector<Covector>& xi, double eps) const {
    return distance(xi) <= eps;
}

SpectrumCone spectrum_cone(int n, const ConeModel& model) {
    if (n < 1 || n > 4) throw std::invalid_argument("spectrum_cone: 1 <= n <= 4");
    if (model.spatial_dim < 0 || !(model.slope > 0.0)) throw std::invalid_argument("spectrum_cone: bad cone model");
    return SpectrumCone{n, model};
}

bool rightmost_future_causal(const std::vector<Covector>& xi, const ConeModel& model) {
    for (auto it = xi.rbegin(); it != xi.rend(); ++it) {
        if (std::any_of(it->begin(), it->end(), [](double v) { return v != 0.0; })) return model.in_future(*it);
    }
    return false;
}

ConicSet conic_set_from_wfa(const WfaReport& report, double cell_half_width) {
    if (!(cell_half_width > 0.0)) throw std::invalid_argument("conic_set_from_wfa: cell half-width must be positive");
    ConicSet s;
    s.dim = report.dim;
    const double bin = kTwoPi / static_cast<double>(report.directions.size());
    for (std::size_t b = 0; b < report.base_points.size(); ++b) {
        const auto& p = report.base_points[b];
        const Box base = report.dim == 1
                             ? Box::interval(p[0] - cell_half_width, p[0] + cell_half_width)
                             : Box::rect(p[0] - cell_half_width, p[0] + cell_half_width, p[1] - cell_half_width,
                                         p[1] + cell_half_width);
        Cone c = Cone::none(report.dim);
        for (std::size_t k : report.flagged_directions(b)) {
            const Vec& d = report.directions[k];
            if (report.dim == 1) {
                c = c.united(d[0] > 0.0 ? Cone::positive() : Cone::negative());
            } else {
                const double a = direction_angle(d);
                c = c.united(Cone::arc(a - 0.5 * bin, a + 0.5 * bin));
            }
        }
        if (!c.empty()) s.cells.push_back({base, c});
    }
    s.canonicalize();
    return s;
}

nlohmann::json to_json(const Cone& c) {
    if (c.dim == 1) return nlohmann::json{{"plus", c.plus}, {"minus", c.minus}};
    nlohmann::json arcs = nlohmann::json::array();
    for (const auto& a : c.arcs) arcs.push_back({a.lo, a.hi});
    return nlohmann::json{{"arcs", arcs}};
}

Cone cone_from_json(const nlohmann::json& j, int dim) {
    if (dim == 1) return Cone::sign(j.at("plus").get<bool>(), j.at("minus").get<bool>());
    Cone c = Cone::none(2);
    for (const auto& a : j.at("arcs")) c = c.united(Cone::arc(a.at(0).get<double>(), a.at(1).get<double>()));
    return c;
}

nlohmann::json to_json(const ConicSet& s) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : s.cells) {
        nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array();
        for (int i = 0; i < s.dim; ++i) {
            lo.push_back(c.base.lo[i]);
            hi.push_back(c.base.hi[i]);
        }
        cells.push_back({{"base", {{"lo", lo}, {"hi", hi}}}, {"cone", to_json(c.cone)}});
    }
    return nlohmann::json{{"dim", s.dim}, {"cells", cells}};
}

ConicSet conic_set_from_json(const nlohmann::json& j) {
    ConicSet s;
    s.dim = j.at("dim").get<int>();
    if (s.dim != 1 && s.dim != 2) throw std::invalid_argument("conic set: dim must be 1 or 2");
    for (const auto& c : j.at("cells")) {
        const auto lo = c.at("base").at("lo").get<std::vector<double>>();
        const auto hi = c.at("base").at("hi").get<std::vector<double>>();
        if (lo.size() != static_cast<std::size_t>(s.dim) || hi.size() != lo.size()) {
            throw std::invalid_argument("conic set: base box dimension");
        }
        const Box base = s.dim == 1 ? Box::interval(lo[0], hi[0]) : Box::rect(lo[0], hi[0], lo[1], hi[1]);
        s.cells.push_back({base, cone_from_json(c.at("cone"), s.dim)});
    }
    return s;
}

void write_conic_png(const ConicSet& s, const Box& window, const std::string& path, int width_px,
                     int angle_bins) {
    const int rows = s.dim == 1 ? 2 : angle_bins;
    const int row_px = s.dim == 1 ? 20 : 1;
    RgbImage img(width_px, rows * row_px);
    for (int px = 0; px < width_px; ++px) {
        const double x = window.lo[0] + window.width(0) * (px + 0.5) / width_px;
        for (int r = 0; r < rows; ++r) {
            const double angle = s.dim == 1 ? (r == 0 ? 0.0 : kPi) : kTwoPi * (r + 0.5) / rows;
            bool hit = false;
            for (const auto& c : s.cells) {
                if (x < c.base.lo[0] - kSnap || x > c.base.hi[0] + kSnap) continue;
                if (c.cone.contains_angle(angle)) {
                    hit = true;
                    break;
                }
            }
            if (!hit) continue;
            // Angle 0 (or +) is drawn at the bottom.
            for (int dy = 0; dy < row_px; ++dy) img.set(px, (rows - 1 - r) * row_px + dy, 0, 0, 0);
        }
    }
    write_png(img, path);
}

}  // namespace microlocal
