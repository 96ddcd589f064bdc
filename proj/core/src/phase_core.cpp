#include "microlocal/phase_core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace microlocal {

HLadder make_h_ladder(double h_max, double ratio, int count) {
    if (!(h_max > 0.0) || h_max > 1.0) {
        throw std::invalid_argument("make_h_ladder: h_max must lie in (0, 1]");
    }
    if (!(ratio >= 0.5 && ratio <= 0.95)) {
        throw std::invalid_argument("make_h_ladder: ratio must lie in [0.5, 0.95]");
    }
    if (count < 8) {
        throw std::invalid_argument("make_h_ladder: at least 8 rungs are required");
    }
    HLadder ladder;
    ladder.rungs.reserve(count);
    for (int k = 0; k < count; ++k) {
        ladder.rungs.push_back(h_max * std::pow(ratio, k));
    }
    return ladder;
}

HLadder ladder_from_rungs(std::vector<double> rungs) {
    if (rungs.size() < 8) {
        throw std::invalid_argument("ladder: at least 8 rungs are required");
    }
    for (std::size_t k = 0; k < rungs.size(); ++k) {
        const double h = rungs[k];
        if (!(h > 0.0) || h > 1.0) {
            throw std::invalid_argument("ladder: rung outside (0, 1]");
        }
        if (k > 0) {
            const double q = h / rungs[k - 1];
            if (!(q < 1.0)) throw std::invalid_argument("ladder: rungs must strictly decrease");
            if (q < 0.5 - 1e-12 || q > 0.95 + 1e-12) {
                throw std::invalid_argument("ladder: consecutive ratio outside [0.5, 0.95]");
            }
        }
    }
    return HLadder{std::move(rungs)};
}

HLadder rescale_ladder(const HLadder& ladder, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("rescale_ladder: lambda must be positive");
    std::vector<double> r = ladder.rungs;
    for (double& h : r) h *= lambda;
    return ladder_from_rungs(std::move(r));
}

Box Box::interval(double a, double b) {
    Box box;
    box.dim = 1;
    box.lo = {a, 0.0};
    box.hi = {b, 0.0};
    return box;
}

Box Box::rect(double x0, double x1, double y0, double y1) {
    Box box;
    box.dim = 2;
    box.lo = {x0, y0};
    box.hi = {x1, y1};
    return box;
}

bool Box::contains(const Vec& x, double tol) const {
    for (int i = 0; i < dim; ++i) {
        if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    }
    return true;
}

bool Box::empty() const {
    for (int i = 0; i < dim; ++i) {
        if (!(hi[i] >= lo[i])) return true;
    }
    return false;
}

Box Box::intersect(const Box& other) const {
    Box out = *this;
    for (int i = 0; i < dim; ++i) {
        out.lo[i] = std::max(lo[i], other.lo[i]);
        out.hi[i] = std::min(hi[i], other.hi[i]);
    }
    return out;
}

Box Box::expanded(double r) const {
    Box out = *this;
    for (int i = 0; i < dim; ++i) {
        out.lo[i] -= r;
        out.hi[i] += r;
    }
    return out;
}

SampledFamily zero_family(int dim, const Box& support) {
    SampledFamily f;
    f.dim = dim;
    f.support = support;
    f.eval = [](double, const Vec&) { return cplx{}; };
    f.fbi_exact = [](double, const Vec&, const Vec&) { return cplx{}; };
    f.h_independent = true;
    f.label = "zero";
    return f;
}

std::vector<double> grid_axis(double a, double b, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("grid_axis: step must be positive");
    if (b < a) throw std::invalid_argument("grid_axis: empty interval");
    const double span = b - a;
    auto n = static_cast<long>(std::llround(span / step));
    if (std::abs(n * step - span) > 1e-9 * std::max(1.0, span)) {
        n = static_cast<long>(std::ceil(span / step));
    }
    std::vector<double> out;
    if (n == 0) {
        out.push_back(a);
        return out;
    }
    out.reserve(n + 1);
    for (long i = 0; i <= n; ++i) out.push_back(a + span * static_cast<double>(i) / n);
    return out;
}

SampledFamily with_cache(SampledFamily f, const HLadder& ladder, double step) {
    if (f.dim != 1) throw std::invalid_argument("with_cache: grid caches are one-dimensional");
    if (step <= 0.0) step = std::sqrt(ladder.smallest()) / 4.0;
    auto table = std::make_shared<std::map<double, GridSamples>>();
    const auto xs = grid_axis(f.support.lo[0], f.support.hi[0], step);
    for (double h : ladder.rungs) {
        GridSamples g;
        g.origin = xs.front();
        g.step = xs.size() > 1 ? xs[1] - xs[0] : step;
        g.values.reserve(xs.size());
        for (double x : xs) g.values.push_back(f.eval(h, Vec{x, 0.0}));
        (*table)[h] = std::move(g);
    }
    f.cache = std::move(table);
    return f;
}

const GridSamples* cached_samples(const SampledFamily& f, double h) {
    if (!f.cache) return nullptr;
    auto it = f.cache->find(h);
    return it == f.cache->end() ? nullptr : &it->second;
}

namespace {

Box hull(const Box& a, const Box& b) {
    Box out = a;
    for (int i = 0; i < a.dim; ++i) {
        out.lo[i] = std::min(a.lo[i], b.lo[i]);
        out.hi[i] = std::max(a.hi[i], b.hi[i]);
    }
    return out;
}

}  // namespace

SampledFamily family_sum(const SampledFamily& a, const SampledFamily& b) {
    if (a.dim != b.dim) throw std::invalid_argument("family_sum: dimension mismatch");
    SampledFamily s;
    s.dim = a.dim;
    s.support = hull(a.support, b.support);
    s.eval = [a, b](double h, const Vec& x) {
        cplx v{};
        if (a.support.contains(x)) v += a.eval(h, x);
        if (b.support.contains(x)) v += b.eval(h, x);
        return v;
    };
    if (a.fbi_exact && b.fbi_exact) {
        s.fbi_exact = [a, b](double h, const Vec& x, const Vec& xi) {
            return a.fbi_exact(h, x, xi) + b.fbi_exact(h, x, xi);
        };
    }
    s.xi_extent = std::max(a.xi_extent, b.xi_extent);
    s.sharpness = std::max(a.sharpness, b.sharpness);
    s.breakpoints = a.breakpoints;
    s.breakpoints.insert(s.breakpoints.end(), b.breakpoints.begin(), b.breakpoints.end());
    s.atoms = a.atoms;
    s.atoms.insert(s.atoms.end(), b.atoms.begin(), b.atoms.end());
    s.h_independent = a.h_independent && b.h_independent;
    s.label = a.label + "+" + b.label;
    return s;
}

SampledFamily family_product(const SampledFamily& a, const SampledFamily& b) {
    if (a.dim != b.dim) throw std::invalid_argument("family_product: dimension mismatch");
    SampledFamily p;
    p.dim = a.dim;
    p.support = a.support.intersect(b.support);
    if (p.support.empty()) throw std::invalid_argument("family_product: disjoint supports");
    p.eval = [a, b](double h, const Vec& x) { return a.eval(h, x) * b.eval(h, x); };
    p.xi_extent = a.xi_extent + b.xi_extent;
    p.sharpness = std::hypot(a.sharpness, b.sharpness);
    p.breakpoints = a.breakpoints;
    p.breakpoints.insert(p.breakpoints.end(), b.breakpoints.begin(), b.breakpoints.end());
    if (!a.atoms.empty() && !b.atoms.empty()) {
        throw std::invalid_argument("family_product: product of two measures");
    }
    if (!a.atoms.empty() || !b.atoms.empty()) {
        // An atom times a smooth factor is an atom weighted by the factor's value; h-dependence
        // of that factor is resolved at evaluation time, so only h-independent factors qualify.
        const SampledFamily& m = a.atoms.empty() ? b : a;
        const SampledFamily& g = a.atoms.empty() ? a : b;
        if (!g.h_independent) throw std::invalid_argument("family_product: atom times h-dependent family");
        for (const auto& [pos, w] : m.atoms) {
            if (g.support.contains(Vec{pos, 0.0})) p.atoms.emplace_back(pos, w * g.eval(1.0, Vec{pos, 0.0}));
        }
    }
    p.h_independent = a.h_independent && b.h_independent;
    p.label = a.label + "*" + b.label;
    return p;
}

SampledFamily family_scale(const SampledFamily& f, cplx c) {
    SampledFamily s = f;
    s.cache.reset();
    s.eval = [f, c](double h, const Vec& x) { return c * f.eval(h, x); };
    for (auto& atom : s.atoms) atom.second *= c;
    if (f.fbi_exact) {
        s.fbi_exact = [f, c](double h, const Vec& x, const Vec& xi) {
            return c * f.fbi_exact(h, x, xi);
        };
    }
    return s;
}

SampledFamily family_conj(const SampledFamily& f) {
    SampledFamily s = f;
    s.cache.reset();
    s.eval = [f](double h, const Vec& x) { return std::conj(f.eval(h, x)); };
    for (auto& atom : s.atoms) atom.second = std::conj(atom.second);
    if (f.fbi_exact) {
        // T(conj f)(x, xi) = conj(T f(x, -xi)).
        s.fbi_exact = [f](double h, const Vec& x, const Vec& xi) {
            return std::conj(f.fbi_exact(h, x, Vec{-xi[0], -xi[1]}));
        };
    }
    s.label = "conj(" + f.label + ")";
    return s;
}

SampledFamily family_shift(const SampledFamily& f, const Vec& a) {
    SampledFamily s = f;
    s.cache.reset();
    for (int i = 0; i < f.dim; ++i) {
        s.support.lo[i] += a[i];
        s.support.hi[i] += a[i];
    }
    for (double& b : s.breakpoints) b += a[0];
    for (auto& atom : s.atoms) atom.first += a[0];
    s.eval = [f, a](double h, const Vec& x) { return f.eval(h, Vec{x[0] - a[0], x[1] - a[1]}); };
    if (f.fbi_exact) {
        s.fbi_exact = [f, a](double h, const Vec& x, const Vec& xi) {
            return f.fbi_exact(h, Vec{x[0] - a[0], x[1] - a[1]}, xi);
        };
    }
    return s;
}

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::EXP_SMALL: return "EXP_SMALL";
        case Verdict::NOT_EXP_SMALL: return "NOT_EXP_SMALL";
        case Verdict::INCONCLUSIVE: return "INCONCLUSIVE";
    }
    return "INCONCLUSIVE";
}

Verdict verdict_from_string(const std::string& s) {
    if (s == "EXP_SMALL") return Verdict::EXP_SMALL;
    if (s == "NOT_EXP_SMALL") return Verdict::NOT_EXP_SMALL;
    if (s == "INCONCLUSIVE") return Verdict::INCONCLUSIVE;
    throw std::invalid_argument("unknown verdict: " + s);
}

namespace {

struct LsqResult {
    Eigen::VectorXd coef;
    double sse = 0.0;
    double r2 = 1.0;
};

LsqResult least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
    // Column scaling keeps the 1/h and log h columns comparable.
    Eigen::VectorXd scale(a.cols());
    Eigen::MatrixXd as = a;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const double n = a.col(j).norm();
        scale(j) = n > 0.0 ? n : 1.0;
        as.col(j) /= scale(j);
    }
    LsqResult r;
    r.coef = as.colPivHouseholderQr().solve(y);
    for (Eigen::Index j = 0; j < a.cols(); ++j) r.coef(j) /= scale(j);
    const Eigen::VectorXd res = y - a * r.coef;
    r.sse = res.squaredNorm();
    const double mean = y.mean();
    const double sst = (y.array() - mean).square().sum();
    r.r2 = sst > 0.0 ? 1.0 - r.sse / sst : 1.0;
    if (sst > 0.0 && r.sse <= 1e-24 * sst) r.r2 = 1.0;
    return r;
}

}  // namespace

DecayFit fit_decay(std::span<const DecaySample> samples, const DecayThresholds& thr) {
    if (samples.size() < 8) throw std::invalid_argument("fit_decay: at least 8 samples required");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!(s.h > 0.0) || !std::isfinite(s.h)) {
            throw std::invalid_argument("fit_decay: h must be positive and finite");
        }
        if (!std::isfinite(s.magnitude) || s.magnitude < 0.0) {
            throw std::invalid_argument("fit_decay: magnitudes must be finite and non-negative");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (samples[j].h == s.h) throw std::invalid_argument("fit_decay: duplicate h");
        }
    }

    std::vector<DecaySample> pts(samples.begin(), samples.end());
    std::sort(pts.begin(), pts.end(),
              [](const DecaySample& a, const DecaySample& b) { return a.h > b.h; });

    DecayFit fit;
    double max_m = 0.0;
    std::size_t i_max = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].magnitude > max_m) {
            max_m = pts[i].magnitude;
            i_max = i;
        }
    }

    auto threshold = [&](const DecaySample& s) { return std::max(100.0 * kEps * max_m, s.floor); };

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].magnitude > 0.0 && pts[i].magnitude > threshold(pts[i])) keep.push_back(i);
    }

    if (keep.empty()) {
        // Identically zero, or nothing above the noise floor at any scale.
        fit.delta_hat = std::numeric_limits<double>::infinity();
        fit.log_c_hat = max_m > 0.0 ? std::log(max_m) : -std::numeric_limits<double>::infinity();
        fit.r_squared = 1.0;
        fit.verdict = Verdict::EXP_SMALL;
        fit.underflow_envelope = true;
        return fit;
    }

    if (keep.size() < 5) {
        fit.underflow_envelope = true;
        fit.rungs_used = static_cast<int>(keep.size());
        fit.r_squared = 1.0;
        fit.log_c_hat = std::log(max_m);
        std::size_t i_u = pts.size();
        for (std::size_t i = i_max + 1; i < pts.size(); ++i) {
            if (!(pts[i].magnitude > threshold(pts[i]))) {
                i_u = i;
                break;
            }
        }
        if (i_u == pts.size()) {
            fit.verdict = Verdict::INCONCLUSIVE;
            return fit;
        }
        const double thr_u = threshold(pts[i_u]);
        const double span = 1.0 / pts[i_u].h - 1.0 / pts[i_max].h;
        fit.delta_hat = std::max(0.0, std::log(max_m / thr_u) / span);
        fit.verdict = fit.delta_hat >= thr.delta_min ? Verdict::EXP_SMALL : Verdict::INCONCLUSIVE;
        return fit;
    }

    const auto n = static_cast<Eigen::Index>(keep.size());
    Eigen::VectorXd y(n), ones(n), logh(n), invh(n), invsqrt(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& s = pts[keep[k]];
        y(k) = std::log(s.magnitude);
        ones(k) = 1.0;
        logh(k) = std::log(s.h);
        invh(k) = -1.0 / s.h;
        invsqrt(k) = -1.0 / std::sqrt(s.h);
    }

    Eigen::MatrixXd a3(n, 3), as(n, 3), a2(n, 2), ap(n, 2);
    a3 << ones, logh, invh;
    as << ones, logh, invsqrt;
    a2 << ones, invh;
    ap << ones, logh;

    const LsqResult e3 = least_squares(a3, y);
    const LsqResult st = least_squares(as, y);
    const LsqResult e2 = least_squares(a2, y);
    const LsqResult po = least_squares(ap, y);

    fit.rungs_used = static_cast<int>(n);
    fit.log_c_hat = e3.coef(0);
    fit.prefactor_power = e3.coef(1);
    fit.delta_hat = std::max(0.0, e3.coef(2));
    fit.r_squared = e3.r2;
    fit.r2_exp2 = e2.r2;
    fit.r2_poly = po.r2;
    fit.sse_exp = e3.sse;
    fit.sse_stretched = st.sse;

    const double sst = (y.array() - y.mean()).square().sum();
    const bool sub_exponential = st.sse < e3.sse && (e3.sse - st.sse) > 1e-12 * (1.0 + sst);

    if (fit.delta_hat >= thr.delta_min && fit.r_squared >= thr.rho_min && !sub_exponential) {
        fit.verdict = Verdict::EXP_SMALL;
    } else if (fit.delta_hat < 0.5 * thr.delta_min && fit.r2_poly >= fit.r2_exp2) {
        fit.verdict = Verdict::NOT_EXP_SMALL;
    } else {
        fit.verdict = Verdict::INCONCLUSIVE;
    }
    return fit;
}

DecayFit fit_decay(const std::vector<double>& h, const std::vector<double>& magnitude,
                   const DecayThresholds& thresholds) {
    if (h.size() != magnitude.size()) throw std::invalid_argument("fit_decay: size mismatch");
    std::vector<DecaySample> s(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) s[i] = {h[i], magnitude[i], 0.0};
    return fit_decay(std::span<const DecaySample>(s), thresholds);
}

double weighted_sup(const SampledFamily& f, double h, const Box& region, int weight_power,
                    double step) {
    if (region.empty() || region.dim != f.dim) {
        throw std::invalid_argument("weighted_sup: empty or mismatched region");
    }
    if (weight_power < 0) throw std::invalid_argument("weighted_sup: weight power must be >= 0");
    for (int i = 0; i < f.dim; ++i) {
        if (region.lo[i] < f.support.lo[i] - 1e-12 || region.hi[i] > f.support.hi[i] + 1e-12) {
            throw std::invalid_argument("weighted_sup: region must lie inside the support box");
        }
    }
    if (step <= 0.0) {
        const GridSamples* g = f.dim == 1 ? cached_samples(f, h) : nullptr;
        step = g ? g->step : std::sqrt(h) / 4.0;
    }
    const auto xs = grid_axis(region.lo[0], region.hi[0], step);
    const auto ys = f.dim == 2 ? grid_axis(region.lo[1], region.hi[1], step)
                               : std::vector<double>{0.0};
    double best = 0.0;
    for (double x : xs) {
        for (double y : ys) {
            const double r2 = x * x + (f.dim == 2 ? y * y : 0.0);
            const double w = std::pow(1.0 + r2, weight_power);
            best = std::max(best, w * std::abs(f.eval(h, Vec{x, y})));
        }
    }
    return best;
}

}  // namespace microlocal
