#include "microlocal/analytic_wf.hpp"

#include "microlocal/io.hpp"
#include "microlocal/parallel.hpp"
#include "microlocal/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace microlocal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SampledFamily h_independent(Box support, std::function<cplx(double)> f, std::string label) {
    SampledFamily s;
    s.dim = 1;
    s.support = support;
    s.eval = [f = std::move(f)](double, const Vec& x) { return f(x[0]); };
    s.h_independent = true;
    s.label = std::move(label);
    return s;
}

// int_0^inf e^{-sqrt m} e^{-(hm + eta)^2/2h} e^{-imt} dm
cplx spectral_bv_fbi_integral(double h, double t, double eta) {
    const auto g = [&](double m) {
        const double q = h * m + eta;
        return std::exp(-std::sqrt(m) - q * q / (2.0 * h)) * std::polar(1.0, -m * t);
    };
    // m = s^2 removes the square-root cusp at 0.
    cplx acc = quad::integrate<cplx>(quad::composite_gl(0.0, 1.0, 0.25),
                                     [&](double s) { return 2.0 * s * g(s * s); });
    const double m_hi = std::max(1.0, -eta / h) + 12.0 / std::sqrt(h);
    const double width = std::min({1.0, 2.0 / std::max(1.0, std::abs(t)), 0.5 / std::sqrt(h)});
    acc += quad::integrate<cplx>(quad::composite_gl(1.0, m_hi, width), g);
    return acc;
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Geometric rate of b_k from log env_k = a + k log rho + p log k over the orders
// clearly above the noise plateau; the log k term absorbs algebraic prefactors.
// Returns false when too few orders are informative.
bool envelope_rate(const std::vector<double>& b, int k_first, double noise, double& log_rho,
                   int& k_last) {
    const int n = static_cast<int>(b.size());
    if (n < 8) return false;
    std::vector<double> env(n, 0.0);
    double run = 0.0;
    for (int k = n - 1; k >= 0; --k) {
        run = std::max(run, b[k]);
        env[k] = run;
    }
    // The median of the last quarter estimates the noise plateau.
    std::vector<double> last(b.begin() + 3 * n / 4, b.end());
    std::nth_element(last.begin(), last.begin() + last.size() / 2, last.end());
    const double cut = std::max(noise, 30.0 * last[last.size() / 2]);
    k_last = k_first - 1;
    for (int k = k_first; k < n; ++k) {
        if (env[k] > cut) k_last = k;
    }
    if (k_last - k_first + 1 < 6) return false;
    const int m = k_last - k_first + 1;
    Eigen::MatrixXd a(m, 3);
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        const double k = k_first + i;
        a(i, 0) = 1.0;
        a(i, 1) = k;
        a(i, 2) = std::log(k);
        y(i) = std::log(env[k_first + i]);
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
    log_rho = c(1);
    return true;
}

}  // namespace

SampledFamily point_mass(double x0, cplx weight) {
    SampledFamily s = h_independent(Box::interval(x0, x0), [](double) { return cplx{}; },
                                    "delta");
    s.atoms.emplace_back(x0, weight);
    return s;
}

SampledFamily heaviside_family(double length) {
    if (!(length > 0.0)) throw std::invalid_argument("heaviside_family: length must be positive");
    SampledFamily s = h_independent(Box::interval(0.0, length), [](double) { return cplx{1.0}; },
                                    "heaviside");
    s.breakpoints = {0.0, length};
    return s;
}

SampledFamily nonanalytic_bump() {
    SampledFamily s = h_independent(
        Box::interval(-1.0, 1.0),
        [](double x) {
            const double q = 1.0 - x * x;
            return q > 0.0 ? cplx{std::exp(-1.0 / q)} : cplx{};
        },
        "bump");
    s.breakpoints = {-1.0, 1.0};
    return s;
}

SampledFamily gaussian_function(double half_width) {
    return h_independent(Box::interval(-half_width, half_width),
                         [](double x) { return cplx{std::exp(-0.5 * x * x)}; }, "gaussian");
}

cplx spectral_boundary_value_at(double t) {
    if (t == 0.0) return 2.0;
    // m = -i sgn(t) r, then r = s^2: u = -i sgn(t) int 2s e^{-s^2 |t|} e^{-s sqrt(-i sgn t)} ds.
    const double sg = t > 0.0 ? 1.0 : -1.0;
    const double at = std::abs(t);
    const cplx root = std::sqrt(cplx{0.0, -sg});
    const double s_hi = std::min(90.0, std::sqrt(50.0 / at) + 1.0);
    const double width = std::min(1.0, s_hi / 8.0);
    const cplx acc = quad::integrate<cplx>(quad::composite_gl(0.0, s_hi, width), [&](double s) {
        return 2.0 * s * std::exp(-s * s * at - s * root);
    });
    return cplx{0.0, -sg} * acc;
}

SampledFamily spectral_boundary_value(double half_width) {
    SampledFamily s = h_independent(Box::interval(-half_width, half_width),
                                    spectral_boundary_value_at, "spectral_bv");
    s.breakpoints = {0.0};
    s.fbi_exact = [](double h, const Vec& x, const Vec& xi) {
        return fbi_alpha(h, 1) * std::sqrt(2.0 * kPi * h) * spectral_bv_fbi_integral(h, x[0], xi[0]);
    };
    return s;
}

std::vector<std::size_t> WfaReport::flagged_directions(std::size_t b) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < directions.size(); ++k) {
        if (flagged(b, k)) out.push_back(k);
    }
    return out;
}

HLadder wfa_ladder() { return make_h_ladder(0.1, 0.8, 16); }

std::vector<Vec> directions_1d() { return {Vec{1.0, 0.0}, Vec{-1.0, 0.0}}; }

std::vector<Vec> directions_2d(int n) {
    if (n < 4) throw std::invalid_argument("directions_2d: need at least 4 directions");
    std::vector<Vec> out;
    for (int k = 0; k < n; ++k) {
        const double a = 2.0 * kPi * k / n;
        out.push_back(Vec{std::cos(a), std::sin(a)});
    }
    return out;
}

double direction_angle(const Vec& v) { return std::atan2(v[1], v[0]); }

WfaReport wfa_detect(const SampledFamily& u, const std::vector<Vec>& base_points,
                     const std::vector<Vec>& directions, const HLadder& ladder,
                     const WfaOptions& options) {
    if (base_points.empty() || directions.empty()) throw std::invalid_argument("wfa_detect: nothing to scan");
    if (!(options.collar > 0.0)) throw std::invalid_argument("wfa_detect: collar must be positive");
    const int d = u.dim;
    for (const auto& v : directions) {
        const double n = d == 1 ? std::abs(v[0]) : std::hypot(v[0], v[1]);
        if (std::abs(n - 1.0) > 1e-12) throw std::invalid_argument("wfa_detect: directions must be unit vectors");
    }

    SampledFamily f = u;
    if (options.apply_cutoff && !u.has_exact_fbi()) {
        Vec lo{kInf, kInf}, hi{-kInf, -kInf};
        for (const auto& p : base_points) {
            for (int a = 0; a < d; ++a) {
                lo[a] = std::min(lo[a], p[a]);
                hi[a] = std::max(hi[a], p[a]);
            }
        }
        const double c = options.collar;
        SampledFamily chi;
        chi.dim = d;
        chi.support = d == 1 ? Box::interval(lo[0] - 2 * c, hi[0] + 2 * c)
                             : Box::rect(lo[0] - 2 * c, hi[0] + 2 * c, lo[1] - 2 * c, hi[1] + 2 * c);
        chi.eval = [lo, hi, c, d](double, const Vec& x) {
            double v = 1.0;
            for (int a = 0; a < d; ++a) v *= plateau(x[a], lo[a] - c, hi[a] + c, c);
            return cplx{v};
        };
        chi.h_independent = true;
        chi.label = "cutoff";
        if (d == 1) chi.breakpoints = {lo[0] - 2 * c, lo[0] - c, hi[0] + c, hi[0] + 2 * c};
        f = family_product(u, chi);
        f.sharpness = u.sharpness;
    }

    WfaReport rep;
    rep.dim = d;
    rep.ladder = ladder;
    rep.base_points = base_points;
    rep.directions = directions;
    const std::size_t nb = base_points.size(), nd = directions.size();
    std::vector<PhasePoint> pts(nb * nd);
    for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t k = 0; k < nd; ++k) pts[b * nd + k] = PhasePoint{base_points[b], directions[k]};
    }
    std::vector<std::vector<DecaySample>> samples(pts.size());
    for (std::size_t r = 0; r < ladder.size(); ++r) {
        const double h = ladder[r];
        const double floor = fbi_noise_floor(f, h);
        std::vector<double> mag(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) { mag[i] = std::abs(fbi_point(f, h, pts[i])); });
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double w = 0.0;
            for (int n : options.scan.weight_powers) {
                double r2 = 0.0;
                for (int a = 0; a < d; ++a) r2 += pts[i].x[a] * pts[i].x[a] + pts[i].xi[a] * pts[i].xi[a];
                w = std::max(w, std::pow(1.0 + r2, n));
            }
            samples[i].push_back({h, w * mag[i], w * floor});
        }
    }
    rep.fits.resize(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { rep.fits[i] = fit_decay(samples[i], options.scan.thresholds); });
    const auto inconclusive = std::count_if(rep.fits.begin(), rep.fits.end(), [](const DecayFit& f) {
        return f.verdict == Verdict::INCONCLUSIVE;
    });
    rep.quality_low = static_cast<double>(inconclusive) > options.scan.inconclusive_limit * pts.size();
    return rep;
}

void write_wfa_csv(const WfaReport& report, std::ostream& os) {
    os << (report.dim == 1 ? "x,angle,delta_hat,r_squared,verdict\n"
                           : "x,y,angle,delta_hat,r_squared,verdict\n");
    os.precision(17);
    for (std::size_t b = 0; b < report.base_points.size(); ++b) {
        for (std::size_t k = 0; k < report.directions.size(); ++k) {
            const auto& f = report.fit(b, k);
            os << report.base_points[b][0] << ',';
            if (report.dim == 2) os << report.base_points[b][1] << ',';
            os << direction_angle(report.directions[k]) << ',' << f.delta_hat << ',' << f.r_squared
               << ',' << to_string(f.verdict) << '\n';
        }
    }
}

void write_wfa_polar_png(const WfaReport& report, std::size_t base, const std::string& path,
                         int size_px) {
    if (base >= report.base_points.size()) throw std::out_of_range("write_wfa_polar_png: base index");
    RgbImage img(size_px, size_px);
    const double c = 0.5 * (size_px - 1);
    const double rad = 0.45 * size_px;
    for (int i = 0; i < 4 * size_px; ++i) {
        const double a = 2.0 * kPi * i / (4.0 * size_px);
        img.set(static_cast<int>(std::lround(c + rad * std::cos(a))),
                static_cast<int>(std::lround(c - rad * std::sin(a))), 0, 0, 0);
    }
    for (std::size_t k = 0; k < report.directions.size(); ++k) {
        const bool flag = report.flagged(base, k);
        const double a = direction_angle(report.directions[k]);
        for (int s = 0; s <= static_cast<int>(rad); ++s) {
            const int x = static_cast<int>(std::lround(c + s * std::cos(a)));
            const int y = static_cast<int>(std::lround(c - s * std::sin(a)));
            if (flag) img.set(x, y, 220, 30, 30);
            else if (s > 0.85 * rad) img.set(x, y, 160, 160, 160);
        }
    }
    write_png(img, path);
}

cplx sech_kernel(cplx z) { return 0.25 / std::cosh(0.5 * kPi * z); }

cplx sech_decompose(const SampledFamily& u, cplx z) {
    if (u.dim != 1) throw std::invalid_argument("sech_decompose: d = 1 only");
    if (!(std::abs(z.imag()) < 1.0)) throw std::invalid_argument("sech_decompose: |Im z| must be < 1");
    cplx acc{};
    for (const auto& [pos, w] : u.atoms) acc += w * sech_kernel(z - pos);
    const double x0 = z.real();
    const double w = 1.0 - std::abs(z.imag());
    const double a = std::max(x0 - 30.0, u.support.lo[0]);
    const double b = std::min(x0 + 30.0, u.support.hi[0]);
    if (!(b > a)) return acc;
    // x = x0 + w sinh t clusters nodes under the nearby kernel pole.
    const auto tmap = [&](double x) { return std::asinh((x - x0) / w); };
    std::vector<double> tb;
    for (double p : u.breakpoints) {
        if (p > a && p < b) tb.push_back(tmap(p));
    }
    const auto rule = quad::composite_gl(tmap(a), tmap(b), 0.5, tb);
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
        const double t = rule.x[i];
        const double x = x0 + w * std::sinh(t);
        acc += rule.w[i] * w * std::cosh(t) * sech_kernel(z - x) * u.eval(1.0, Vec{x, 0.0});
    }
    return acc;
}

cplx sech_reconstruct(const SampledFamily& u, double x, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("sech_reconstruct: eps in (0, 1)");
    const auto v = [&](double e) {
        return sech_decompose(u, cplx{x, 1.0 - e}) + sech_decompose(u, cplx{x, -1.0 + e});
    };
    const cplx v1 = v(eps), v2 = v(0.5 * eps), v4 = v(0.25 * eps);
    // Richardson in eps: remove the linear and quadratic terms.
    const cplx r12 = 2.0 * v2 - v1, r24 = 2.0 * v4 - v2;
    return (4.0 * r24 - r12) / 3.0;
}

std::string to_string(RadiusTag t) {
    switch (t) {
        case RadiusTag::CONVERGED: return "CONVERGED";
        case RadiusTag::ENTIRE_LIKE: return "ENTIRE_LIKE";
        case RadiusTag::ZERO_TREND: return "ZERO_TREND";
        case RadiusTag::UNSTABLE: return "UNSTABLE";
    }
    return "UNSTABLE";
}

RadiusEstimate analyticity_radius(const std::function<cplx(cplx)>& f, cplx center, double r,
                                  int k_max) {
    if (!(r > 0.0) || k_max < 8) throw std::invalid_argument("analyticity_radius: bad circle");
    const int n = 2 * k_max;
    std::vector<cplx> vals(n);
    parallel_for(n, [&](std::size_t j) { vals[j] = f(center + std::polar(r, 2.0 * kPi * j / n)); });
    RadiusEstimate est;
    est.order = k_max;
    std::vector<double> scaled(k_max + 1);
    double top = 0.0;
    for (int k = 0; k <= k_max; ++k) {
        cplx c{};
        for (int j = 0; j < n; ++j) c += vals[j] * std::polar(1.0, -2.0 * kPi * k * j / n);
        scaled[k] = std::abs(c) / n;
        top = std::max(top, scaled[k]);
        est.coefficients.push_back(scaled[k] / std::pow(r, k));
    }
    if (top == 0.0) {
        est.radius = kInf;
        est.tag = RadiusTag::ENTIRE_LIKE;
        return est;
    }
    double slope = 0.0;
    int k_last = 0;
    if (!envelope_rate(scaled, 2, 1e-13 * top, slope, k_last)) {
        est.radius = kInf;
        est.tag = RadiusTag::ENTIRE_LIKE;
        return est;
    }
    est.order = k_last;
    est.radius = r * std::exp(-slope);
    est.tag = est.radius > 10.0 * r ? RadiusTag::ENTIRE_LIKE : RadiusTag::CONVERGED;
    if (est.tag == RadiusTag::ENTIRE_LIKE) est.radius = kInf;
    return est;
}

RadiusEstimate analyticity_radius_real(const std::function<double(double)>& f, double center,
                                       int k_max) {
    if (k_max < 2) throw std::invalid_argument("analyticity_radius_real: k_max >= 2");
    constexpr int kLevels = 6;
    std::vector<double> a{std::abs(f(center))};
    double fact = 1.0, ref = a[0];
    int k_star = 0;
    for (int k = 1; k <= k_max; ++k) {
        fact *= k;
        // D_k(s) = s^{-k} sum_j (-1)^j C(k,j) f(c + (k/2 - j) s) = f^(k)(c) + O(s^2),
        // extrapolated over s0 / 2^l.
        const auto diff = [&](double s) {
            double acc = 0.0, binom = 1.0;
            for (int j = 0; j <= k; ++j) {
                acc += (j % 2 ? -1.0 : 1.0) * binom * f(center + (0.5 * k - j) * s);
                binom = binom * (k - j) / (j + 1);
            }
            return acc / std::pow(s, k);
        };
        const double s0 = std::min(0.5, 1.0 / k);
        std::vector<std::vector<double>> t(kLevels, std::vector<double>(kLevels, 0.0));
        double best = 0.0, err = kInf;
        for (int l = 0; l < kLevels; ++l) {
            t[l][0] = diff(s0 / std::pow(2.0, l));
            for (int m = 1; m <= l; ++m) {
                t[l][m] = t[l][m - 1] + (t[l][m - 1] - t[l - 1][m - 1]) / (std::pow(4.0, m) - 1.0);
            }
            if (l > 0 && std::abs(t[l][l] - t[l - 1][l - 1]) < err) {
                err = std::abs(t[l][l] - t[l - 1][l - 1]);
                best = t[l][l];
            }
        }
        const double ak = std::abs(best) / fact, ek = err / fact;
        if (ek <= 0.05 * ak) {
            a.push_back(ak);
            ref = std::max(ref, ak);
        } else if (ak <= 3.0 * ek && ek < 1e-7 * ref) {
            // Consistent with zero at a precision far below the coefficient scale.
            a.push_back(0.0);
        } else {
            break;
        }
        k_star = k;
    }
    RadiusEstimate est = analyticity_radius_from_coefficients(a);
    if (k_star < k_max && est.tag == RadiusTag::CONVERGED) est.tag = RadiusTag::UNSTABLE;
    return est;
}

RadiusEstimate analyticity_radius_from_coefficients(const std::vector<double>& a) {
    RadiusEstimate est;
    for (double v : a) est.coefficients.push_back(std::abs(v));
    est.order = static_cast<int>(a.size()) - 1;
    std::vector<int> ks;
    std::vector<double> roots;
    for (int k = 1; k < static_cast<int>(a.size()); ++k) {
        if (std::abs(a[k]) > 0.0) {
            ks.push_back(k);
            roots.push_back(std::pow(std::abs(a[k]), 1.0 / k));
        }
    }
    if (ks.empty()) {
        est.radius = kInf;
        est.tag = RadiusTag::ENTIRE_LIKE;
        return est;
    }
    const std::size_t tail = std::min<std::size_t>(4, roots.size());
    bool increasing = roots.size() >= 4;
    for (std::size_t i = roots.size() - tail + 1; increasing && i < roots.size(); ++i) {
        increasing = roots[i] > roots[i - 1];
    }
    if (increasing) {
        std::vector<double> lk, lr;
        for (std::size_t i = 0; i < roots.size(); ++i) {
            lk.push_back(std::log(static_cast<double>(ks[i])));
            lr.push_back(std::log(roots[i]));
        }
        // Root-test values growing like a power of k: no finite radius.
        if (least_squares_slope(std::vector<double>(lk.end() - tail, lk.end()),
                                std::vector<double>(lr.end() - tail, lr.end())) > 0.25) {
            est.radius = 1.0 / roots.back();
            est.tag = RadiusTag::ZERO_TREND;
            return est;
        }
    }
    std::vector<double> b(est.coefficients);
    const double top = *std::max_element(b.begin(), b.end());
    double slope = 0.0;
    int k_last = 0;
    if (!envelope_rate(b, 1, 1e-14 * top, slope, k_last)) {
        est.radius = 1.0 / roots.back();
        est.tag = RadiusTag::UNSTABLE;
        return est;
    }
    est.radius = std::exp(-slope);
    est.tag = RadiusTag::CONVERGED;
    if (est.radius > 1e3) {
        est.radius = kInf;
        est.tag = RadiusTag::ENTIRE_LIKE;
    }
    return est;
}

std::string to_string(Side s) {
    switch (s) {
        case Side::NONE: return "NONE";
        case Side::UPPER: return "UPPER";
        case Side::LOWER: return "LOWER";
        case Side::BOTH: return "BOTH";
    }
    return "BOTH";
}

namespace {

Side side_of(bool upper, bool lower) {
    if (upper && lower) return Side::BOTH;
    if (upper) return Side::UPPER;
    if (lower) return Side::LOWER;
    return Side::NONE;
}

constexpr double kProbeHeight = 0.6;
constexpr double kProbeRadius = 0.3;
constexpr double kSingularRadius = 0.5;

}  // namespace

OneSidedResult one_sided_check(const SampledFamily& u, double x0, const HLadder& ladder,
                               const WfaOptions& options) {
    if (u.dim != 1) throw std::invalid_argument("one_sided_check: d = 1 only");
    OneSidedResult res;
    const auto rep = wfa_detect(u, {Vec{x0, 0.0}}, directions_1d(), ladder, options);
    res.fit_plus = rep.fit(0, 0);
    res.fit_minus = rep.fit(0, 1);
    res.fbi_side = side_of(res.fit_plus.flagged(), res.fit_minus.flagged());

    const auto ku = [&u](cplx z) { return sech_decompose(u, z); };
    const auto upper = analyticity_radius(ku, cplx{x0, kProbeHeight}, kProbeRadius);
    const auto lower = analyticity_radius(ku, cplx{x0, -kProbeHeight}, kProbeRadius);
    res.radius_upper_half = upper.radius;
    res.radius_lower_half = lower.radius;
    // A singularity at x0 + i belongs to xi < 0, one at x0 - i to xi > 0.
    res.sech_side = side_of(lower.radius < kSingularRadius, upper.radius < kSingularRadius);

    if (res.fbi_side == res.sech_side) {
        res.side = res.fbi_side;
    } else {
        res.side = Side::BOTH;
        res.disagree = true;
    }
    return res;
}

}  // namespace microlocal
