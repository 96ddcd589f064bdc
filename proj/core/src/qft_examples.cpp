#include "microlocal/qft_examples.hpp"

#include "microlocal/parallel.hpp"
#include "microlocal/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>

namespace microlocal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEulerGamma = 0.57721566490153286061;
constexpr cplx kI{0.0, 1.0};

double log_sum_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// int exp(logf(m) - shift) dm on [lo, hi] by adaptive Gauss-Kronrod; err receives its estimate.
double scaled_integral(const std::function<double(double)>& logf, double lo, double hi, double shift, double* err) {
    return quad::integrate_gk(
        [&](double m) {
            const double v = logf(m);
            return v == -kInf ? 0.0 : std::exp(v - shift);
        },
        lo, hi, 1e-13, err);
}

struct DensityMoment {
    double log_value = -kInf;
    bool ok = true;
};

DensityMoment density_log_moment(const SpectralMeasure& rho, int k) {
    if (rho.density == DensityKind::NONE) return {};
    std::function<double(double)> logf;
    double lo = rho.m0, hi = 0.0, peak = 0.0;
    if (rho.density == DensityKind::EXP_ALPHA) {
        const double a = rho.alpha;
        logf = [k, a](double m) { return m > 0.0 ? k * std::log(m) - std::pow(m, a) : (k == 0 ? 0.0 : -kInf); };
        const double m_star = std::max(rho.m0, std::pow(k / a, 1.0 / a));
        peak = logf(m_star);
        // Integrand is unimodal: bracket the region within e^{-60} of the peak.
        hi = std::max(2.0 * m_star, 1.0);
        while (logf(hi) > peak - 60.0) hi *= 2.0;
        if (m_star > rho.m0 && logf(rho.m0) < peak - 60.0) {
            double a0 = rho.m0, b0 = m_star;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (a0 + b0);
                (logf(mid) < peak - 60.0 ? a0 : b0) = mid;
            }
            lo = a0;
        }
    } else {
        const auto f = rho.custom;
        logf = [k, f](double m) {
            const double s = f(m);
            if (!(s > 0.0)) return -kInf;
            return (m > 0.0 ? k * std::log(m) : (k == 0 ? 0.0 : -kInf)) + std::log(s);
        };
        hi = rho.custom_m_max;
        peak = -kInf;
        for (int i = 0; i <= 4000; ++i) peak = std::max(peak, logf(lo + (hi - lo) * i / 4000.0));
        if (peak == -kInf) return {};
    }
    double err = 0.0;
    const double fine = scaled_integral(logf, lo, hi, peak, &err);
    DensityMoment out;
    if (!(fine > 0.0) || !std::isfinite(fine)) {
        out.ok = false;
        return out;
    }
    out.ok = err <= 1e-10 * fine;
    out.log_value = peak + std::log(fine) + std::log(rho.scale);
    return out;
}

}  // namespace

// ---- Spectral measures ----

SpectralMeasure SpectralMeasure::atom(double mass, double weight) {
    SpectralMeasure r;
    r.atoms.emplace_back(mass, weight);
    r.validate();
    return r;
}

SpectralMeasure SpectralMeasure::exp_alpha(double m0, double alpha) {
    SpectralMeasure r;
    r.density = DensityKind::EXP_ALPHA;
    r.m0 = m0;
    r.alpha = alpha;
    r.validate();
    return r;
}

void SpectralMeasure::validate() const {
    for (const auto& [m, w] : atoms) {
        if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("SpectralMeasure: atom mass must be >= 0");
        if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("SpectralMeasure: atom weight must be > 0");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("SpectralMeasure: scale must be > 0");
    if (density == DensityKind::NONE) {
        if (atoms.empty()) throw std::invalid_argument("SpectralMeasure: empty measure");
        return;
    }
    if (!(m0 >= 0.0) || !std::isfinite(m0)) throw std::invalid_argument("SpectralMeasure: m0 must be >= 0");
    if (density == DensityKind::EXP_ALPHA && !(alpha > 0.0 && alpha <= 4.0))
        throw std::invalid_argument("SpectralMeasure: alpha must lie in (0, 4]");
    if (density == DensityKind::CUSTOM) {
        if (!custom) throw std::invalid_argument("SpectralMeasure: CUSTOM density needs a function");
        if (!(custom_m_max > m0) || !std::isfinite(custom_m_max))
            throw std::invalid_argument("SpectralMeasure: CUSTOM density needs m_max > m0");
    }
}

double SpectralMeasure::sigma(double m) const {
    if (density == DensityKind::NONE || m < m0) return 0.0;
    if (density == DensityKind::EXP_ALPHA) return scale * std::exp(-std::pow(m, alpha));
    return m <= custom_m_max ? scale * custom(m) : 0.0;
}

double SpectralMeasure::m_max() const {
    if (density == DensityKind::NONE) return m0;
    if (density == DensityKind::CUSTOM) return custom_m_max;
    // Tail int_M^inf e^{-m^a} dm = Gamma(1/a, M^a)/a.
    const double s = 1.0 / alpha;
    const double q0 = boost::math::gamma_q(s, std::pow(m0, alpha));
    const double x = boost::math::gamma_q_inv(s, 1e-12 * q0);
    return std::pow(x, s);
}

double SpectralMeasure::total_mass() const {
    double acc = 0.0;
    for (const auto& a : atoms) acc += scale * a.second;
    if (density == DensityKind::EXP_ALPHA) {
        const double s = 1.0 / alpha;
        acc += scale * boost::math::tgamma(s) * boost::math::gamma_q(s, std::pow(m0, alpha)) / alpha;
    } else if (density == DensityKind::CUSTOM) {
        acc += quad::integrate_gk([this](double m) { return sigma(m); }, m0, custom_m_max);
    }
    return acc;
}

std::pair<double, int> SpectralMeasure::envelope() const { return {total_mass(), 0}; }

cplx spectral_fourier(const SpectralMeasure& rho, cplx t) {
    rho.validate();
    if (t.imag() > 0.0) throw std::invalid_argument("spectral_fourier: Im t > 0 (integrand unbounded)");
    cplx acc{};
    for (const auto& [m, w] : rho.atoms) acc += rho.scale * w * std::exp(-kI * m * t);
    if (rho.density == DensityKind::NONE) return acc;
    const double hi = rho.m_max();
    // Quarter-period panels; 20-point rules resolve that to roundoff.
    double width = rho.density == DensityKind::CUSTOM ? (hi - rho.m0) / 200.0 : 1.0;
    if (std::abs(t.real()) > 0.0) width = std::min(width, 0.5 * kPi / std::abs(t.real()));
    const auto rule = quad::composite_gl(rho.m0, hi, width);
    acc += quad::integrate<cplx>(rule, [&](double m) { return rho.sigma(m) * std::exp(-kI * m * t); });
    return acc;
}

std::string to_string(AnalyticityClass c) {
    switch (c) {
        case AnalyticityClass::ANALYTIC: return "ANALYTIC";
        case AnalyticityClass::GEVREY_NONANALYTIC: return "GEVREY_NONANALYTIC";
        case AnalyticityClass::UNRESOLVED: return "UNRESOLVED";
    }
    return "?";
}

double log_moment(const SpectralMeasure& rho, int k) {
    if (k < 0) throw std::invalid_argument("log_moment: k must be >= 0");
    rho.validate();
    double acc = -kInf;
    for (const auto& [m, w] : rho.atoms) {
        if (m == 0.0 && k > 0) continue;
        acc = log_sum_exp(acc, std::log(rho.scale * w) + (k > 0 ? k * std::log(m) : 0.0));
    }
    const auto d = density_log_moment(rho, k);
    if (!d.ok) throw std::runtime_error("log_moment: quadrature self-check failed");
    return log_sum_exp(acc, d.log_value);
}

AnalyticityReport measure_analyticity_class(const SpectralMeasure& rho, int k_max) {
    if (k_max < 4) throw std::invalid_argument("measure_analyticity_class: k_max must be >= 4");
    rho.validate();
    AnalyticityReport rep;
    const double log_m0 = log_moment(rho, 0);
    bool all_zero = true;
    for (int k = 1; k <= k_max; ++k) {
        double lm = -kInf;
        for (const auto& [m, w] : rho.atoms) {
            if (m > 0.0) lm = log_sum_exp(lm, std::log(rho.scale * w) + k * std::log(m));
        }
        const auto d = density_log_moment(rho, k);
        if (!d.ok) {
            rep.k_max_lowered = true;
            break;
        }
        lm = log_sum_exp(lm, d.log_value);
        MomentRow row;
        row.k = k;
        row.log_moment = lm;
        row.root = lm == -kInf ? 0.0 : std::exp((lm - log_m0 - std::lgamma(k + 1.0)) / k);
        if (row.root > 0.0) all_zero = false;
        rep.table.push_back(row);
    }
    rep.k_max_used = rep.table.empty() ? 0 : rep.table.back().k;
    if (all_zero && !rep.table.empty()) {
        // Measure concentrated at m = 0: the transform is constant.
        rep.cls = AnalyticityClass::ANALYTIC;
        return rep;
    }
    if (rep.k_max_used < 4) return rep;
    const int k_lo = (rep.k_max_used + 1) / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& row : rep.table) {
        if (row.k < k_lo || !(row.root > 0.0)) continue;
        const double x = std::log(static_cast<double>(row.k)), y = std::log(row.root);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 3) return rep;
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (rep.slope <= 0.1) rep.cls = AnalyticityClass::ANALYTIC;
    else if (rep.slope >= 0.5) rep.cls = AnalyticityClass::GEVREY_NONANALYTIC;
    return rep;
}

// ---- Two-point function ----

cplx bessel_k0(cplx z) {
    if (!(z.real() > 0.0) && !(z.real() == 0.0 && z.imag() != 0.0))
        throw std::domain_error("bessel_k0: need Re z >= 0, z != 0");
    const double r = std::abs(z);
    if (r <= 12.0) {
        // Long double keeps the I_0 ln z cancellation at |z| = 12 near 1e-9 relative.
        using lcplx = std::complex<long double>;
        const lcplx zz(z.real(), z.imag());
        const lcplx q = zz * zz / 4.0L;
        lcplx term = 1.0L, i0 = 1.0L, rest = 0.0L;
        long double harmonic = 0.0L;
        for (int k = 1; k < 400; ++k) {
            term *= q / static_cast<long double>(k * k);
            harmonic += 1.0L / k;
            i0 += term;
            rest += term * harmonic;
            if (k > r && std::abs(term) * (1.0L + harmonic) < 1e-22L * std::abs(i0)) break;
        }
        const lcplx v = -(std::log(zz / 2.0L) + static_cast<long double>(kEulerGamma)) * i0 + rest;
        return {static_cast<double>(v.real()), static_cast<double>(v.imag())};
    }
    // Hankel: K_0(z) ~ sqrt(pi/2z) e^{-z} sum_k a_k z^{-k}, a_k = prod -(2j-1)^2 / (k! 8^k).
    cplx sum = 1.0, term = 1.0;
    double last = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double c = -(2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k);
        term *= c / z;
        const double mag = std::abs(term);
        if (mag > last) break;
        sum += term;
        last = mag;
        if (mag < 1e-18) break;
    }
    return std::sqrt(kPi / (2.0 * z)) * std::exp(-z) * sum;
}

cplx two_point_kl(const SpectralMeasure& rho, double tau, double x, double eps) {
    rho.validate();
    if (!(eps > 0.0)) throw std::invalid_argument("two_point_kl: eps must be > 0");
    for (const auto& a : rho.atoms) {
        if (!(a.first > 0.0)) throw std::invalid_argument("two_point_kl: massless atoms are infrared divergent in 1+1");
    }
    if (rho.density != DensityKind::NONE && !(rho.m0 > 0.0))
        throw std::invalid_argument("two_point_kl: density must start at m0 > 0");
    const cplx s = cplx{tau, -eps};
    const cplx z = std::sqrt(x * x - s * s);
    if (std::abs(z) < 1e-8) throw std::invalid_argument("two_point_kl: cone tip with eps below tolerance");
    const double c = 1.0 / (2.0 * kPi);
    cplx acc{};
    for (const auto& [m, w] : rho.atoms) acc += rho.scale * w * c * bessel_k0(m * z);
    if (rho.density != DensityKind::NONE) {
        const double hi = rho.m_max();
        double width = rho.density == DensityKind::CUSTOM ? (hi - rho.m0) / 200.0 : 1.0;
        if (std::abs(z.imag()) > 0.0) width = std::min(width, 0.5 * kPi / std::abs(z.imag()));
        const auto rule = quad::composite_gl(rho.m0, hi, width);
        acc += c * quad::integrate<cplx>(rule, [&](double m) { return rho.sigma(m) * bessel_k0(m * z); });
    }
    return acc;
}

cplx two_point_momentum(double mass, double tau, double x, double eps) {
    if (!(mass > 0.0) || !(eps > 0.0)) throw std::invalid_argument("two_point_momentum: mass and eps must be > 0");
    const double k_hi = std::sqrt(std::pow(45.0 / eps, 2) + 0.0);
    const double width = std::min(2.0, 3.0 / (std::abs(x) + std::abs(tau) + 1e-9));
    const auto rule = quad::composite_gl(0.0, k_hi, width);
    const cplx s{tau, -eps};
    const cplx acc = quad::integrate<cplx>(rule, [&](double k) {
        const double w = std::hypot(k, mass);
        return std::cos(k * x) * std::exp(-kI * w * s) / w;
    });
    return acc / (2.0 * kPi);
}

SampledFamily two_point_family(const SpectralMeasure& rho, double x0, double eps, double half_width) {
    if (!(half_width > std::abs(x0))) throw std::invalid_argument("two_point_family: window must contain the light cone");
    SampledFamily f;
    f.dim = 1;
    f.support = Box::interval(-half_width, half_width);
    f.eval = [rho, x0, eps](double, const Vec& t) { return two_point_kl(rho, t[0], x0, eps); };
    f.h_independent = true;
    // Panels must resolve the eps-rounded log singularities on the light cone.
    f.sharpness = std::max(1.0, 0.25 / eps);
    f.breakpoints = {-std::abs(x0), std::abs(x0)};
    f.label = "two_point";
    return f;
}

// ---- Smearing counterexample ----

double tricomi_u_terminating(double a, double b, double z) {
    const auto nonpos_int = [](double v) { return v <= 0.0 && std::abs(v - std::round(v)) < 1e-12; };
    // U(-n, beta, z) = (-1)^n sum_r C(n, r) (beta + r)_{n-r} (-z)^r.
    const auto terminating = [](int n, double beta, double zz) {
        double acc = 0.0, binom = 1.0;
        for (int r = 0; r <= n; ++r) {
            if (r > 0) binom *= static_cast<double>(n - r + 1) / r;
            double poch = 1.0;
            for (int i = 0; i < n - r; ++i) poch *= beta + r + i;
            acc += binom * poch * std::pow(-zz, r);
        }
        return (n % 2 ? -1.0 : 1.0) * acc;
    };
    if (!(z > 0.0)) throw std::invalid_argument("tricomi_u_terminating: z must be > 0");
    if (nonpos_int(a)) return terminating(static_cast<int>(-std::round(a)), b, z);
    const double a2 = a - b + 1.0;
    if (nonpos_int(a2)) return std::pow(z, 1.0 - b) * terminating(static_cast<int>(-std::round(a2)), 2.0 - b, z);
    throw std::invalid_argument("tricomi_u_terminating: series does not terminate");
}

double tricomi_u_integral(double a, double b, double z) {
    if (!(a > 0.0) || !(z > 0.0)) throw std::invalid_argument("tricomi_u_integral: need a > 0 and z > 0");
    // t = s^{1/a} removes the t^{a-1} endpoint singularity.
    const double p = 1.0 / a;
    const double v = quad::integrate_to_inf(
        [&](double s) {
            const double t = std::pow(s, p);
            if (z * t > 700.0) return 0.0;
            return std::exp(-z * t) * std::pow(1.0 + t, b - a - 1.0);
        },
        0.0, 1e-14);
    return v / boost::math::tgamma(a + 1.0);
}

double counterexample_g_value(double x) {
    const auto f = [x](double y) { return std::exp(-0.5 * y * y) / (x * x + 1.0 / (1.0 + y * y)); };
    return 2.0 * quad::integrate_to_inf(f, 0.0, 1e-14);
}

CounterexampleReport counterexample_g(int k_max) {
    if (k_max < 2 || k_max > 24) throw std::invalid_argument("counterexample_g: k_max must lie in [2, 24]");
    constexpr int kNodes = 128;
    constexpr double kRatio = 0.7;
    constexpr double kY = 14.0;
    // Per y: Taylor coefficients of (x^2 + a)^{-1}, a = 1/(1+y^2), by the
    // trapezoid rule on |x| = 0.7 sqrt(a); aliasing error ~ 0.7^128.
    const auto rule = quad::composite_gl(-kY, kY, 0.25);
    std::vector<std::vector<double>> coeff(rule.x.size(), std::vector<double>(k_max + 1, 0.0));
    parallel_for(rule.x.size(), [&](std::size_t i) {
        const double y = rule.x[i];
        const double a = 1.0 / (1.0 + y * y);
        const double r = kRatio * std::sqrt(a);
        std::vector<cplx> vals(kNodes);
        for (int j = 0; j < kNodes; ++j) {
            const cplx zj = std::polar(r, 2.0 * kPi * j / kNodes);
            vals[j] = 1.0 / (zj * zj + a);
        }
        for (int k = 0; k <= k_max; ++k) {
            cplx acc{};
            for (int j = 0; j < kNodes; ++j) acc += vals[j] * std::polar(1.0, -2.0 * kPi * j * k / kNodes);
            coeff[i][k] = (acc / static_cast<double>(kNodes)).real() / std::pow(r, k);
        }
    });
    CounterexampleReport rep;
    std::vector<double> taylor(k_max + 1);
    for (int k = 0; k <= k_max; ++k) {
        double a_k = 0.0;
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            a_k += rule.w[i] * coeff[i][k] * std::exp(-0.5 * rule.x[i] * rule.x[i]);
        }
        taylor[k] = a_k;
        const double fact = std::tgamma(k + 1.0);
        DerivativeRow row;
        row.k = k;
        row.cauchy = fact * a_k;
        if (k % 2 == 0) {
            const double c = (k / 2) % 2 ? -1.0 : 1.0;
            row.tricomi = std::sqrt(kPi) * c * fact * tricomi_u_terminating(0.5, 0.5 * (k + 5), 0.5);
            row.rel_diff = std::abs(row.cauchy - row.tricomi) / std::abs(row.tricomi);
            row.flagged = row.rel_diff > 1e-6;
            if (k > 0) row.root = std::pow(std::abs(row.cauchy) / fact, 1.0 / k);
        } else {
            row.tricomi = 0.0;
        }
        rep.rows.push_back(row);
    }
    // Odd rows: size relative to the neighbouring even coefficients. At roundoff
    // level they are treated as exact zeros for the radius estimate.
    for (int k = 1; k <= k_max; k += 2) {
        double scale = std::abs(taylor[k - 1]);
        if (k + 1 <= k_max) scale = std::max(scale, std::abs(taylor[k + 1]));
        auto& row = rep.rows[k];
        row.rel_diff = std::abs(taylor[k]) / scale;
        row.flagged = row.rel_diff > 1e-10;
        if (!row.flagged) taylor[k] = 0.0;
    }
    rep.radius = analyticity_radius_from_coefficients(taylor);
    return rep;
}

// ---- Truncated quantum mechanics ----

double TruncatedQM::omega(int n) const { return std::pow(eigenvalues.at(n), alpha); }

void TruncatedQM::validate() const {
    const int n = size();
    if (n < 1) throw std::invalid_argument("TruncatedQM: empty spectrum");
    if (!(eigenvalues[0] > 0.0)) throw std::invalid_argument("TruncatedQM: spectral gap requires lambda_0 > 0");
    for (int i = 1; i < n; ++i) {
        if (!(eigenvalues[i] > eigenvalues[i - 1])) throw std::invalid_argument("TruncatedQM: eigenvalues must increase");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("TruncatedQM: alpha must lie in (0, 1]");
    if (static_cast<int>(position_matrix.size()) != n) throw std::invalid_argument("TruncatedQM: position_matrix size");
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(position_matrix[i].size()) != n) throw std::invalid_argument("TruncatedQM: position_matrix size");
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
            if (std::abs(position_matrix[i][j] - position_matrix[j][i]) > 1e-14)
                throw std::invalid_argument("TruncatedQM: position_matrix must be symmetric");
        }
    }
    if (static_cast<int>(state.size()) != n) throw std::invalid_argument("TruncatedQM: state size");
}

TruncatedQM harmonic_oscillator(int n_levels, double alpha) {
    if (n_levels < 2) throw std::invalid_argument("harmonic_oscillator: need at least 2 levels");
    TruncatedQM q;
    q.alpha = alpha;
    q.eigenvalues.resize(n_levels);
    q.position_matrix.assign(n_levels, std::vector<double>(n_levels, 0.0));
    q.state.resize(n_levels);
    double norm = 0.0;
    for (int n = 0; n < n_levels; ++n) {
        q.eigenvalues[n] = n + 0.5;
        if (n + 1 < n_levels) q.position_matrix[n][n + 1] = q.position_matrix[n + 1][n] = std::sqrt((n + 1) / 2.0);
        q.state[n] = 1.0 / (n + 1.0);
        norm += 1.0 / ((n + 1.0) * (n + 1.0));
    }
    for (auto& c : q.state) c /= std::sqrt(norm);
    q.validate();
    return q;
}

QmFbiProfile qm_fbi_profile(const TruncatedQM& model, double t0, double eta, const HLadder& ladder,
                            double window_half_width) {
    model.validate();
    if (ladder.size() == 0) throw std::invalid_argument("qm_fbi_profile: empty ladder");
    // e^{-W^2/2h} must be below 1e-16 at the largest rung.
    if (window_half_width < 8.6 * std::sqrt(ladder.largest()))
        throw std::invalid_argument("qm_fbi_profile: window too small for the ladder");
    const int n = model.size();
    double w_max = 0.0;
    for (int i = 0; i < n; ++i) w_max = std::max(w_max, model.omega(i));
    QmFbiProfile prof;
    std::vector<double> hs, mags;
    for (std::size_t r = 0; r < ladder.size(); ++r) {
        const double h = ladder[r];
        const double W = window_half_width;
        const double width = std::min(0.5 * std::sqrt(h), 1.0 / (w_max + 1e-12));
        const auto rule = quad::composite_gl(-W, W, width);
        double sq = 0.0, cf = 0.0;
        for (int i = 0; i < n; ++i) {
            const cplx c = model.state[i];
            if (c == 0.0) continue;
            const double w = model.omega(i);
            // t = t0 + u - i eta; the kernel e^{-(t-t0)^2/2h} e^{-i(t-t0) eta/h} and the signal are entire.
            const cplx comp = quad::integrate<cplx>(rule, [&](double u) {
                const cplx s{u, -eta};
                return std::exp(-s * s / (2.0 * h) - kI * s * eta / h - kI * w * (t0 + s));
            });
            sq += std::norm(c * comp);
            const double q = h * w + eta;
            cf += std::norm(c) * std::exp(-q * q / h);
        }
        QmFbiRow row;
        row.h = h;
        row.quadrature = fbi_alpha(h, 1) * std::sqrt(sq);
        row.closed_form = fbi_alpha(h, 1) * std::sqrt(2.0 * kPi * h) * std::sqrt(cf);
        row.rel_diff = row.closed_form > 0.0 ? std::abs(row.quadrature - row.closed_form) / row.closed_form
                                             : std::abs(row.quadrature);
        prof.max_rel_diff = std::max(prof.max_rel_diff, row.rel_diff);
        prof.rows.push_back(row);
        hs.push_back(h);
        mags.push_back(row.quadrature);
    }
    prof.fit = fit_decay(hs, mags);
    return prof;
}

std::vector<CorrelatorTerm> qm_correlator_terms(const TruncatedQM& model, const std::vector<cplx>& phi, int m) {
    model.validate();
    const int n = model.size();
    if (m < 1 || m > 3) throw std::invalid_argument("qm_correlator: m must be 1, 2 or 3");
    if (static_cast<int>(phi.size()) != n) throw std::invalid_argument("qm_correlator: phi size");
    // Paths a_0 -> ... -> a_m = 0; <a|x(t)|b> = e^{i t (w_a - w_b)} x_ab.
    std::map<std::vector<long long>, CorrelatorTerm> merged;
    std::vector<int> path(m + 1, 0);
    const auto visit = [&](auto&& self, int level, cplx coeff) -> void {
        if (level < 0) {
            const cplx c = std::conj(phi[path[0]]) * coeff;
            if (c == 0.0) return;
            CorrelatorTerm t;
            t.nu.resize(m);
            std::vector<long long> key(m);
            for (int j = 1; j <= m; ++j) {
                t.nu[j - 1] = model.omega(path[j - 1]) - model.omega(path[j]);
                key[j - 1] = std::llround(t.nu[j - 1] * 1e9);
            }
            auto [it, fresh] = merged.try_emplace(key, CorrelatorTerm{0.0, t.nu});
            it->second.coeff += c;
            return;
        }
        // path[level + 1] is fixed; choose path[level].
        for (int a = 0; a < n; ++a) {
            const double x = model.position_matrix[a][path[level + 1]];
            if (x == 0.0) continue;
            path[level] = a;
            self(self, level - 1, coeff * x);
        }
    };
    path[m] = 0;
    visit(visit, m - 1, 1.0);
    std::vector<CorrelatorTerm> out;
    for (auto& kv : merged) {
        if (std::abs(kv.second.coeff) > 0.0) out.push_back(kv.second);
    }
    return out;
}

cplx qm_correlator_value(const TruncatedQM& model, const std::vector<cplx>& phi, const std::vector<double>& t) {
    const auto terms = qm_correlator_terms(model, phi, static_cast<int>(t.size()));
    cplx acc{};
    for (const auto& term : terms) {
        double ph = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j) ph += term.nu[j] * t[j];
        acc += term.coeff * std::polar(1.0, ph);
    }
    return acc;
}

SampledFamily qm_correlator(const TruncatedQM& model, const std::vector<cplx>& phi, int m, double half_width) {
    if (m < 1 || m > 2) throw std::invalid_argument("qm_correlator: families exist for m = 1, 2");
    auto terms = std::make_shared<const std::vector<CorrelatorTerm>>(qm_correlator_terms(model, phi, m));
    SampledFamily f;
    f.dim = m;
    f.support = m == 1 ? Box::interval(-half_width, half_width)
                       : Box::rect(-half_width, half_width, -half_width, half_width);
    f.h_independent = true;
    double extent = 0.0;
    for (const auto& t : *terms) {
        double r = 0.0;
        for (double v : t.nu) r += v * v;
        extent = std::max(extent, std::sqrt(r));
    }
    f.xi_extent = extent;
    f.eval = [terms, m](double, const Vec& x) {
        cplx acc{};
        for (const auto& t : *terms) {
            double ph = 0.0;
            for (int j = 0; j < m; ++j) ph += t.nu[j] * x[j];
            acc += t.coeff * std::polar(1.0, ph);
        }
        return acc;
    };
    // T_h e^{i nu.y} = alpha_h (2 pi h)^{d/2} e^{i nu.x} e^{-|xi - h nu|^2 / 2h}.
    f.fbi_exact = [terms, m](double h, const Vec& x, const Vec& xi) {
        cplx acc{};
        for (const auto& t : *terms) {
            double ph = 0.0, d2 = 0.0;
            for (int j = 0; j < m; ++j) {
                ph += t.nu[j] * x[j];
                const double d = xi[j] - h * t.nu[j];
                d2 += d * d;
            }
            acc += t.coeff * std::polar(std::exp(-d2 / (2.0 * h)), ph);
        }
        return fbi_alpha(h, m) * std::pow(2.0 * kPi * h, 0.5 * m) * acc;
    };
    f.label = "correlator_m" + std::to_string(m);
    return f;
}

bool in_nested_cone(const std::vector<double>& xi, double tol) {
    double s = 0.0;
    for (auto it = xi.rbegin(); it != xi.rend(); ++it) {
        s += *it;
        if (s < -tol) return false;
    }
    return true;
}

CorrelatorReport qm_correlator_wfa(const TruncatedQM& model, const std::vector<cplx>& phi, int m,
                                   const std::vector<Vec>& base_points, const HLadder& ladder) {
    CorrelatorReport rep;
    rep.m = m;
    const auto terms = qm_correlator_terms(model, phi, m);
    rep.frequencies = terms.size();
    for (const auto& t : terms) {
        if (!in_nested_cone(t.nu, 1e-12)) rep.frequency_violations.push_back(t.nu);
    }
    if (terms.empty()) {
        rep.empty_state = true;
        return rep;
    }
    if (m == 3) return rep;
    const auto dirs = m == 1 ? directions_1d() : directions_2d(64);
    rep.wfa = wfa_detect(qm_correlator(model, phi, m), base_points, dirs, ladder);
    const double bin = 2.0 * kPi / static_cast<double>(dirs.size());
    const ConeModel time_cone{0, 1.0};
    for (std::size_t b = 0; b < base_points.size(); ++b) {
        for (std::size_t k : rep.wfa.flagged_directions(b)) {
            ++rep.flagged;
            const Vec d = dirs[k];
            std::vector<double> xi(m);
            for (int j = 0; j < m; ++j) xi[j] = std::abs(d[j]) < 1e-12 ? 0.0 : d[j];
            bool near = in_nested_cone(xi);
            if (!near && m == 2) {
                // Accept a direction one angular bin away.
                const double a = std::atan2(d[1], d[0]);
                for (double s : {-1.0, 1.0}) {
                    if (in_nested_cone({std::cos(a + s * bin), std::sin(a + s * bin)}, 1e-12)) near = true;
                }
            }
            if (!near) rep.cone_violations.push_back({b, d});
            std::vector<Covector> cov;
            for (double v : xi) cov.push_back({v});
            if (!rightmost_future_causal(cov, time_cone)) rep.rightmost_violations.push_back({b, d});
        }
    }
    return rep;
}

// ---- 1+1 massless propagators ----

std::string to_string(PropagatorKind k) {
    switch (k) {
        case PropagatorKind::RET: return "RET";
        case PropagatorKind::ADV: return "ADV";
        case PropagatorKind::PJ: return "PJ";
    }
    return "?";
}

double CommutatorResult::operator()(double t, double x) const {
    if (!family.support.contains(Vec{t, x})) return 0.0;
    const double fu = (t - x - u_lo) / du, fv = (t + x - v_lo) / du;
    const int i = std::clamp(static_cast<int>(std::floor(fu)), 0, nu - 2);
    const int j = std::clamp(static_cast<int>(std::floor(fv)), 0, nv - 2);
    const double a = fu - i, b = fv - j;
    return (1 - a) * (1 - b) * at(i, j) + a * (1 - b) * at(i + 1, j) + (1 - a) * b * at(i, j + 1) +
           a * b * at(i + 1, j + 1);
}

CommutatorResult commutator_1p1(const SampledFamily& f, PropagatorKind kind, const CommutatorOptions& options) {
    if (f.dim != 2) throw std::invalid_argument("commutator_1p1: source must be a function of (t, x)");
    const Box& c = options.chart;
    if (c.dim != 2 || c.empty()) throw std::invalid_argument("commutator_1p1: chart must be a 2-d box");
    if (!(options.step > 0.0)) throw std::invalid_argument("commutator_1p1: step must be > 0");
    CommutatorResult res;
    res.u_lo = c.lo[0] - c.hi[1];
    res.v_lo = c.lo[0] + c.lo[1];
    const double span = c.width(0) + c.width(1);
    const int cells = static_cast<int>(std::ceil(span / options.step));
    res.du = span / cells;
    res.nu = res.nv = cells + 1;
    const double du = res.du;

    // Cell integrals of f du dv by the 3-point Gauss rule per axis.
    static const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const Box sup = f.support;
    const auto f_uv = [&](double u, double v) {
        const Vec p{0.5 * (u + v), 0.5 * (v - u)};
        return sup.contains(p) ? f.eval(1.0, p).real() : 0.0;
    };
    std::vector<double> cell(static_cast<std::size_t>(cells) * cells);
    parallel_for(static_cast<std::size_t>(cells), [&](std::size_t ii) {
        const int i = static_cast<int>(ii);
        const double uc = res.u_lo + (i + 0.5) * du;
        for (int j = 0; j < cells; ++j) {
            const double vc = res.v_lo + (j + 0.5) * du;
            // Skip cells whose (t, x) image misses the support box.
            const double t_lo = 0.5 * (uc + vc) - 0.5 * du, t_hi = t_lo + du;
            const double x_lo = 0.5 * (vc - uc) - 0.5 * du, x_hi = x_lo + du;
            double acc = 0.0;
            if (!(t_hi < sup.lo[0] || t_lo > sup.hi[0] || x_hi < sup.lo[1] || x_lo > sup.hi[1])) {
                for (int a = 0; a < 3; ++a) {
                    for (int b = 0; b < 3; ++b) {
                        acc += gw[a] * gw[b] * f_uv(uc + 0.5 * du * gx[a], vc + 0.5 * du * gx[b]);
                    }
                }
                acc *= 0.25 * du * du;
            }
            cell[ii * cells + j] = acc;
        }
    });

    const int n = res.nu;
    const auto idx = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
    std::vector<double> ret(static_cast<std::size_t>(n) * n, 0.0), adv(ret.size(), 0.0);
    if (kind != PropagatorKind::ADV) {
        for (int i = 1; i < n; ++i) {
            for (int j = 1; j < n; ++j) {
                ret[idx(i, j)] = ret[idx(i - 1, j)] + ret[idx(i, j - 1)] - ret[idx(i - 1, j - 1)] +
                                 0.25 * cell[static_cast<std::size_t>(i - 1) * cells + (j - 1)];
            }
        }
    }
    if (kind != PropagatorKind::RET) {
        for (int i = n - 2; i >= 0; --i) {
            for (int j = n - 2; j >= 0; --j) {
                adv[idx(i, j)] = adv[idx(i + 1, j)] + adv[idx(i, j + 1)] - adv[idx(i + 1, j + 1)] +
                                 0.25 * cell[static_cast<std::size_t>(i) * cells + j];
            }
        }
    }
    res.values.resize(ret.size());
    for (std::size_t k = 0; k < ret.size(); ++k) res.values[k] = ret[k] - adv[k];

    // box = 4 d_u d_v; RET and ADV solve box G = f, their difference box G = 0.
    const double sign = kind == PropagatorKind::ADV ? -1.0 : 1.0;
    for (int i = 0; i < cells; ++i) {
        for (int j = 0; j < cells; ++j) {
            const double mixed = res.at(i + 1, j + 1) - res.at(i + 1, j) - res.at(i, j + 1) + res.at(i, j);
            const double box = 4.0 * mixed / (du * du);
            const double target =
                kind == PropagatorKind::PJ ? 0.0 : f_uv(res.u_lo + (i + 0.5) * du, res.v_lo + (j + 0.5) * du);
            res.residual = std::max(res.residual, std::abs(sign * box - target));
        }
    }
    res.clipped = !(sup.lo[0] > c.lo[0] && sup.hi[0] < c.hi[0] && sup.lo[1] > c.lo[1] && sup.hi[1] < c.hi[1]);

    auto grid = std::make_shared<CommutatorResult>();
    grid->u_lo = res.u_lo;
    grid->v_lo = res.v_lo;
    grid->du = res.du;
    grid->nu = res.nu;
    grid->nv = res.nv;
    grid->values = res.values;
    grid->family.support = c;
    res.family.dim = 2;
    res.family.support = c;
    res.family.h_independent = true;
    res.family.label = "commutator_" + to_string(kind);
    res.family.eval = [grid](double, const Vec& p) { return cplx{(*grid)(p[0], p[1])}; };
    return res;
}

Region propagator_support(const CommutatorResult& g, int nt, int nx, double threshold) {
    const Box& box = g.family.support;
    Region r = Region::blank(box, nt, nx);
    std::vector<double> vals(static_cast<std::size_t>(nt) * nx);
    double peak = 0.0;
    for (int i = 0; i < nt; ++i) {
        for (int j = 0; j < nx; ++j) {
            const double v = std::abs(g(r.t_center(i), r.x_center(j)));
            vals[static_cast<std::size_t>(i) * nx + j] = v;
            peak = std::max(peak, v);
        }
    }
    if (peak == 0.0) return r;
    for (int i = 0; i < nt; ++i) {
        for (int j = 0; j < nx; ++j) r.set(i, j, vals[static_cast<std::size_t>(i) * nx + j] > threshold * peak);
    }
    return r;
}

SampledFamily spacetime_bump(double t0, double x0, double r0) {
    if (!(r0 > 0.0)) throw std::invalid_argument("spacetime_bump: radius must be > 0");
    SampledFamily f;
    f.dim = 2;
    f.support = Box::rect(t0 - r0, t0 + r0, x0 - r0, x0 + r0);
    f.eval = [t0, x0, r0](double, const Vec& p) {
        const double dt = (p[0] - t0) / r0, dx = (p[1] - x0) / r0;
        const double q = 1.0 - dt * dt - dx * dx;
        return q > 0.0 ? cplx{std::exp(-1.0 / q)} : cplx{};
    };
    f.h_independent = true;
    f.label = "bump";
    return f;
}

}  // namespace microlocal
