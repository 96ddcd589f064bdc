#include "microlocal/quadrature.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace microlocal::quad {

namespace {

struct Gl20 {
    std::vector<double> x, w;
    Gl20() {
        using G = boost::math::quadrature::gauss<double, 20>;
        const auto& a = G::abscissa();
        const auto& wt = G::weights();
        for (std::size_t i = a.size(); i-- > 0;) {
            x.push_back(-a[i]);
            w.push_back(wt[i]);
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            x.push_back(a[i]);
            w.push_back(wt[i]);
        }
    }
};

const Gl20& gl20() {
    static const Gl20 rule;
    return rule;
}

}  // namespace

const std::vector<double>& gl20_nodes() { return gl20().x; }
const std::vector<double>& gl20_weights() { return gl20().w; }

Rule composite_gl(double a, double b, double max_width, const std::vector<double>& breakpoints) {
    Rule r;
    if (!(b > a)) return r;
    if (!(max_width > 0.0)) throw std::invalid_argument("composite_gl: width must be positive");
    std::vector<double> cuts{a};
    for (double p : breakpoints) {
        if (p > a && p < b) cuts.push_back(p);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    const auto& xn = gl20_nodes();
    const auto& wn = gl20_weights();
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double lo = cuts[s], hi = cuts[s + 1];
        if (!(hi > lo)) continue;
        const auto panels = static_cast<long>(std::ceil((hi - lo) / max_width - 1e-9));
        const double width = (hi - lo) / std::max(1L, panels);
        for (long p = 0; p < std::max(1L, panels); ++p) {
            const double c = lo + (p + 0.5) * width;
            const double half = 0.5 * width;
            for (std::size_t i = 0; i < xn.size(); ++i) {
                r.x.push_back(c + half * xn[i]);
                r.w.push_back(half * wn[i]);
            }
        }
    }
    return r;
}

double integrate_gk(const std::function<double(double)>& f, double a, double b, double rel_tol,
                    double* err) {
    double e = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, a, b, 30, rel_tol, &e);
    if (err) *err = e;
    return v;
}

std::complex<double> integrate_gk_complex(const std::function<std::complex<double>(double)>& f,
                                  double a, double b, double rel_tol) {
    const double re = integrate_gk([&](double x) { return f(x).real(); }, a, b, rel_tol);
    const double im = integrate_gk([&](double x) { return f(x).imag(); }, a, b, rel_tol);
    return {re, im};
}

double integrate_to_inf(const std::function<double(double)>& f, double a, double rel_tol) {
    boost::math::quadrature::exp_sinh<double> integrator;
    return integrator.integrate([&](double t) { return f(a + t); }, rel_tol);
}

std::complex<double> integrate_to_inf_complex(const std::function<std::complex<double>(double)>& f,
                                      double a, double rel_tol) {
    const double re = integrate_to_inf([&](double x) { return f(x).real(); }, a, rel_tol);
    const double im = integrate_to_inf([&](double x) { return f(x).imag(); }, a, rel_tol);
    return {re, im};
}

std::vector<double> gregory_weights(std::size_t n, double step) {
    std::vector<double> w(n, step);
    if (n < 6) {
        if (n == 1) {
            w[0] = 0.0;
            return w;
        }
        w.front() *= 0.5;
        w.back() *= 0.5;
        return w;
    }
    static constexpr double c[3] = {3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0};
    for (int i = 0; i < 3; ++i) {
        w[i] = c[i] * step;
        w[n - 1 - i] = c[i] * step;
    }
    return w;
}

}  // namespace microlocal::quad
