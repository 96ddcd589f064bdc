#pragma once

#include <complex>
#include <functional>
#include <vector>

namespace microlocal::quad {

// Nodes and weights of the 20-point Gauss-Legendre rule on [-1, 1].
const std::vector<double>& gl20_nodes();
const std::vector<double>& gl20_weights();

struct Rule {
    std::vector<double> x;
    std::vector<double> w;
};

/*
 * Composite 20-point Gauss-Legendre rule on [a, b]. Panels are no wider
 * than max_width and never straddle a breakpoint.
 */
Rule composite_gl(double a, double b, double max_width,
                  const std::vector<double>& breakpoints = {});

template <class T, class F>
T integrate(const Rule& r, F&& f) {
    T acc{};
    for (std::size_t i = 0; i < r.x.size(); ++i) acc += r.w[i] * f(r.x[i]);
    return acc;
}

// Adaptive Gauss-Kronrod on a finite interval.
double integrate_gk(const std::function<double(double)>& f, double a, double b,
                    double rel_tol = 1e-13, double* err = nullptr);
std::complex<double> integrate_gk_complex(const std::function<std::complex<double>(double)>& f,
                                  double a, double b, double rel_tol = 1e-13);

// Integral over [a, inf) for integrands with exponential or faster decay.
double integrate_to_inf(const std::function<double(double)>& f, double a,
                        double rel_tol = 1e-13);
std::complex<double> integrate_to_inf_complex(
    const std::function<std::complex<double>(double)>& f, double a, double rel_tol = 1e-13);

// Trapezoid weights with third-order Gregory end corrections for n uniform nodes.
std::vector<double> gregory_weights(std::size_t n, double step);

}  // namespace microlocal::quad
