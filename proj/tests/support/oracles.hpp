#pragma once

// Reference values computed without the library: quadrature, closed forms of
// small systems and Markov-chain expectations.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline constexpr double kHbar = 0.6582119569;  // meV ps

/// (1/2) int_{-1}^{1} u^2 cos(alpha u) du
inline double f_spatial_quadrature(double alpha) {
  auto f = [alpha](double u) { return u * u * std::cos(alpha * u); };
  double err = 0.0;
  return 0.5 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -1.0, 1.0, 15, 1e-15, &err);
}

/// Even probability given no photon after a pi pulse on |++>: the three unexcited
/// populations stay, the two excited ones decay and are filtered with (1 - eta).
inline double p_even_from_populations(double t, double eta, double gamma) {
  const double excited = std::exp(-gamma * t);
  const double odd = 0.5 * (excited + (1.0 - eta) * (1.0 - excited));
  return 0.5 / (0.5 + odd);
}

/// Two-level atom driven at Rabi energy omega (H = omega/2 sigma_x), no decay.
inline double rabi_excited(double omega, double t) {
  const double s = std::sin(omega * t / (2.0 * kHbar));
  return s * s;
}

/// Expected attempts of the one-bond-at-a-time strategy from the absorbing Markov
/// chain on the number of bonds already in place.
inline double naive_attempts_markov(int nodes, double p) {
  const int n = nodes - 1;  // transient states 0..n-1
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (int k = 0; k < n; ++k) {
    if (k + 1 < n) a(k, k + 1) -= p;
    a(k, 0) -= 1.0 - p;
  }
  return a.fullPivLu().solve(Eigen::VectorXd::Ones(n))(0);
}

/// Expected attempts when halves are grown separately and joined; a failed join
/// discards both halves, so E(n) = (E(ceil n/2) + E(floor n/2) + 1) / p.
inline double halving_attempts(int nodes, double p) {
  std::function<double(int)> e = [&](int m) -> double {
    if (m <= 1) return 0.0;
    return (e((m + 1) / 2) + e(m / 2) + 1.0) / p;
  };
  return e(nodes);
}

/// Brute-force RK4 on the matrix form of the linear conditional master equation,
/// collapse operators given as functions of time.
inline Eigen::MatrixXcd integrate_cme(const Eigen::MatrixXcd& h,
                                      const std::vector<std::function<Eigen::MatrixXcd(double)>>& ops,
                                      const std::vector<double>& counted, Eigen::MatrixXcd rho, double t0, double span,
                                      int steps) {
  const std::complex<double> minus_i(0.0, -1.0 / kHbar);
  auto rhs = [&](double t, const Eigen::MatrixXcd& r) {
    Eigen::MatrixXcd out = minus_i * (h * r - r * h);
    for (std::size_t j = 0; j < ops.size(); ++j) {
      const Eigen::MatrixXcd c = ops[j](t);
      const Eigen::MatrixXcd cdc = c.adjoint() * c;
      out += (1.0 - counted[j]) * c * r * c.adjoint() - 0.5 * (cdc * r + r * cdc);
    }
    return out;
  };
  const double dt = span / steps;
  double t = t0;
  for (int k = 0; k < steps; ++k) {
    const Eigen::MatrixXcd k1 = rhs(t, rho);
    const Eigen::MatrixXcd k2 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k1);
    const Eigen::MatrixXcd k3 = rhs(t + 0.5 * dt, rho + 0.5 * dt * k2);
    const Eigen::MatrixXcd k4 = rhs(t + dt, rho + dt * k3);
    rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += dt;
  }
  return rho;
}

}  // namespace oracle
