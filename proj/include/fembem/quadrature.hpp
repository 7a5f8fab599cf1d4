#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fembem/common.hpp"

namespace fembem {

/// Nodes and weights of a quadrature rule on (0, 1).
struct Rule1d {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  int size() const { return static_cast<int>(nodes.size()); }
};

/// Gauss-Legendre rule on (0, 1), exact for polynomials of degree 2n-1.
inline Rule1d gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be positive");
  Rule1d rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Newton iteration on P_n over [-1, 1], then map to (0, 1).
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = 0.5 * (1.0 - x);  // descending x -> ascending node
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

namespace detail {

// Gauss rules for the weights -log(x) and -x*log(x) on (0, 1), generated by
// the modified Chebyshev algorithm with shifted-Legendre modified moments
// (these moments are known in closed form) followed by Golub-Welsch.
//
// Shifted Legendre moments of -log(x):  m_0 = 1, m_k = (-1)^k / (k(k+1)).
// Against x*(-log x) the three-term recurrence of P*_k gives
//   m1_k = (k+1)/(2(2k+1)) m_{k+1} + k/(2(2k+1)) m_{k-1} + m_k / 2.
inline Rule1d weighted_rule_from_modified_moments(const Eigen::VectorXd& modified, int n,
                                                  double total_mass) {
  const int m = 2 * n;
  // Convert to moments against *monic* shifted Legendre polynomials.
  Eigen::VectorXd nu(m);
  double monic = 1.0;  // (k!)^2 / (2k)!
  for (int k = 0; k < m; ++k) {
    if (k > 0) monic *= k / (2.0 * (2.0 * k - 1.0));
    nu[k] = modified[k] * monic;
  }
  // Monic shifted-Legendre recurrence coefficients.
  Eigen::VectorXd a = Eigen::VectorXd::Constant(m, 0.5);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (int k = 1; k < m; ++k) b[k] = k * k / (4.0 * (4.0 * k * k - 1.0));

  // Wheeler's algorithm.
  Eigen::VectorXd alpha(n), beta(n);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(n + 1, m + 1);
  for (int l = 0; l < m; ++l) sigma(1, l + 1) = nu[l];
  alpha[0] = a[0] + nu[1] / nu[0];
  beta[0] = nu[0];
  for (int k = 1; k < n; ++k) {
    for (int l = k; l < m - k; ++l) {
      sigma(k + 1, l + 1) = sigma(k, l + 2) - (alpha[k - 1] - a[l]) * sigma(k, l + 1) -
                            beta[k - 1] * sigma(k - 1, l + 1) + b[l] * sigma(k, l);
    }
    alpha[k] = a[k] + sigma(k + 1, k + 2) / sigma(k + 1, k + 1) - sigma(k, k + 1) / sigma(k, k);
    beta[k] = sigma(k + 1, k + 1) / sigma(k, k);
  }

  // Golub-Welsch on the symmetric tridiagonal Jacobi matrix.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    jacobi(k, k) = alpha[k];
    if (k + 1 < n) {
      double off = std::sqrt(beta[k + 1]);
      jacobi(k, k + 1) = off;
      jacobi(k + 1, k) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  Rule1d rule;
  rule.nodes = eig.eigenvalues();
  rule.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    double v0 = eig.eigenvectors()(0, k);
    rule.weights[k] = total_mass * v0 * v0;
  }
  return rule;
}

inline Eigen::VectorXd shifted_legendre_log_moments(int m) {
  Eigen::VectorXd moments(m);
  moments[0] = 1.0;
  for (int k = 1; k < m; ++k) {
    double sign = (k % 2 == 0) ? 1.0 : -1.0;
    moments[k] = sign / (static_cast<double>(k) * (k + 1.0));
  }
  return moments;
}

}  // namespace detail

/// Gauss rule for the weight -log(x) on (0, 1): sum w_i f(x_i) ~ int -log(x) f(x) dx.
inline Rule1d gauss_log(int n) {
  const int m = 2 * n;
  Eigen::VectorXd moments = detail::shifted_legendre_log_moments(m + 1);
  return detail::weighted_rule_from_modified_moments(moments.head(m), n, 1.0);
}

/// Gauss rule for the weight -x*log(x) on (0, 1).
inline Rule1d gauss_xlog(int n) {
  const int m = 2 * n;
  Eigen::VectorXd base = detail::shifted_legendre_log_moments(m + 2);
  Eigen::VectorXd moments(m);
  moments[0] = 0.25;
  for (int k = 1; k < m; ++k) {
    moments[k] = (k + 1.0) / (2.0 * (2.0 * k + 1.0)) * base[k + 1] +
                 k / (2.0 * (2.0 * k + 1.0)) * base[k - 1] + 0.5 * base[k];
  }
  return detail::weighted_rule_from_modified_moments(moments, n, 0.25);
}

/// Quadrature point on the reference triangle {x >= 0, y >= 0, x + y <= 1}.
struct TrianglePoint {
  double xi;
  double eta;
  double weight;  // weights sum to 1/2 = reference area
};

/// 7-point rule, exact for polynomials of total degree 5.
inline std::vector<TrianglePoint> triangle_rule_degree5() {
  const double sqrt15 = std::sqrt(15.0);
  const double a = (6.0 - sqrt15) / 21.0;
  const double b = (6.0 + sqrt15) / 21.0;
  const double wa = (155.0 - sqrt15) / 2400.0;
  const double wb = (155.0 + sqrt15) / 2400.0;
  const double wc = 9.0 / 80.0;
  return {
      {1.0 / 3.0, 1.0 / 3.0, wc},
      {a, a, wa},
      {a, 1.0 - 2.0 * a, wa},
      {1.0 - 2.0 * a, a, wa},
      {b, b, wb},
      {b, 1.0 - 2.0 * b, wb},
      {1.0 - 2.0 * b, b, wb},
  };
}

}  // namespace fembem
