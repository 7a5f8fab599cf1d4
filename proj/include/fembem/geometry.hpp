#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>

#include "fembem/common.hpp"

namespace fembem {

/// Reference domain boundary: ellipse with semi-axes a, b in polar form
/// r(phi) = a b / sqrt(b^2 cos^2 phi + a^2 sin^2 phi).
struct EllipseReference {
  double semi_axis_a = 0.6;
  double semi_axis_b = 0.4;
};

inline double reference_radius(const EllipseReference& e, double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  const double d = e.semi_axis_b * e.semi_axis_b * c * c + e.semi_axis_a * e.semi_axis_a * s * s;
  return e.semi_axis_a * e.semi_axis_b / std::sqrt(d);
}

inline double reference_radius_derivative(const EllipseReference& e, double phi) {
  const double a2 = e.semi_axis_a * e.semi_axis_a, b2 = e.semi_axis_b * e.semi_axis_b;
  const double c = std::cos(phi), s = std::sin(phi);
  const double d = b2 * c * c + a2 * s * s;
  const double dd = (a2 - b2) * std::sin(2.0 * phi);
  return -0.5 * e.semi_axis_a * e.semi_axis_b * dd / (d * std::sqrt(d));
}

inline double reference_radius_second_derivative(const EllipseReference& e, double phi) {
  const double a2 = e.semi_axis_a * e.semi_axis_a, b2 = e.semi_axis_b * e.semi_axis_b;
  const double c = std::cos(phi), s = std::sin(phi);
  const double d = b2 * c * c + a2 * s * s;
  const double dd = (a2 - b2) * std::sin(2.0 * phi);
  const double ddd = 2.0 * (a2 - b2) * std::cos(2.0 * phi);
  const double ab = e.semi_axis_a * e.semi_axis_b;
  return ab * (0.75 * dd * dd / (d * d * std::sqrt(d)) - 0.5 * ddd / (d * std::sqrt(d)));
}

/// Fourier perturbation of the boundary radius. Weights: w_k = 1 for |k| <= 5,
/// (|k|-5)^-6 for 5 < |k| <= k_max, 0 beyond the truncation.
struct PerturbationSpec {
  double epsilon = 0.05;
  int k_max = 64;

  int dimension() const { return 2 * k_max + 1; }

  double weight(int k) const {
    int ak = std::abs(k);
    if (ak <= 5) return 1.0;
    if (ak <= k_max) return std::pow(static_cast<double>(ak - 5), -6.0);
    return 0.0;
  }
};

/// One realization of the random Fourier coefficients, stored in the order
/// k = 0, +1, -1, +2, -2, ... so that heavier-weighted coordinates lead.
struct SampleVector {
  Eigen::VectorXd data;

  SampleVector() = default;
  explicit SampleVector(int dimension) : data(Eigen::VectorXd::Zero(dimension)) {}

  static int index_of(int k) { return k == 0 ? 0 : (k > 0 ? 2 * k - 1 : -2 * k); }

  double coeff(int k) const {
    int idx = index_of(k);
    return idx < data.size() ? data[idx] : 0.0;
  }
  double& coeff(int k) { return data[index_of(k)]; }

  int dimension() const { return static_cast<int>(data.size()); }
};

namespace detail {

/// Value and first two phi-derivatives of the truncated Fourier sum
/// sum_k w_k (y_{-k} sin(k phi) + y_k cos(k phi)), with sin/cos of the
/// harmonics generated by the angle-addition recurrence (one libm call).
struct FourierSums {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

inline FourierSums fourier_sums(const PerturbationSpec& spec, const SampleVector& y, double phi) {
  FourierSums out;
  out.value = spec.weight(0) * y.coeff(0);  // sin(0) = 0
  const double c1 = std::cos(phi), s1 = std::sin(phi);
  double ck = 1.0, sk = 0.0;
  for (int k = 1; k <= spec.k_max; ++k) {
    double cnew = ck * c1 - sk * s1;
    sk = sk * c1 + ck * s1;
    ck = cnew;
    double w = spec.weight(k);
    double ys = y.coeff(-k), yc = y.coeff(k);
    double even = ys * sk + yc * ck;   // the sum's k-th term
    double odd = ys * ck - yc * sk;    // its phi-derivative / k
    out.value += w * even;
    out.d1 += w * k * odd;
    out.d2 -= w * k * k * even;
  }
  return out;
}

}  // namespace detail

inline double perturbation(const PerturbationSpec& spec, const SampleVector& y, double phi) {
  return spec.epsilon * detail::fourier_sums(spec, y, phi).value;
}

inline double perturbation_derivative(const PerturbationSpec& spec, const SampleVector& y,
                                      double phi) {
  return spec.epsilon * detail::fourier_sums(spec, y, phi).d1;
}

inline double perturbation_second_derivative(const PerturbationSpec& spec, const SampleVector& y,
                                             double phi) {
  return spec.epsilon * detail::fourier_sums(spec, y, phi).d2;
}

/// Radius of the inner disk B and the clearance Gamma must keep from it.
inline constexpr double kSigmaRadius = 0.2;
inline constexpr double kBoundaryClearance = 0.05;

inline double boundary_radius(const EllipseReference& e, const PerturbationSpec& spec,
                              const SampleVector& y, double phi) {
  double r = reference_radius(e, phi) + perturbation(spec, y, phi);
  if (r <= kSigmaRadius + kBoundaryClearance) {
    throw DegenerateBoundaryError("degenerate boundary: radius " + std::to_string(r) +
                                  " at phi=" + std::to_string(phi));
  }
  return r;
}

inline Vec2 boundary_point(const EllipseReference& e, const PerturbationSpec& spec,
                           const SampleVector& y, double phi) {
  double r = boundary_radius(e, spec, y, phi);
  return {r * std::cos(phi), r * std::sin(phi)};
}

inline Vec2 boundary_tangent(const EllipseReference& e, const PerturbationSpec& spec,
                             const SampleVector& y, double phi) {
  double r = boundary_radius(e, spec, y, phi);
  double dr = reference_radius_derivative(e, phi) + perturbation_derivative(spec, y, phi);
  const double c = std::cos(phi), s = std::sin(phi);
  return {dr * c - r * s, dr * s + r * c};
}

/// Closed curve over the parameter interval [0, 2*pi).
class ParametricCurve {
 public:
  virtual ~ParametricCurve() = default;
  virtual Vec2 point(double t) const = 0;
  virtual Vec2 derivative(double t) const = 0;
  virtual Vec2 second_derivative(double t) const = 0;
  /// Point and derivative in one evaluation (quadrature setup hot path).
  virtual void point_and_derivative(double t, Vec2& p, Vec2& d) const {
    p = point(t);
    d = derivative(t);
  }
};

class CircleCurve final : public ParametricCurve {
 public:
  explicit CircleCurve(double radius) : radius_(radius) {}
  Vec2 point(double t) const override { return {radius_ * std::cos(t), radius_ * std::sin(t)}; }
  Vec2 derivative(double t) const override {
    return {-radius_ * std::sin(t), radius_ * std::cos(t)};
  }
  Vec2 second_derivative(double t) const override {
    return {-radius_ * std::cos(t), -radius_ * std::sin(t)};
  }
  double radius() const { return radius_; }

 private:
  double radius_;
};

class PerturbedEllipseCurve final : public ParametricCurve {
 public:
  PerturbedEllipseCurve(EllipseReference ellipse, PerturbationSpec spec, SampleVector y)
      : ellipse_(ellipse), spec_(spec), y_(std::move(y)) {}

  Vec2 point(double t) const override {
    auto [r, dr, ddr] = radial(t);
    return {r * std::cos(t), r * std::sin(t)};
  }

  Vec2 derivative(double t) const override {
    auto [r, dr, ddr] = radial(t);
    const double c = std::cos(t), s = std::sin(t);
    return {dr * c - r * s, dr * s + r * c};
  }

  Vec2 second_derivative(double t) const override {
    auto [r, dr, ddr] = radial(t);
    const double c = std::cos(t), s = std::sin(t);
    return {(ddr - r) * c - 2.0 * dr * s, (ddr - r) * s + 2.0 * dr * c};
  }

  void point_and_derivative(double t, Vec2& p, Vec2& d) const override {
    auto [r, dr, ddr] = radial(t);
    const double c = std::cos(t), s = std::sin(t);
    p = {r * c, r * s};
    d = {dr * c - r * s, dr * s + r * c};
  }

  const SampleVector& sample() const { return y_; }

 private:
  struct Radial {
    double r, dr, ddr;
  };

  Radial radial(double t) const {
    detail::FourierSums sums = detail::fourier_sums(spec_, y_, t);
    double r = reference_radius(ellipse_, t) + spec_.epsilon * sums.value;
    if (r <= kSigmaRadius + kBoundaryClearance) {
      throw DegenerateBoundaryError("degenerate boundary: radius " + std::to_string(r) +
                                    " at phi=" + std::to_string(t));
    }
    return {r, reference_radius_derivative(ellipse_, t) + spec_.epsilon * sums.d1,
            reference_radius_second_derivative(ellipse_, t) + spec_.epsilon * sums.d2};
  }

  EllipseReference ellipse_;
  PerturbationSpec spec_;
  SampleVector y_;
};

}  // namespace fembem
