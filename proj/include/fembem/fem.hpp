#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fembem/common.hpp"
#include "fembem/mesh.hpp"
#include "fembem/quadrature.hpp"

namespace fembem {

/// Continuous piecewise-linear function on the disk mesh of a given level,
/// one coefficient per vertex.
struct FeFunction {
  int level = 0;
  Eigen::VectorXd coeffs;
};

namespace detail {

/// Geometry map of one triangle: affine for straight elements; for curved
/// elements the edge v1->v2 is blended onto the circular arc,
///   F(xi, eta) = affine(xi, eta) + (xi + eta) * Phi(eta / (xi + eta)),
/// where Phi is the deviation of the arc from the chord.
struct ElementMap {
  Vec2 p0, p1, p2;
  bool curved = false;
  double theta1 = 0.0, dtheta = 0.0;  // arc angles (curved only)

  Vec2 arc(double s) const {
    double a = theta1 + s * dtheta;
    return {kSigmaRadius * std::cos(a), kSigmaRadius * std::sin(a)};
  }
  Vec2 arc_deriv(double s) const {
    double a = theta1 + s * dtheta;
    return {-kSigmaRadius * dtheta * std::sin(a), kSigmaRadius * dtheta * std::cos(a)};
  }

  Vec2 map(double xi, double eta) const {
    Vec2 x = p0 * (1.0 - xi - eta) + p1 * xi + p2 * eta;
    if (curved) {
      double r = xi + eta;
      if (r > 0) {
        double t = eta / r;
        Vec2 phi = arc(t) - ((1.0 - t) * p1 + t * p2);
        x += r * phi;
      }
    }
    return x;
  }

  Eigen::Matrix2d jacobian(double xi, double eta) const {
    Eigen::Matrix2d j;
    j.col(0) = p1 - p0;
    j.col(1) = p2 - p0;
    if (curved) {
      double r = xi + eta;
      double t = r > 0 ? eta / r : 0.5;
      Vec2 phi = arc(t) - ((1.0 - t) * p1 + t * p2);
      Vec2 dphi = arc_deriv(t) - (p2 - p1);
      j.col(0) += phi - t * dphi;
      j.col(1) += phi + (1.0 - t) * dphi;
    }
    return j;
  }
};

inline ElementMap make_element_map(const DiskMesh& mesh, const CurvedTriangle& tri) {
  ElementMap em;
  em.p0 = mesh.vertices[tri.v[0]];
  em.p1 = mesh.vertices[tri.v[1]];
  em.p2 = mesh.vertices[tri.v[2]];
  em.curved = tri.curved;
  if (tri.curved) {
    em.theta1 = std::atan2(em.p1.y(), em.p1.x());
    double theta2 = std::atan2(em.p2.y(), em.p2.x());
    double d = theta2 - em.theta1;
    if (d > kPi) d -= kTwoPi;
    if (d < -kPi) d += kTwoPi;
    em.dtheta = d;
  }
  return em;
}

}  // namespace detail

/// Precomputed quadrature data of a disk mesh: mapped points, scaled weights
/// and physical P1 gradients at every quadrature point.
class ElementGeometry {
 public:
  explicit ElementGeometry(const DiskMesh& mesh) : mesh_(&mesh), rule_(triangle_rule_degree5()) {
    const int nq = static_cast<int>(rule_.size());
    const int ne = mesh.triangle_count();
    points_.resize(ne * nq);
    wdet_.resize(ne * nq);
    grads_.resize(ne * nq * 3);
    for (int e = 0; e < ne; ++e) {
      detail::ElementMap em = detail::make_element_map(mesh, mesh.triangles[e]);
      for (int k = 0; k < nq; ++k) {
        const auto& qp = rule_[k];
        Eigen::Matrix2d j = em.jacobian(qp.xi, qp.eta);
        double det = j.determinant();
        if (det <= 0.0) throw std::runtime_error("ElementGeometry: non-positive Jacobian");
        int idx = e * nq + k;
        points_[idx] = em.map(qp.xi, qp.eta);
        wdet_[idx] = qp.weight * det;
        Eigen::Matrix2d jinv_t = j.inverse().transpose();
        grads_[idx * 3 + 0] = jinv_t * Vec2(-1.0, -1.0);
        grads_[idx * 3 + 1] = jinv_t * Vec2(1.0, 0.0);
        grads_[idx * 3 + 2] = jinv_t * Vec2(0.0, 1.0);
      }
    }
  }

  const DiskMesh& mesh() const { return *mesh_; }
  int n_quad() const { return static_cast<int>(rule_.size()); }
  const std::vector<TrianglePoint>& rule() const { return rule_; }
  const Vec2& point(int e, int k) const { return points_[e * n_quad() + k]; }
  double weight(int e, int k) const { return wdet_[e * n_quad() + k]; }
  const Vec2& grad(int e, int k, int local) const { return grads_[(e * n_quad() + k) * 3 + local]; }

  /// Values of the P1 basis at quadrature point k (reference coordinates).
  std::array<double, 3> shape(int k) const {
    const auto& qp = rule_[k];
    return {1.0 - qp.xi - qp.eta, qp.xi, qp.eta};
  }

 private:
  const DiskMesh* mesh_;
  std::vector<TrianglePoint> rule_;
  std::vector<Vec2> points_;
  std::vector<double> wdet_;
  std::vector<Vec2> grads_;
};

/// P1 stiffness matrix over the curved elements. Local matrices are mirrored
/// so the result is exactly symmetric.
inline Eigen::SparseMatrix<double> assemble_stiffness(const ElementGeometry& geom) {
  const DiskMesh& mesh = geom.mesh();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.triangle_count() * 9);
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const auto& tri = mesh.triangles[e];
    double local[3][3] = {};
    for (int k = 0; k < geom.n_quad(); ++k) {
      double w = geom.weight(e, k);
      for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) local[a][b] += w * geom.grad(e, k, a).dot(geom.grad(e, k, b));
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = a; b < 3; ++b) {
        triplets.emplace_back(tri.v[a], tri.v[b], local[a][b]);
        if (a != b) triplets.emplace_back(tri.v[b], tri.v[a], local[a][b]);
      }
    }
  }
  Eigen::SparseMatrix<double> a(mesh.vertex_count(), mesh.vertex_count());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

inline double newton_potential(const Vec2& x) { return -0.25 * x.squaredNorm(); }
inline Vec2 newton_gradient(const Vec2& x) { return -0.5 * x; }

/// Dirichlet data of the reduced harmonic problem for g = 0:
/// g~ = -N_f = |x|^2 / 4 evaluated on the sampled boundary.
inline double newton_dirichlet_data(const Vec2& x) { return 0.25 * x.squaredNorm(); }

inline double dirichlet_data(const EllipseReference& e, const PerturbationSpec& spec,
                             const SampleVector& y, double phi) {
  return newton_dirichlet_data(boundary_point(e, spec, y, phi));
}

inline FeFunction interpolate(const DiskMesh& mesh, const std::function<double(const Vec2&)>& f) {
  FeFunction u;
  u.level = mesh.level;
  u.coeffs.resize(mesh.vertex_count());
  for (int i = 0; i < mesh.vertex_count(); ++i) u.coeffs[i] = f(mesh.vertices[i]);
  return u;
}

namespace detail {
template <class Body>
double quadrature_sum(const ElementGeometry& geom, const FeFunction& u, const Body& body) {
  const DiskMesh& mesh = geom.mesh();
  double acc = 0.0;
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const auto& tri = mesh.triangles[e];
    for (int k = 0; k < geom.n_quad(); ++k) {
      auto shape = geom.shape(k);
      double uh = 0.0;
      Vec2 grad = Vec2::Zero();
      for (int a = 0; a < 3; ++a) {
        uh += u.coeffs[tri.v[a]] * shape[a];
        grad += u.coeffs[tri.v[a]] * geom.grad(e, k, a);
      }
      acc += geom.weight(e, k) * body(geom.point(e, k), uh, grad);
    }
  }
  return acc;
}
}  // namespace detail

/// 1/2 int_B |u_h - ubar|^2 by element quadrature.
inline double evaluate_qoi(const ElementGeometry& geom, const FeFunction& u,
                           const std::function<double(const Vec2&)>& ubar) {
  return 0.5 * detail::quadrature_sum(geom, u, [&](const Vec2& x, double uh, const Vec2&) {
           double d = uh - ubar(x);
           return d * d;
         });
}

/// int_B u_h, the linear functional used by the telescoping checks.
inline double fe_integral(const ElementGeometry& geom, const FeFunction& u) {
  return detail::quadrature_sum(geom, u, [](const Vec2&, double uh, const Vec2&) { return uh; });
}

inline double mesh_area(const ElementGeometry& geom) {
  double acc = 0.0;
  for (int e = 0; e < geom.mesh().triangle_count(); ++e)
    for (int k = 0; k < geom.n_quad(); ++k) acc += geom.weight(e, k);
  return acc;
}

struct ErrorNorms {
  double l2 = 0.0;
  double h1 = 0.0;  // full norm
};

inline ErrorNorms error_norms(
    const ElementGeometry& geom, const FeFunction& u,
    const std::function<std::pair<double, Vec2>(const Vec2&)>& reference) {
  double l2 = 0.0, semi = 0.0;
  const DiskMesh& mesh = geom.mesh();
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const auto& tri = mesh.triangles[e];
    for (int k = 0; k < geom.n_quad(); ++k) {
      auto shape = geom.shape(k);
      double uh = 0.0;
      Vec2 grad = Vec2::Zero();
      for (int a = 0; a < 3; ++a) {
        uh += u.coeffs[tri.v[a]] * shape[a];
        grad += u.coeffs[tri.v[a]] * geom.grad(e, k, a);
      }
      auto [val, gval] = reference(geom.point(e, k));
      double w = geom.weight(e, k);
      l2 += w * (uh - val) * (uh - val);
      semi += w * (grad - gval).squaredNorm();
    }
  }
  ErrorNorms norms;
  norms.l2 = std::sqrt(l2);
  norms.h1 = std::sqrt(l2 + semi);
  return norms;
}

/// Point evaluation by element search: exact barycentric test on straight
/// triangles, Newton inversion of the blended map on curved ones.
inline double evaluate_at(const ElementGeometry& geom, const FeFunction& u, const Vec2& x) {
  const DiskMesh& mesh = geom.mesh();
  const double tol = 1e-10;
  for (int e = 0; e < mesh.triangle_count(); ++e) {
    const auto& tri = mesh.triangles[e];
    detail::ElementMap em = detail::make_element_map(mesh, tri);
    Eigen::Matrix2d j;
    j.col(0) = em.p1 - em.p0;
    j.col(1) = em.p2 - em.p0;
    Vec2 ref = j.colPivHouseholderQr().solve(x - em.p0);
    if (tri.curved) {
      for (int it = 0; it < 30; ++it) {
        Vec2 res = em.map(ref.x(), ref.y()) - x;
        if (res.norm() < 1e-14) break;
        ref -= em.jacobian(ref.x(), ref.y()).inverse() * res;
      }
      if ((em.map(ref.x(), ref.y()) - x).norm() > 1e-10) continue;
    }
    double xi = ref.x(), eta = ref.y();
    if (xi >= -tol && eta >= -tol && xi + eta <= 1.0 + tol) {
      return u.coeffs[tri.v[0]] * (1.0 - xi - eta) + u.coeffs[tri.v[1]] * xi +
             u.coeffs[tri.v[2]] * eta;
    }
  }
  throw std::invalid_argument("evaluate_at: point outside mesh");
}

}  // namespace fembem
