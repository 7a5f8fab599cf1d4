#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "fembem/common.hpp"
#include "fembem/mesh.hpp"
#include "fembem/quadrature.hpp"

namespace fembem {

/// Fundamental solution of the 2D Laplacian, -(1/2pi) log |x - z|.
inline double fundamental_solution(const Vec2& x, const Vec2& z) {
  double d2 = (x - z).squaredNorm();
  if (d2 == 0.0) throw std::invalid_argument("fundamental_solution: coincident points");
  return -std::log(d2) / (4.0 * kPi);
}

namespace detail {

inline Vec2 right_normal(const Vec2& tangent) { return {tangent.y(), -tangent.x()}; }

/// Kernel of the double layer: dG/dn(z) together with the surface measure of
/// the trial curve, i.e. dG/dn(z) |z'| = sign/(2pi) <x - z, rot z'> / |x-z|^2.
inline double double_layer_kernel(const Vec2& x, const Vec2& z, const Vec2& z_prime,
                                  double normal_sign) {
  Vec2 diff = x - z;
  double d2 = diff.squaredNorm();
  return normal_sign * diff.dot(right_normal(z_prime)) / (kTwoPi * d2);
}

/// Diagonal limit of the double-layer kernel on a smooth curve.
inline double double_layer_kernel_limit(const Vec2& d1, const Vec2& d2, double normal_sign) {
  return normal_sign * d2.dot(right_normal(d1)) / (2.0 * kTwoPi * d1.squaredNorm());
}

/// Per-panel quadrature nodes of a boundary mesh: parameters, points, curve
/// derivatives and |gamma'| at the mapped Gauss nodes.
struct PanelNodes {
  int n_panels = 0;
  int q = 0;
  double h = 0.0;
  Eigen::VectorXd weights;                // GL weights scaled by h
  std::vector<double> param;              // [panel * q + i]
  std::vector<Vec2> point;
  std::vector<Vec2> deriv;
  std::vector<double> jac;
};

inline PanelNodes make_panel_nodes(const BoundaryMesh& mesh, const Rule1d& gl) {
  PanelNodes pn;
  pn.n_panels = mesh.n_panels;
  pn.q = gl.size();
  pn.h = mesh.panel_width();
  pn.weights = pn.h * gl.weights;
  pn.param.resize(pn.n_panels * pn.q);
  pn.point.resize(pn.n_panels * pn.q);
  pn.deriv.resize(pn.n_panels * pn.q);
  pn.jac.resize(pn.n_panels * pn.q);
  for (int p = 0; p < pn.n_panels; ++p) {
    double t0 = mesh.node(p);
    for (int i = 0; i < pn.q; ++i) {
      double t = t0 + pn.h * gl.nodes[i];
      int idx = p * pn.q + i;
      pn.param[idx] = t;
      mesh.curve->point_and_derivative(t, pn.point[idx], pn.deriv[idx]);
      pn.jac[idx] = pn.deriv[idx].norm();
    }
  }
  return pn;
}

/// log(|x(s) - x(t)| / |s - t|) on one curve, stable across the diagonal.
inline double log_distance_ratio(const ParametricCurve& curve, double s, double t, const Vec2& xs,
                                 const Vec2& xt) {
  double dt = s - t;
  if (std::abs(dt) < 1e-14) return 0.5 * std::log(curve.derivative(s).squaredNorm());
  double d2 = (xs - xt).squaredNorm();
  return 0.5 * std::log(d2 / (dt * dt));
}

struct SingularRules {
  Rule1d gl;
  Rule1d lg;   // weight -log x
  Rule1d xlg;  // weight -x log x
};

inline SingularRules make_singular_rules(int order) {
  return {gauss_legendre(order), gauss_log(order), gauss_xlog(order)};
}

/// Triangle {0 <= t <= s <= h} of int log(s-t) W(s,t) ds dt for a weight
/// that factorizes as W(s,t) = ws(s) * wt(t): the inner substitution
/// t = s(1-x) leaves smooth integrands for the Gauss and Gauss-log rules,
/// and the outer s*log(s) weight is handled by the -x log x rule.
template <class Ws, class Wt>
double log_triangle(const SingularRules& r, double h, const Ws& ws, const Wt& wt) {
  const int q = r.gl.size();
  auto inner_plain = [&](double s) {
    double acc = 0.0;
    for (int i = 0; i < q; ++i) acc += r.gl.weights[i] * wt(s * (1.0 - r.gl.nodes[i]));
    return acc;
  };
  auto inner_log = [&](double s) {
    double acc = 0.0;
    for (int i = 0; i < q; ++i) acc -= r.lg.weights[i] * wt(s * (1.0 - r.lg.nodes[i]));
    return acc;
  };
  double term_log = 0.0, term_xlog = 0.0, term_plain = 0.0;
  for (int k = 0; k < q; ++k) {
    double s_gl = h * r.gl.nodes[k];
    double ws_gl = ws(s_gl);
    term_log += r.gl.weights[k] * r.gl.nodes[k] * ws_gl * inner_plain(s_gl);
    term_plain += r.gl.weights[k] * r.gl.nodes[k] * ws_gl * inner_log(s_gl);
    double s_xl = h * r.xlg.nodes[k];
    term_xlog += r.xlg.weights[k] * ws(s_xl) * inner_plain(s_xl);
  }
  return h * h * (std::log(h) * term_log - term_xlog + term_plain);
}

/// Corner-singular triangle {0 <= v <= u <= h} of int log(u+v) W(u,v) du dv
/// with W(u,v) = wu(u) * wv(v); the substitution v = u*x yields the smooth
/// factor log(1+x) plus the u*log(u) outer weight.
template <class Wu, class Wv>
double corner_log_triangle(const SingularRules& r, double h, const Wu& wu, const Wv& wv) {
  const int q = r.gl.size();
  auto inner_plain = [&](double u) {
    double acc = 0.0;
    for (int i = 0; i < q; ++i) acc += r.gl.weights[i] * wv(u * r.gl.nodes[i]);
    return acc;
  };
  auto inner_log1p = [&](double u) {
    double acc = 0.0;
    for (int i = 0; i < q; ++i)
      acc += r.gl.weights[i] * std::log1p(r.gl.nodes[i]) * wv(u * r.gl.nodes[i]);
    return acc;
  };
  double term_log = 0.0, term_xlog = 0.0, term_plain = 0.0;
  for (int k = 0; k < q; ++k) {
    double u_gl = h * r.gl.nodes[k];
    double wu_gl = wu(u_gl);
    term_log += r.gl.weights[k] * r.gl.nodes[k] * wu_gl * inner_plain(u_gl);
    term_plain += r.gl.weights[k] * r.gl.nodes[k] * wu_gl * inner_log1p(u_gl);
    double u_xl = h * r.xlg.nodes[k];
    term_xlog += r.xlg.weights[k] * wu(u_xl) * inner_plain(u_xl);
  }
  return h * h * (std::log(h) * term_log - term_xlog + term_plain);
}

/// Galerkin single-layer entry for one panel against itself,
/// int int G(x(s), x(t)) W ds dt with W = |x'(s)||x'(t)| or 1.
inline double coincident_single_layer(const BoundaryMesh& mesh, int panel,
                                      const SingularRules& r, bool with_jacobian) {
  const ParametricCurve& curve = *mesh.curve;
  const double h = mesh.panel_width();
  const double t0 = mesh.node(panel);
  const int q = r.gl.size();

  // Smooth remainder: log of the chord-to-parameter ratio.
  double ratio_part = 0.0;
  std::vector<double> node_jac(q);
  std::vector<Vec2> node_pt(q);
  for (int i = 0; i < q; ++i) {
    double s = t0 + h * r.gl.nodes[i];
    Vec2 d;
    curve.point_and_derivative(s, node_pt[i], d);
    node_jac[i] = with_jacobian ? d.norm() : 1.0;
  }
  for (int i = 0; i < q; ++i) {
    double s = t0 + h * r.gl.nodes[i];
    for (int j = 0; j < q; ++j) {
      double t = t0 + h * r.gl.nodes[j];
      double lr = log_distance_ratio(curve, s, t, node_pt[i], node_pt[j]);
      ratio_part += (h * r.gl.weights[i]) * (h * r.gl.weights[j]) * lr * node_jac[i] * node_jac[j];
    }
  }

  auto jac = [&](double local) {
    return with_jacobian ? curve.derivative(t0 + local).norm() : 1.0;
  };
  // The weight is symmetric in (s, t), so both triangles contribute equally.
  double log_part = 2.0 * log_triangle(r, h, jac, jac);

  return -(ratio_part + log_part) / kTwoPi;
}

/// Galerkin single-layer entry for two panels sharing one endpoint on the
/// same curve. The shared parameter is c; the test panel runs from c in
/// direction dir_s, the trial panel in direction dir_t = -dir_s.
inline double adjacent_single_layer(const BoundaryMesh& mesh, double c, double dir_s,
                                    const SingularRules& r, bool with_jacobian) {
  const ParametricCurve& curve = *mesh.curve;
  const double h = mesh.panel_width();
  const double dir_t = -dir_s;
  const int q = r.gl.size();

  auto jac = [&](double t) { return with_jacobian ? curve.derivative(t).norm() : 1.0; };

  double ratio_part = 0.0;
  std::vector<Vec2> trial_pt(q);
  std::vector<double> trial_jac(q);
  for (int j = 0; j < q; ++j) {
    double t = c + dir_t * h * r.gl.nodes[j];
    Vec2 d;
    curve.point_and_derivative(t, trial_pt[j], d);
    trial_jac[j] = with_jacobian ? d.norm() : 1.0;
  }
  for (int i = 0; i < q; ++i) {
    double s = c + dir_s * h * r.gl.nodes[i];
    Vec2 xs, ds;
    curve.point_and_derivative(s, xs, ds);
    double js = with_jacobian ? ds.norm() : 1.0;
    for (int j = 0; j < q; ++j) {
      double t = c + dir_t * h * r.gl.nodes[j];
      double lr = log_distance_ratio(curve, s, t, xs, trial_pt[j]);
      ratio_part += (h * r.gl.weights[i]) * (h * r.gl.weights[j]) * lr * js * trial_jac[j];
    }
  }

  auto w_test = [&](double u) { return jac(c + dir_s * u); };
  auto w_trial = [&](double v) { return jac(c + dir_t * v); };
  double log_part =
      corner_log_triangle(r, h, w_test, w_trial) + corner_log_triangle(r, h, w_trial, w_test);

  return -(ratio_part + log_part) / kTwoPi;
}

inline bool same_mesh(const BoundaryMesh& a, const BoundaryMesh& b) { return &a == &b; }

inline void require_valid_pair(const BoundaryMesh& trial, const BoundaryMesh& test) {
  if (!same_mesh(trial, test) && trial.curve == test.curve) {
    throw std::invalid_argument("bem: same curve must be passed as the identical mesh object");
  }
}

/// Panel nodes at three quadrature orders plus panel centers and chord
/// lengths. Galerkin integrals of well-separated panel pairs converge
/// geometrically in the separation ratio, so far pairs need far fewer Gauss
/// points for the same entry accuracy; the grade is a pure function of the
/// panel geometry.
struct GradedNodes {
  PanelNodes full, mid, far;
  std::vector<Vec2> center;
  std::vector<double> chord;

  const PanelNodes& pick(int grade) const { return grade == 0 ? full : (grade == 1 ? mid : far); }
};

/// Minimum point count for one panel of the mesh to resolve its oscillatory
/// content (about one point per unit of frequency times parametric width).
inline int oscillation_floor(const BoundaryMesh& mesh) {
  return static_cast<int>(std::ceil(mesh.oscillation * mesh.panel_width()));
}

inline GradedNodes make_graded_nodes(const BoundaryMesh& mesh, int order, int floor_pts) {
  GradedNodes gn;
  gn.full = make_panel_nodes(mesh, gauss_legendre(std::max(order, floor_pts)));
  gn.mid = make_panel_nodes(mesh, gauss_legendre(std::max(std::max(8, order / 2), floor_pts)));
  gn.far =
      make_panel_nodes(mesh, gauss_legendre(std::max(std::max(6, 3 * order / 8), floor_pts)));
  gn.center.resize(mesh.n_panels);
  gn.chord.resize(mesh.n_panels);
  for (int p = 0; p < mesh.n_panels; ++p) {
    Vec2 a = mesh.endpoint(p), b = mesh.endpoint(p + 1);
    gn.center[p] = 0.5 * (a + b);
    gn.chord[p] = (b - a).norm();
  }
  return gn;
}

inline int pair_grade(const GradedNodes& test, int p, const GradedNodes& trial, int q) {
  double scale = std::max(test.chord[p], trial.chord[q]);
  double dist = (test.center[p] - trial.center[q]).norm();
  if (dist >= 8.0 * scale) return 2;
  if (dist >= 3.0 * scale) return 1;
  return 0;
}

}  // namespace detail

/// Galerkin single-layer matrix with piecewise-constant trial and test
/// densities: rows are test panels, columns trial panels. with_jacobian=false
/// drops the arc-length factors, yielding the parametric bilinear form used
/// by the Maue identity.
inline Eigen::MatrixXd assemble_single_layer(const BoundaryMesh& trial, const BoundaryMesh& test,
                                             int order = 16, bool with_jacobian = true) {
  detail::require_valid_pair(trial, test);
  const int floor_pts =
      std::max(detail::oscillation_floor(test), detail::oscillation_floor(trial));
  const detail::SingularRules rules = detail::make_singular_rules(std::max(order, floor_pts));
  const detail::GradedNodes tg = detail::make_graded_nodes(test, order, floor_pts);
  const detail::GradedNodes sg = detail::make_graded_nodes(trial, order, floor_pts);
  const bool singular = detail::same_mesh(trial, test);
  const int n_test = test.n_panels, n_trial = trial.n_panels;
  Eigen::MatrixXd mat(n_test, n_trial);

  parallel_for(n_test, [&](std::ptrdiff_t p) {
    for (int q = 0; q < n_trial; ++q) {
      if (singular) {
        int d = (q - static_cast<int>(p) + n_trial) % n_trial;
        if (d == 0) {
          mat(p, q) = detail::coincident_single_layer(test, p, rules, with_jacobian);
          continue;
        }
        if (d == 1 || d == n_trial - 1) {
          // Shared endpoint: end of p for the successor, start of p otherwise.
          double c = (d == 1) ? test.node(p) + tg.full.h : test.node(p);
          double dir_s = (d == 1) ? -1.0 : 1.0;
          mat(p, q) = detail::adjacent_single_layer(test, c, dir_s, rules, with_jacobian);
          continue;
        }
      }
      int grade = detail::pair_grade(tg, p, sg, q);
      const detail::PanelNodes& tn = tg.pick(grade);
      const detail::PanelNodes& sn = sg.pick(grade);
      double acc = 0.0;
      for (int i = 0; i < tn.q; ++i) {
        const int ti = p * tn.q + i;
        const double wj_i = tn.weights[i] * (with_jacobian ? tn.jac[ti] : 1.0);
        for (int j = 0; j < sn.q; ++j) {
          const int sj = q * sn.q + j;
          double d2 = (tn.point[ti] - sn.point[sj]).squaredNorm();
          acc += wj_i * sn.weights[j] * (with_jacobian ? sn.jac[sj] : 1.0) * std::log(d2);
        }
      }
      mat(p, q) = -acc / (4.0 * kPi);
    }
  });
  return mat;
}

/// Galerkin double-layer matrix: piecewise-linear trial densities on the
/// trial mesh (columns, one per panel endpoint) against piecewise-constant
/// test densities (rows, one per test panel). The trial mesh normal
/// orientation enters through its normal_sign.
inline Eigen::MatrixXd assemble_double_layer(const BoundaryMesh& trial, const BoundaryMesh& test,
                                             int order = 16) {
  detail::require_valid_pair(trial, test);
  const int floor_pts =
      std::max(detail::oscillation_floor(test), detail::oscillation_floor(trial));
  const detail::GradedNodes tg = detail::make_graded_nodes(test, order, floor_pts);
  const detail::GradedNodes sg = detail::make_graded_nodes(trial, order, floor_pts);
  const bool singular = detail::same_mesh(trial, test);
  const int n_test = test.n_panels, n_trial = trial.n_panels;
  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(n_test, n_trial);
  const double h_trial = trial.panel_width();

  parallel_for(n_test, [&](std::ptrdiff_t p) {
    for (int q = 0; q < n_trial; ++q) {
      int grade = singular ? 0 : detail::pair_grade(tg, p, sg, q);
      if (singular) {
        int d = std::abs(static_cast<int>(q) - static_cast<int>(p));
        d = std::min(d, n_trial - d);
        if (d > 1) grade = detail::pair_grade(tg, p, sg, q);
      }
      const detail::PanelNodes& tn = tg.pick(grade);
      const detail::PanelNodes& sn = sg.pick(grade);
      double acc_left = 0.0, acc_right = 0.0;  // hats at vertex q and q+1
      for (int i = 0; i < tn.q; ++i) {
        const int ti = p * tn.q + i;
        const double wj_i = tn.weights[i] * tn.jac[ti];
        for (int j = 0; j < sn.q; ++j) {
          const int sj = q * sn.q + j;
          double k;
          if (singular && p == static_cast<int>(q) && i == j) {
            k = detail::double_layer_kernel_limit(sn.deriv[sj],
                                                  trial.curve->second_derivative(sn.param[sj]),
                                                  trial.normal_sign);
          } else {
            k = detail::double_layer_kernel(tn.point[ti], sn.point[sj], sn.deriv[sj],
                                            trial.normal_sign);
          }
          double contrib = wj_i * sn.weights[j] * k;
          double x_loc = (sn.param[sj] - trial.node(q)) / h_trial;
          acc_left += contrib * (1.0 - x_loc);
          acc_right += contrib * x_loc;
        }
      }
      mat(p, q) += acc_left;
      mat(p, (q + 1) % n_trial) += acc_right;
    }
  });
  return mat;
}

/// Difference matrix mapping piecewise-linear vertex values to the
/// piecewise-constant parametric slopes of the hat basis.
inline Eigen::MatrixXd hat_slope_matrix(const BoundaryMesh& mesh) {
  const int n = mesh.n_panels;
  const double inv_h = 1.0 / mesh.panel_width();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int p = 0; p < n; ++p) {
    d(p, p) = -inv_h;
    d(p, (p + 1) % n) = inv_h;
  }
  return d;
}

namespace detail {

/// x * D_mesh without forming the difference matrix.
inline Eigen::MatrixXd slopes_right(const Eigen::MatrixXd& x, const BoundaryMesh& mesh) {
  const int n = mesh.n_panels;
  const double inv_h = 1.0 / mesh.panel_width();
  Eigen::MatrixXd y(x.rows(), n);
  for (int k = 0; k < n; ++k) y.col(k) = inv_h * (x.col((k - 1 + n) % n) - x.col(k));
  return y;
}

/// D_mesh^T * x without forming the difference matrix.
inline Eigen::MatrixXd slopes_left(const Eigen::MatrixXd& x, const BoundaryMesh& mesh) {
  const int n = mesh.n_panels;
  const double inv_h = 1.0 / mesh.panel_width();
  Eigen::MatrixXd y(n, x.cols());
  for (int k = 0; k < n; ++k) y.row(k) = inv_h * (x.row((k - 1 + n) % n) - x.row(k));
  return y;
}

}  // namespace detail

/// Hypersingular Galerkin matrix through the Maue identity,
/// (W u, v) = (V du/dt, dv/dt) in the curve parameters; rows are test
/// vertices, columns trial vertices. Sign flips of the mesh normals carry
/// over, since W contains one normal derivative per curve.
inline Eigen::MatrixXd assemble_hypersingular(const BoundaryMesh& trial, const BoundaryMesh& test,
                                              int order = 16) {
  Eigen::MatrixXd v0 = assemble_single_layer(trial, test, order, /*with_jacobian=*/false);
  double sign = trial.normal_sign * test.normal_sign;
  return sign * detail::slopes_left(detail::slopes_right(v0, trial), test);
}

/// B_Phi[k, k'] = 1/2 (phi_k', psi_k): rows test panels, columns vertices.
inline Eigen::MatrixXd assemble_mass_B(const BoundaryMesh& mesh, int order = 16) {
  const Rule1d gl = gauss_legendre(std::max(order, detail::oscillation_floor(mesh)));
  const detail::PanelNodes pn = detail::make_panel_nodes(mesh, gl);
  const int n = mesh.n_panels;
  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(n, n);
  for (int p = 0; p < n; ++p) {
    for (int i = 0; i < pn.q; ++i) {
      double w = 0.5 * pn.weights[i] * pn.jac[p * pn.q + i];
      mat(p, p) += w * (1.0 - gl.nodes[i]);
      mat(p, (p + 1) % n) += w * gl.nodes[i];
    }
  }
  return mat;
}

/// Periodic piecewise-linear mass matrix G_Phi.
inline Eigen::MatrixXd assemble_mass_G(const BoundaryMesh& mesh, int order = 16) {
  const Rule1d gl = gauss_legendre(std::max(order, detail::oscillation_floor(mesh)));
  const detail::PanelNodes pn = detail::make_panel_nodes(mesh, gl);
  const int n = mesh.n_panels;
  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(n, n);
  for (int p = 0; p < n; ++p) {
    int l = p, r = (p + 1) % n;
    for (int i = 0; i < pn.q; ++i) {
      double w = pn.weights[i] * pn.jac[p * pn.q + i];
      double hl = 1.0 - gl.nodes[i], hr = gl.nodes[i];
      mat(l, l) += w * hl * hl;
      mat(l, r) += w * hl * hr;
      mat(r, l) += w * hr * hl;
      mat(r, r) += w * hr * hr;
    }
  }
  return mat;
}

/// Data vector [ (f, phi_k) ]_k against the piecewise-linear basis, with f
/// evaluated at curve points.
inline Eigen::VectorXd boundary_data_vector(const BoundaryMesh& mesh,
                                            const std::function<double(const Vec2&)>& f,
                                            int order = 16) {
  const Rule1d gl = gauss_legendre(std::max(order, detail::oscillation_floor(mesh)));
  const detail::PanelNodes pn = detail::make_panel_nodes(mesh, gl);
  const int n = mesh.n_panels;
  Eigen::VectorXd vec = Eigen::VectorXd::Zero(n);
  for (int p = 0; p < n; ++p) {
    for (int i = 0; i < pn.q; ++i) {
      int idx = p * pn.q + i;
      double w = pn.weights[i] * pn.jac[idx] * f(pn.point[idx]);
      vec[p] += w * (1.0 - gl.nodes[i]);
      vec[(p + 1) % n] += w * gl.nodes[i];
    }
  }
  return vec;
}

/// Single-layer potential of a piecewise-constant density, evaluated off the
/// curve.
inline double single_layer_potential(const BoundaryMesh& mesh, const Eigen::VectorXd& density,
                                     const Vec2& x, int order = 16) {
  const Rule1d gl = gauss_legendre(order);
  const detail::PanelNodes pn = detail::make_panel_nodes(mesh, gl);
  double acc = 0.0;
  for (int p = 0; p < mesh.n_panels; ++p) {
    for (int i = 0; i < pn.q; ++i) {
      int idx = p * pn.q + i;
      acc += pn.weights[i] * pn.jac[idx] * density[p] * fundamental_solution(x, pn.point[idx]);
    }
  }
  return acc;
}

/// Double-layer potential of a piecewise-linear density, evaluated off the
/// curve; uses the mesh's normal orientation.
inline double double_layer_potential(const BoundaryMesh& mesh, const Eigen::VectorXd& density,
                                     const Vec2& x, int order = 16) {
  const Rule1d gl = gauss_legendre(order);
  const detail::PanelNodes pn = detail::make_panel_nodes(mesh, gl);
  double acc = 0.0;
  for (int p = 0; p < mesh.n_panels; ++p) {
    double dl = density[p], dr = density[(p + 1) % mesh.n_panels];
    for (int i = 0; i < pn.q; ++i) {
      int idx = p * pn.q + i;
      double val = dl * (1.0 - gl.nodes[i]) + dr * gl.nodes[i];
      acc += pn.weights[i] * val *
             detail::double_layer_kernel(x, pn.point[idx], pn.deriv[idx], mesh.normal_sign);
    }
  }
  return acc;
}

namespace detail {

/// Single pass producing the single layer with and without arc-length
/// factors; the parametric variant feeds the Maue identity. Only for two
/// distinct, well-separated curves.
struct SingleLayerPair {
  Eigen::MatrixXd v;   // with Jacobians
  Eigen::MatrixXd v0;  // parametric
};

inline SingleLayerPair single_layer_both(const BoundaryMesh& trial, const BoundaryMesh& test,
                                         int order = 16) {
  require_valid_pair(trial, test);
  if (same_mesh(trial, test))
    throw std::invalid_argument("single_layer_both: expects distinct curves");
  const int floor_pts = std::max(oscillation_floor(test), oscillation_floor(trial));
  const GradedNodes tg = make_graded_nodes(test, order, floor_pts);
  const GradedNodes sg = make_graded_nodes(trial, order, floor_pts);
  SingleLayerPair out;
  out.v.resize(test.n_panels, trial.n_panels);
  out.v0.resize(test.n_panels, trial.n_panels);
  parallel_for(test.n_panels, [&](std::ptrdiff_t p) {
    for (int q = 0; q < trial.n_panels; ++q) {
      int grade = pair_grade(tg, p, sg, q);
      const PanelNodes& tn = tg.pick(grade);
      const PanelNodes& sn = sg.pick(grade);
      double acc = 0.0, acc0 = 0.0;
      for (int i = 0; i < tn.q; ++i) {
        const int ti = p * tn.q + i;
        for (int j = 0; j < sn.q; ++j) {
          const int sj = q * sn.q + j;
          double w = tn.weights[i] * sn.weights[j];
          double logd2 = std::log((tn.point[ti] - sn.point[sj]).squaredNorm());
          acc += w * tn.jac[ti] * sn.jac[sj] * logd2;
          acc0 += w * logd2;
        }
      }
      out.v(p, q) = -acc / (4.0 * kPi);
      out.v0(p, q) = -acc0 / (4.0 * kPi);
    }
  });
  return out;
}

}  // namespace detail

}  // namespace fembem
