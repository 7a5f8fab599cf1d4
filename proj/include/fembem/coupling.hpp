#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fembem/bem.hpp"
#include "fembem/common.hpp"
#include "fembem/fem.hpp"
#include "fembem/mesh.hpp"

namespace fembem {

/// Solution of one coupled solve: the harmonic FE part on B and the
/// piecewise-constant fluxes on Sigma and Gamma.
struct CoupledSolution {
  FeFunction u_tilde;
  Eigen::VectorXd sigma_sigma;
  Eigen::VectorXd sigma_gamma;
};

/// Dense 3x3 block Galerkin system
///   [ A + W_SS   K_SS^T - B_S^T   K_SG^T ] [ u ]       [ -W_GS ]
///   [ B_S - K_SS     V_SS          V_GS  ] [ s_S ]  =  [  K_GS ] G_G^{-1} g
///   [  -K_SG         V_SG          V_GG  ] [ s_G ]     [ K_GG - B_G ]
struct BlockSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  int n_fe = 0;
  int n_sigma = 0;
  int n_gamma = 0;

  int size() const { return n_fe + n_sigma + n_gamma; }
};

/// Sample-independent data of one discretization level: mesh hierarchy leaf,
/// FE stiffness with the interior block eliminated, and all Sigma-side
/// boundary operators. Immutable after construction; shared across samples.
class LevelContext {
 public:
  explicit LevelContext(int level, int quad_order = 16)
      : level_(level),
        quad_order_(quad_order),
        mesh_(build_disk_mesh(level)),
        geom_(mesh_),
        sigma_(build_sigma_mesh(mesh_)) {
    const int n = mesh_.vertex_count();
    const int m = static_cast<int>(mesh_.boundary_loop.size());

    stiffness_ = assemble_stiffness(geom_);

    // Interior/boundary split of the FE vertices.
    is_boundary_.assign(n, false);
    for (int b : mesh_.boundary_loop) is_boundary_[b] = true;
    interior_.reserve(n - m);
    for (int i = 0; i < n; ++i)
      if (!is_boundary_[i]) interior_.push_back(i);
    interior_pos_.assign(n, -1);
    for (int i = 0; i < static_cast<int>(interior_.size()); ++i) interior_pos_[interior_[i]] = i;

    const int ni = static_cast<int>(interior_.size());
    Eigen::SparseMatrix<double> a_ii(ni, ni);
    Eigen::MatrixXd a_ib = Eigen::MatrixXd::Zero(ni, m);
    Eigen::MatrixXd a_bb = Eigen::MatrixXd::Zero(m, m);
    std::vector<int> boundary_pos(n, -1);
    for (int j = 0; j < m; ++j) boundary_pos[mesh_.boundary_loop[j]] = j;
    {
      std::vector<Eigen::Triplet<double>> triplets;
      for (int col = 0; col < stiffness_.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(stiffness_, col); it; ++it) {
          int r = static_cast<int>(it.row()), c = col;
          if (!is_boundary_[r] && !is_boundary_[c]) {
            triplets.emplace_back(interior_pos_[r], interior_pos_[c], it.value());
          } else if (!is_boundary_[r] && is_boundary_[c]) {
            a_ib(interior_pos_[r], boundary_pos[c]) += it.value();
          } else if (is_boundary_[r] && is_boundary_[c]) {
            a_bb(boundary_pos[r], boundary_pos[c]) += it.value();
          }
        }
      }
      a_ii.setFromTriplets(triplets.begin(), triplets.end());
    }
    interior_factor_.compute(a_ii);
    if (interior_factor_.info() != Eigen::Success)
      throw SingularSystemError("interior stiffness factorization failed");
    interior_map_ = interior_factor_.solve(a_ib);  // A_II^{-1} A_IB
    schur_abb_ = a_bb - a_ib.transpose() * interior_map_;

    // Sigma-side boundary operators (test rows on Sigma).
    v_ss_ = assemble_single_layer(sigma_, sigma_, quad_order_);
    v0_ss_ = assemble_single_layer(sigma_, sigma_, quad_order_, /*with_jacobian=*/false);
    k_ss_ = assemble_double_layer(sigma_, sigma_, quad_order_);
    b_s_ = assemble_mass_B(sigma_, quad_order_);
    Eigen::MatrixXd d = hat_slope_matrix(sigma_);
    w_ss_ = d.transpose() * v0_ss_ * d;
  }

  int level() const { return level_; }
  int quad_order() const { return quad_order_; }
  const DiskMesh& mesh() const { return mesh_; }
  const ElementGeometry& geometry() const { return geom_; }
  const BoundaryMesh& sigma_mesh() const { return sigma_; }
  const Eigen::SparseMatrix<double>& stiffness() const { return stiffness_; }
  const Eigen::MatrixXd& w_sigma_sigma() const { return w_ss_; }
  const Eigen::MatrixXd& v_sigma_sigma() const { return v_ss_; }
  const Eigen::MatrixXd& k_sigma_sigma() const { return k_ss_; }
  const Eigen::MatrixXd& b_sigma() const { return b_s_; }
  int n_boundary() const { return static_cast<int>(mesh_.boundary_loop.size()); }
  /// A_BB - A_BI A_II^{-1} A_IB in boundary-loop ordering.
  const Eigen::MatrixXd& schur_boundary_stiffness() const { return schur_abb_; }
  /// A_II^{-1} A_IB: reconstructs interior values from boundary values.
  const Eigen::MatrixXd& interior_map() const { return interior_map_; }
  const std::vector<int>& interior_vertices() const { return interior_; }

 private:
  int level_;
  int quad_order_;
  DiskMesh mesh_;
  ElementGeometry geom_;
  BoundaryMesh sigma_;
  Eigen::SparseMatrix<double> stiffness_;
  std::vector<bool> is_boundary_;
  std::vector<int> interior_;
  std::vector<int> interior_pos_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> interior_factor_;
  Eigen::MatrixXd interior_map_;  // A_II^{-1} A_IB, boundary columns in loop order
  Eigen::MatrixXd schur_abb_;     // A_BB - A_BI A_II^{-1} A_IB
  Eigen::MatrixXd v_ss_, v0_ss_, k_ss_, b_s_, w_ss_;
};

namespace detail {

/// Gamma-side operators for one sampled boundary.
struct GammaOperators {
  Eigen::MatrixXd v_gg, k_gg, b_g, g_g;  // Gamma x Gamma
  Eigen::MatrixXd v_gs;                  // trial Gamma, test Sigma
  Eigen::MatrixXd k_gs;                  // trial Gamma (linear), test Sigma
  Eigen::MatrixXd k_sg;                  // trial Sigma (linear), test Gamma
  Eigen::MatrixXd w_gs;                  // trial Gamma (linear), test Sigma (linear)
  Eigen::VectorXd g_data;                // (g~, phi_k^Gamma)
};

inline GammaOperators assemble_gamma_operators(const LevelContext& ctx, const BoundaryMesh& gamma,
                                               const std::function<double(const Vec2&)>& data) {
  GammaOperators ops;
  const BoundaryMesh& sigma = ctx.sigma_mesh();
  const int order = ctx.quad_order();
  auto pair = single_layer_both(gamma, sigma, order);
  ops.v_gs = std::move(pair.v);
  ops.w_gs = sigma.normal_sign * gamma.normal_sign *
             detail::slopes_left(detail::slopes_right(pair.v0, gamma), sigma);
  ops.v_gg = assemble_single_layer(gamma, gamma, order);
  ops.k_gg = assemble_double_layer(gamma, gamma, order);
  ops.k_gs = assemble_double_layer(gamma, sigma, order);
  ops.k_sg = assemble_double_layer(sigma, gamma, order);
  ops.b_g = assemble_mass_B(gamma, order);
  ops.g_g = assemble_mass_G(gamma, order);
  ops.g_data = boundary_data_vector(gamma, data, order);
  return ops;
}

}  // namespace detail

/// Assembles the full dense block system for one sampled boundary and
/// Dirichlet data. Intended for moderate levels; the sampling path uses the
/// reduced solver below.
inline BlockSystem assemble_system(const LevelContext& ctx, const BoundaryMesh& gamma,
                                   const std::function<double(const Vec2&)>& data) {
  const DiskMesh& mesh = ctx.mesh();
  const int n = mesh.vertex_count();
  const int m = ctx.n_boundary();
  const int mg = gamma.n_panels;
  detail::GammaOperators ops = detail::assemble_gamma_operators(ctx, gamma, data);

  BlockSystem sys;
  sys.n_fe = n;
  sys.n_sigma = m;
  sys.n_gamma = mg;
  sys.matrix = Eigen::MatrixXd::Zero(sys.size(), sys.size());
  sys.rhs = Eigen::VectorXd::Zero(sys.size());

  const auto& loop = mesh.boundary_loop;

  // FE block: A plus W_SS scattered onto the boundary vertices.
  for (int col = 0; col < ctx.stiffness().outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(ctx.stiffness(), col); it; ++it)
      sys.matrix(it.row(), col) += it.value();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) sys.matrix(loop[i], loop[j]) += ctx.w_sigma_sigma()(i, j);

  // Couplings of u with the fluxes.
  Eigen::MatrixXd k_minus_b_t = (ctx.k_sigma_sigma() - ctx.b_sigma()).transpose();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      sys.matrix(loop[i], n + j) += k_minus_b_t(i, j);
      sys.matrix(n + j, loop[i]) += ctx.b_sigma()(j, i) - ctx.k_sigma_sigma()(j, i);
    }
    for (int j = 0; j < mg; ++j) {
      sys.matrix(loop[i], n + m + j) += ops.k_sg(j, i);
      sys.matrix(n + m + j, loop[i]) -= ops.k_sg(j, i);
    }
  }

  sys.matrix.block(n, n, m, m) = ctx.v_sigma_sigma();
  sys.matrix.block(n, n + m, m, mg) = ops.v_gs;
  sys.matrix.block(n + m, n, mg, m) = ops.v_gs.transpose();
  sys.matrix.block(n + m, n + m, mg, mg) = ops.v_gg;

  // Right-hand side through the L2(Gamma) projection of the data.
  Eigen::VectorXd g_hat = ops.g_g.llt().solve(ops.g_data);
  Eigen::VectorXd r_fe = -ops.w_gs * g_hat;
  for (int i = 0; i < m; ++i) sys.rhs[loop[i]] = r_fe[i];
  sys.rhs.segment(n, m) = ops.k_gs * g_hat;
  sys.rhs.segment(n + m, mg) = (ops.k_gg - ops.b_g) * g_hat;
  return sys;
}

inline BlockSystem assemble_system(const LevelContext& ctx, const SampleVector& y) {
  BoundaryMesh gamma = build_gamma_mesh(y, ctx.level());
  return assemble_system(ctx, gamma, newton_dirichlet_data);
}

/// Dense direct solve of the block system with partial pivoting, with a
/// residual check.
inline CoupledSolution solve(const LevelContext& ctx, const BlockSystem& sys) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys.matrix);
  Eigen::VectorXd x = lu.solve(sys.rhs);
  double rhs_norm = sys.rhs.norm();
  double residual = (sys.matrix * x - sys.rhs).norm();
  if (!x.allFinite() || residual > 1e-10 * std::max(rhs_norm, 1e-30))
    throw SingularSystemError("coupled solve: residual too large");
  CoupledSolution sol;
  sol.u_tilde.level = ctx.level();
  sol.u_tilde.coeffs = x.head(sys.n_fe);
  sol.sigma_sigma = x.segment(sys.n_fe, sys.n_sigma);
  sol.sigma_gamma = x.tail(sys.n_gamma);
  return sol;
}

/// Reduced solver: interior FE unknowns are eliminated through the cached
/// level context, so one sample costs only the Gamma-side assembly plus a
/// dense solve of dimension 3 * (8 * 2^level).
inline CoupledSolution solve_reduced(const LevelContext& ctx, const BoundaryMesh& gamma,
                                     const std::function<double(const Vec2&)>& data) {
  const DiskMesh& mesh = ctx.mesh();
  const int m = ctx.n_boundary();
  const int mg = gamma.n_panels;
  detail::GammaOperators ops = detail::assemble_gamma_operators(ctx, gamma, data);

  Eigen::MatrixXd mat(m + m + mg, m + m + mg);
  mat.block(0, 0, m, m) = ctx.schur_boundary_stiffness() + ctx.w_sigma_sigma();
  mat.block(0, m, m, m) = (ctx.k_sigma_sigma() - ctx.b_sigma()).transpose();
  mat.block(0, 2 * m, m, mg) = ops.k_sg.transpose();
  mat.block(m, 0, m, m) = ctx.b_sigma() - ctx.k_sigma_sigma();
  mat.block(m, m, m, m) = ctx.v_sigma_sigma();
  mat.block(m, 2 * m, m, mg) = ops.v_gs;
  mat.block(2 * m, 0, mg, m) = -ops.k_sg;
  mat.block(2 * m, m, mg, m) = ops.v_gs.transpose();
  mat.block(2 * m, 2 * m, mg, mg) = ops.v_gg;

  Eigen::VectorXd g_hat = ops.g_g.llt().solve(ops.g_data);
  Eigen::VectorXd rhs(m + m + mg);
  rhs.head(m) = -ops.w_gs * g_hat;
  rhs.segment(m, m) = ops.k_gs * g_hat;
  rhs.tail(mg) = (ops.k_gg - ops.b_g) * g_hat;

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(mat);
  Eigen::VectorXd x = lu.solve(rhs);
  double residual = (mat * x - rhs).norm();
  if (!x.allFinite() || residual > 1e-10 * std::max(rhs.norm(), 1e-30))
    throw SingularSystemError("reduced coupled solve: residual too large");

  CoupledSolution sol;
  sol.u_tilde.level = ctx.level();
  sol.u_tilde.coeffs.resize(mesh.vertex_count());
  Eigen::VectorXd u_b = x.head(m);
  Eigen::VectorXd u_i = -ctx.interior_map() * u_b;
  for (int j = 0; j < m; ++j) sol.u_tilde.coeffs[mesh.boundary_loop[j]] = u_b[j];
  for (int i = 0; i < static_cast<int>(ctx.interior_vertices().size()); ++i)
    sol.u_tilde.coeffs[ctx.interior_vertices()[i]] = u_i[i];
  sol.sigma_sigma = x.segment(m, m);
  sol.sigma_gamma = x.tail(mg);
  return sol;
}

/// Full pipeline for one boundary sample: reduced solve with the Newton
/// Dirichlet data, then u = N_f + u~ reconstructed on B.
inline CoupledSolution solve_sample_full(const LevelContext& ctx, const SampleVector& y) {
  BoundaryMesh gamma = build_gamma_mesh(y, ctx.level());
  return solve_reduced(ctx, gamma, newton_dirichlet_data);
}

inline FeFunction solve_sample(const LevelContext& ctx, const SampleVector& y) {
  CoupledSolution sol = solve_sample_full(ctx, y);
  FeFunction u = interpolate(ctx.mesh(), newton_potential);
  u.coeffs += sol.u_tilde.coeffs;
  return u;
}

}  // namespace fembem
