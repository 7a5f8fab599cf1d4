#include "fembem/coupling.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "fembem/bem.hpp"
#include "test_support.hpp"

using namespace fembem;

namespace {

SampleVector random_sample(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> coeff(-0.5, 0.5);
  SampleVector y(PerturbationSpec{}.dimension());
  for (int i = 0; i < y.dimension(); ++i) y.data[i] = coeff(rng);
  return y;
}

BoundaryMesh synthetic_circle_gamma(double radius, int level) {
  BoundaryMesh bm;
  bm.curve = std::make_shared<CircleCurve>(radius);
  bm.n_panels = 8 << level;
  bm.normal_sign = -1.0;
  return bm;
}

}  // namespace

TEST(AssembleSystem, DimensionAtLevelOne) {
  LevelContext ctx(1);
  BlockSystem sys = assemble_system(ctx, random_sample(1));
  EXPECT_EQ(sys.n_fe, 37);
  EXPECT_EQ(sys.n_sigma, 16);
  EXPECT_EQ(sys.n_gamma, 16);
  EXPECT_EQ(sys.size(), 69);
  EXPECT_EQ(sys.matrix.rows(), 69);
  EXPECT_TRUE(sys.matrix.allFinite());
}

TEST(AssembleSystem, ZeroDataGivesZeroRhsAndSolution) {
  LevelContext ctx(1);
  BoundaryMesh gamma = build_gamma_mesh(random_sample(2), 1);
  BlockSystem sys = assemble_system(ctx, gamma, [](const Vec2&) { return 0.0; });
  EXPECT_EQ(sys.rhs.lpNorm<Eigen::Infinity>(), 0.0);
  CoupledSolution sol = solve(ctx, sys);
  EXPECT_EQ(sol.u_tilde.coeffs.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(sol.sigma_sigma.lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(sol.sigma_gamma.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(AssembleSystem, SigmaBlocksIndependentOfSample) {
  LevelContext ctx(1);
  BlockSystem a = assemble_system(ctx, random_sample(3));
  BlockSystem b = assemble_system(ctx, random_sample(4));
  int n = a.n_fe, m = a.n_sigma;
  // FE block (A + W_SS), the u/sigma_Sigma couplings and V_SS are bitwise
  // equal across samples.
  EXPECT_EQ((a.matrix.block(0, 0, n + m, n + m) - b.matrix.block(0, 0, n + m, n + m))
                .lpNorm<Eigen::Infinity>(),
            0.0);
}

TEST(AssembleSystem, FeBlockEqualsStiffnessPlusHypersingular) {
  LevelContext ctx(1);
  const DiskMesh& mesh = ctx.mesh();
  BlockSystem sys = assemble_system(ctx, random_sample(5));
  // Independent assembly through the public module operations.
  Eigen::MatrixXd expected = Eigen::MatrixXd(ctx.stiffness());
  BoundaryMesh sigma = build_sigma_mesh(mesh);
  Eigen::MatrixXd w = assemble_hypersingular(sigma, sigma);
  int m = ctx.n_boundary();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      expected(mesh.boundary_loop[i], mesh.boundary_loop[j]) += w(i, j);
  EXPECT_LT((sys.matrix.block(0, 0, sys.n_fe, sys.n_fe) - expected).lpNorm<Eigen::Infinity>(),
            1e-14);
}

TEST(AssembleSystem, AdjointBlocksAreExactTransposes) {
  LevelContext ctx(1);
  BlockSystem sys = assemble_system(ctx, random_sample(6));
  int n = sys.n_fe, m = sys.n_sigma, mg = sys.n_gamma;
  const auto& loop = ctx.mesh().boundary_loop;
  // (1,2) block vs (2,1) block: K^T - B^T against B - K, matched entrywise.
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      EXPECT_EQ(sys.matrix(loop[i], n + j), -sys.matrix(n + j, loop[i]));
  // (1,3) vs (3,1): K_SG^T against -K_SG.
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < mg; ++j)
      EXPECT_EQ(sys.matrix(loop[i], n + m + j), -sys.matrix(n + m + j, loop[i]));
  // (2,3) vs (3,2): V_GS against its transpose.
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < mg; ++j)
      EXPECT_EQ(sys.matrix(n + i, n + m + j), sys.matrix(n + m + j, n + i));
}

TEST(Solve, ResidualInvariantHolds) {
  LevelContext ctx(1);
  BlockSystem sys = assemble_system(ctx, random_sample(7));
  CoupledSolution sol = solve(ctx, sys);
  Eigen::VectorXd x(sys.size());
  x.head(sys.n_fe) = sol.u_tilde.coeffs;
  x.segment(sys.n_fe, sys.n_sigma) = sol.sigma_sigma;
  x.tail(sys.n_gamma) = sol.sigma_gamma;
  EXPECT_LT((sys.matrix * x - sys.rhs).norm(), 1e-10 * sys.rhs.norm());
}

TEST(Solve, ReducedPathMatchesDensePath) {
  for (int level : {1, 2}) {
    LevelContext ctx(level);
    SampleVector y = random_sample(8 + level);
    BoundaryMesh gamma = build_gamma_mesh(y, level);
    BlockSystem sys = assemble_system(ctx, gamma, newton_dirichlet_data);
    CoupledSolution dense = solve(ctx, sys);
    CoupledSolution reduced = solve_reduced(ctx, gamma, newton_dirichlet_data);
    EXPECT_LT((dense.u_tilde.coeffs - reduced.u_tilde.coeffs).lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_LT((dense.sigma_sigma - reduced.sigma_sigma).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_LT((dense.sigma_gamma - reduced.sigma_gamma).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Solve, RadialExactSolutionOnSyntheticCircle) {
  // Gamma = circle of radius R, g~ = R^2/4: exact u~ is the constant R^2/4
  // and u = (R^2 - |x|^2)/4.
  const double radius = 0.5;
  const double c = radius * radius / 4.0;
  std::vector<double> l2_errors;
  for (int level = 1; level <= 4; ++level) {
    LevelContext ctx(level);
    BoundaryMesh gamma = synthetic_circle_gamma(radius, level);
    CoupledSolution sol = solve_reduced(ctx, gamma, [&](const Vec2&) { return c; });
    // The constant solution lies in every discrete space; it is reproduced
    // up to quadrature and solver tolerances.
    EXPECT_LT((sol.u_tilde.coeffs.array() - c).abs().maxCoeff(), 1e-8);
    EXPECT_LT(sol.sigma_sigma.lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_LT(sol.sigma_gamma.lpNorm<Eigen::Infinity>(), 1e-8);
    FeFunction u = interpolate(ctx.mesh(), newton_potential);
    u.coeffs += sol.u_tilde.coeffs;
    auto ref = [&](const Vec2& x) {
      return std::make_pair((radius * radius - x.squaredNorm()) / 4.0, Vec2(-0.5 * x));
    };
    ErrorNorms norms = error_norms(ctx.geometry(), u, ref);
    l2_errors.push_back(norms.l2);
  }
  // L2 error follows rate ~2, driven by the P1 interpolation of N_f.
  for (std::size_t i = 1; i < l2_errors.size(); ++i) {
    double rate = std::log2(l2_errors[i - 1] / l2_errors[i]);
    EXPECT_GT(rate, 1.7) << "level pair " << i;
    EXPECT_LT(rate, 2.3) << "level pair " << i;
  }
}

TEST(Solve, ManufacturedLinearHarmonicStudy) {
  // g~ = x1: the harmonic part is (numerically) inside the P1 space, so the
  // error is flux-limited: u~ converges at the superconvergent order ~3/2 in
  // H1 while sigma_Sigma approximates n_1 at order 1 in L2.
  SampleVector y(PerturbationSpec{}.dimension());
  auto data = [](const Vec2& x) { return x.x(); };
  auto ref = [](const Vec2& x) { return std::make_pair(x.x(), Vec2(1.0, 0.0)); };
  std::vector<double> h1, sigma_l2;
  Rule1d gl = gauss_legendre(16);
  for (int level = 1; level <= 4; ++level) {
    LevelContext ctx(level);
    BoundaryMesh gamma = build_gamma_mesh(y, level);
    CoupledSolution sol = solve_reduced(ctx, gamma, data);
    h1.push_back(error_norms(ctx.geometry(), sol.u_tilde, ref).h1);
    const BoundaryMesh& sm = ctx.sigma_mesh();
    double err2 = 0.0;
    for (int p = 0; p < sm.n_panels; ++p) {
      for (int i = 0; i < gl.size(); ++i) {
        double t = sm.node(p) + sm.panel_width() * gl.nodes[i];
        double diff = sol.sigma_sigma[p] - std::cos(t);
        err2 += sm.panel_width() * gl.weights[i] * 0.2 * diff * diff;
      }
    }
    sigma_l2.push_back(std::sqrt(err2));
  }
  for (std::size_t i = 1; i < h1.size(); ++i) {
    double rate = std::log2(h1[i - 1] / h1[i]);
    EXPECT_GT(rate, 1.3);
    EXPECT_LT(rate, 1.7);
  }
  for (std::size_t i = 1; i < sigma_l2.size(); ++i) {
    double rate = std::log2(sigma_l2[i - 1] / sigma_l2[i]);
    EXPECT_GT(rate, 0.8);
    EXPECT_LT(rate, 1.2);
  }
}

TEST(Solve, ManufacturedQuadraticHarmonicOrders) {
  // g~ = x1^2 - x2^2 exercises genuine H2 content: H1 order ~1, L2 order ~2.
  SampleVector y(PerturbationSpec{}.dimension());
  auto data = [](const Vec2& x) { return x.x() * x.x() - x.y() * x.y(); };
  auto ref = [](const Vec2& x) {
    return std::make_pair(x.x() * x.x() - x.y() * x.y(), Vec2(2.0 * x.x(), -2.0 * x.y()));
  };
  std::vector<double> h1, l2;
  for (int level = 1; level <= 4; ++level) {
    LevelContext ctx(level);
    BoundaryMesh gamma = build_gamma_mesh(y, level);
    CoupledSolution sol = solve_reduced(ctx, gamma, data);
    ErrorNorms norms = error_norms(ctx.geometry(), sol.u_tilde, ref);
    h1.push_back(norms.h1);
    l2.push_back(norms.l2);
  }
  for (std::size_t i = 1; i < h1.size(); ++i) {
    double h1_ratio = h1[i - 1] / h1[i];
    double l2_ratio = l2[i - 1] / l2[i];
    EXPECT_GT(h1_ratio, 1.7);
    EXPECT_LT(h1_ratio, 2.3);
    EXPECT_GT(l2_ratio, 3.4);
    EXPECT_LT(l2_ratio, 4.6);
  }
}

TEST(SolveSample, OriginValueLevelConverges) {
  SampleVector y(PerturbationSpec{}.dimension());
  std::vector<double> u0;
  for (int level = 1; level <= 4; ++level) {
    LevelContext ctx(level);
    FeFunction u = solve_sample(ctx, y);
    u0.push_back(evaluate_at(ctx.geometry(), u, Vec2(0.0, 0.0)));
  }
  double prev = std::abs(u0[1] - u0[0]);
  for (std::size_t i = 2; i < u0.size(); ++i) {
    double diff = std::abs(u0[i] - u0[i - 1]);
    EXPECT_LT(diff, prev);
    prev = diff;
  }
}

TEST(SolveSample, BitwiseReproducible) {
  LevelContext ctx(2);
  SampleVector y = random_sample(42);
  FeFunction a = solve_sample(ctx, y);
  FeFunction b = solve_sample(ctx, y);
  EXPECT_EQ((a.coeffs - b.coeffs).lpNorm<Eigen::Infinity>(), 0.0);
  // A separately built context gives bitwise-identical coefficients too.
  LevelContext ctx2(2);
  FeFunction c = solve_sample(ctx2, y);
  EXPECT_EQ((a.coeffs - c.coeffs).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(SolveSample, ThreadCountDoesNotChangeResults)
{
  SampleVector y = random_sample(77);
  set_thread_count(1);
  LevelContext ctx1(2);
  FeFunction a = solve_sample(ctx1, y);
  set_thread_count(8);
  LevelContext ctx8(2);
  FeFunction b = solve_sample(ctx8, y);
  set_thread_count(0);
  EXPECT_EQ((a.coeffs - b.coeffs).lpNorm<Eigen::Infinity>(), 0.0);
}
