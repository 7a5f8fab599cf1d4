#include "fembem/bem.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fembem/mesh.hpp"
#include "test_support.hpp"

using namespace fembem;

namespace {

BoundaryMesh sigma_mesh(int level) { return build_sigma_mesh(build_disk_mesh(level)); }

BoundaryMesh unperturbed_gamma(int level) {
  SampleVector y(PerturbationSpec{}.dimension());
  return build_gamma_mesh(y, level);
}

double panel_arc_length(const BoundaryMesh& mesh, int p) {
  double t0 = mesh.node(p), h = mesh.panel_width();
  return testsupport::adaptive_quadrature(
      [&](double t) { return mesh.curve->derivative(t).norm(); }, t0, t0 + h, 1e-13);
}

// 64-point tensor-product brute force of the single-layer Galerkin integral
// for one panel pair; the independent oracle for smooth entries.
double brute_force_single_layer(const BoundaryMesh& trial, const BoundaryMesh& test, int p, int q,
                                bool with_jacobian = true) {
  Rule1d gl = gauss_legendre(64);
  double hs = trial.panel_width(), ht = test.panel_width();
  double acc = 0.0;
  for (int i = 0; i < 64; ++i) {
    double s = test.node(p) + ht * gl.nodes[i];
    Vec2 x = test.curve->point(s);
    double jx = with_jacobian ? test.curve->derivative(s).norm() : 1.0;
    for (int j = 0; j < 64; ++j) {
      double t = trial.node(q) + hs * gl.nodes[j];
      Vec2 z = trial.curve->point(t);
      double jz = with_jacobian ? trial.curve->derivative(t).norm() : 1.0;
      acc += ht * gl.weights[i] * hs * gl.weights[j] * jx * jz * fundamental_solution(x, z);
    }
  }
  return acc;
}

}  // namespace

TEST(FundamentalSolution, PointValuesAndSymmetry) {
  EXPECT_DOUBLE_EQ(fundamental_solution(Vec2(0, 0), Vec2(1, 0)), 0.0);
  EXPECT_NEAR(fundamental_solution(Vec2(0, 0), Vec2(std::exp(-1.0), 0)), 1.0 / kTwoPi, 1e-15);
  EXPECT_NEAR(1.0 / kTwoPi, 0.159155, 1e-6);
  EXPECT_THROW(fundamental_solution(Vec2(0.3, 0.2), Vec2(0.3, 0.2)), std::invalid_argument);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vec2 x(c(rng), c(rng)), z(c(rng), c(rng));
    if ((x - z).norm() < 1e-6) continue;
    EXPECT_EQ(fundamental_solution(x, z), fundamental_solution(z, x));
  }
}

TEST(SingleLayer, CircleCenterValueAgainstOracle) {
  // Constant density 1 on the circle of radius R: potential at the center is
  // -R log R. Oracle: adaptive quadrature of the defining integral.
  for (int level : {1, 2}) {
    BoundaryMesh sigma = sigma_mesh(level);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(sigma.n_panels);
    double value = single_layer_potential(sigma, ones, Vec2(0.0, 0.0));
    double oracle = testsupport::adaptive_quadrature(
        [&](double t) {
          return fundamental_solution(Vec2(0.0, 0.0), sigma.curve->point(t)) *
                 sigma.curve->derivative(t).norm();
        },
        0.0, kTwoPi, 1e-13);
    double exact = -0.2 * std::log(0.2);
    EXPECT_NEAR(oracle, exact, 1e-12);
    EXPECT_NEAR(value, exact, 1e-8);
    EXPECT_NEAR(exact, 0.321888, 1e-6);
  }
}

TEST(SingleLayer, RowSumConsistencyOnCircle) {
  // (V 1)(x) = -R log R for every x on the circle, so each row sum equals
  // -R log R times the panel length.
  for (int level : {1, 2, 3, 4}) {
    BoundaryMesh sigma = sigma_mesh(level);
    Eigen::MatrixXd v = assemble_single_layer(sigma, sigma);
    double len = 0.2 * sigma.panel_width();
    double expected = -0.2 * std::log(0.2) * len;
    Eigen::VectorXd sums = v.rowwise().sum();
    for (int p = 0; p < sigma.n_panels; ++p) EXPECT_NEAR(sums[p], expected, 1e-8);
  }
}

TEST(SingleLayer, SymmetricAndPositiveDefinite) {
  for (int level : {1, 2, 3}) {
    BoundaryMesh sigma = sigma_mesh(level);
    Eigen::MatrixXd v = assemble_single_layer(sigma, sigma);
    EXPECT_LT((v - v.transpose()).lpNorm<Eigen::Infinity>(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (v + v.transpose()));
    EXPECT_GT(eig.eigenvalues()[0], 0.0);
  }
  BoundaryMesh gamma = unperturbed_gamma(2);
  Eigen::MatrixXd v = assemble_single_layer(gamma, gamma);
  EXPECT_LT((v - v.transpose()).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(SingleLayer, SmoothEntriesMatchBruteForce) {
  BoundaryMesh gamma = unperturbed_gamma(2);
  int n = gamma.n_panels;
  Eigen::MatrixXd v = assemble_single_layer(gamma, gamma);
  for (int q : {2, n / 4, n / 2, 3 * n / 4}) {
    EXPECT_NEAR(v(0, q), brute_force_single_layer(gamma, gamma, 0, q), 1e-12);
  }
  // Separated curves: every pair is smooth.
  BoundaryMesh sigma = sigma_mesh(2);
  Eigen::MatrixXd v_gs = assemble_single_layer(gamma, sigma);
  EXPECT_NEAR(v_gs(0, 0), brute_force_single_layer(gamma, sigma, 0, 0), 1e-12);
  EXPECT_NEAR(v_gs(5, 9), brute_force_single_layer(gamma, sigma, 5, 9), 1e-12);
}

TEST(SingleLayer, SingularEntriesStableUnderOrderDoubling) {
  for (auto make : {+[] { return sigma_mesh(2); }, +[] { return unperturbed_gamma(2); }}) {
    BoundaryMesh mesh = make();
    Eigen::MatrixXd v16 = assemble_single_layer(mesh, mesh, 16);
    Eigen::MatrixXd v32 = assemble_single_layer(mesh, mesh, 32);
    EXPECT_LT((v16 - v32).lpNorm<Eigen::Infinity>(), 1e-10);
  }
}

TEST(SingleLayer, RejectsSameCurveDifferentObjects) {
  BoundaryMesh a = sigma_mesh(1);
  BoundaryMesh b = a;  // same curve pointer, different mesh object
  EXPECT_THROW(assemble_single_layer(a, b), std::invalid_argument);
}

TEST(DoubleLayer, RowSumIsHalfPanelLengthOnSigma) {
  // K 1 = -1/2 on the curve for outward normals, so row sums are
  // -1/2 (1, psi_p) = -1/2 panel length.
  for (int level : {1, 2, 3, 4}) {
    BoundaryMesh sigma = sigma_mesh(level);
    Eigen::MatrixXd k = assemble_double_layer(sigma, sigma);
    double len = 0.2 * sigma.panel_width();
    Eigen::VectorXd sums = k.rowwise().sum();
    for (int p = 0; p < sigma.n_panels; ++p) EXPECT_NEAR(sums[p], -0.5 * len, 1e-8);
  }
}

TEST(DoubleLayer, RowSumFlipsSignWithInnerNormalOnGamma) {
  BoundaryMesh gamma = unperturbed_gamma(2);
  Eigen::MatrixXd k = assemble_double_layer(gamma, gamma);
  Eigen::VectorXd sums = k.rowwise().sum();
  for (int p = 0; p < gamma.n_panels; ++p) {
    EXPECT_NEAR(sums[p], 0.5 * panel_arc_length(gamma, p), 1e-8);
  }
}

TEST(DoubleLayer, GaussIdentityAtInteriorAndExteriorPoints) {
  BoundaryMesh sigma = sigma_mesh(3);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(sigma.n_panels);
  // Outward normal: -1 inside, 0 outside.
  EXPECT_NEAR(double_layer_potential(sigma, ones, Vec2(0.5, 0.0)), 0.0, 1e-10);
  EXPECT_NEAR(double_layer_potential(sigma, ones, Vec2(0.05, 0.02)), -1.0, 1e-10);
  BoundaryMesh gamma = unperturbed_gamma(3);
  Eigen::VectorXd gones = Eigen::VectorXd::Ones(gamma.n_panels);
  // Inner normal: +1 inside, 0 outside.
  EXPECT_NEAR(double_layer_potential(gamma, gones, Vec2(0.3, 0.0)), 1.0, 1e-10);
  EXPECT_NEAR(double_layer_potential(gamma, gones, Vec2(1.0, 1.0)), 0.0, 1e-10);
}

TEST(DoubleLayer, SeparatedCurvesStableUnderOrderDoubling) {
  BoundaryMesh sigma = sigma_mesh(2);
  BoundaryMesh gamma = unperturbed_gamma(2);
  Eigen::MatrixXd k16 = assemble_double_layer(gamma, sigma, 16);
  Eigen::MatrixXd k64 = assemble_double_layer(gamma, sigma, 64);
  EXPECT_LT((k16 - k64).lpNorm<Eigen::Infinity>(), 1e-12);
  Eigen::MatrixXd kg16 = assemble_double_layer(gamma, gamma, 16);
  Eigen::MatrixXd kg32 = assemble_double_layer(gamma, gamma, 32);
  EXPECT_LT((kg16 - kg32).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Hypersingular, AnnihilatesConstants) {
  BoundaryMesh sigma = sigma_mesh(2);
  Eigen::MatrixXd w = assemble_hypersingular(sigma, sigma);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(sigma.n_panels);
  EXPECT_LT((w * ones).lpNorm<Eigen::Infinity>(), 1e-10);
  EXPECT_LT((w.transpose() * ones).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Hypersingular, SymmetricPositiveSemidefiniteRankDeficiencyOne) {
  for (int level : {1, 2, 3}) {
    BoundaryMesh sigma = sigma_mesh(level);
    Eigen::MatrixXd w = assemble_hypersingular(sigma, sigma);
    EXPECT_LT((w - w.transpose()).lpNorm<Eigen::Infinity>(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (w + w.transpose()));
    EXPECT_LT(std::abs(eig.eigenvalues()[0]), 1e-11);
    EXPECT_GT(eig.eigenvalues()[1], 1e-8);
  }
}

TEST(Hypersingular, CrossCurveAgreesWithFiniteDifferenceOracle) {
  // Galerkin value (W_{Gamma Sigma} u, v) against a finite-difference normal
  // derivative of the double-layer potential, using the mesh normals.
  BoundaryMesh sigma = sigma_mesh(1);
  BoundaryMesh gamma = unperturbed_gamma(1);
  int m = sigma.n_panels, mg = gamma.n_panels;
  Eigen::VectorXd u(mg), v(m);
  for (int j = 0; j < mg; ++j) u[j] = std::cos(gamma.node(j));
  for (int j = 0; j < m; ++j) v[j] = std::sin(sigma.node(j)) + 0.3;

  Eigen::MatrixXd w_gs = assemble_hypersingular(gamma, sigma);
  double galerkin = v.dot(w_gs * u);

  Rule1d gl = gauss_legendre(32);
  const double step = 1e-5;
  double oracle = 0.0;
  for (int p = 0; p < m; ++p) {
    double t0 = sigma.node(p), h = sigma.panel_width();
    for (int i = 0; i < gl.size(); ++i) {
      double t = t0 + h * gl.nodes[i];
      Vec2 x = sigma.curve->point(t);
      Vec2 tangent = sigma.curve->derivative(t);
      Vec2 normal = sigma.normal_sign * Vec2(tangent.y(), -tangent.x()).normalized();
      auto dl = [&](double offset) {
        return double_layer_potential(gamma, u, x + offset * normal, 32);
      };
      double dn = (dl(step) - dl(-step)) / (2.0 * step);
      double v_val = v[p] * (1.0 - gl.nodes[i]) + v[(p + 1) % m] * gl.nodes[i];
      oracle += h * gl.weights[i] * tangent.norm() * v_val * (-dn);
    }
  }
  EXPECT_NEAR(galerkin, oracle, 1e-6);
}

TEST(MassMatrices, RowSumIdentities) {
  BoundaryMesh gamma = unperturbed_gamma(2);
  Eigen::MatrixXd b = assemble_mass_B(gamma);
  Eigen::MatrixXd g = assemble_mass_G(gamma);
  for (int p = 0; p < gamma.n_panels; ++p) {
    double len = panel_arc_length(gamma, p);
    EXPECT_NEAR(2.0 * b.row(p).sum(), len, 1e-12);
  }
  // Row sums of G equal (1, phi_k): the hat-weighted arc integral over the
  // two adjacent panels. On constant-speed curves this reduces to the
  // half-sum of the panel lengths; on the ellipse that holds to O(h^2).
  for (int k = 0; k < gamma.n_panels; ++k) {
    int left = (k - 1 + gamma.n_panels) % gamma.n_panels;
    double h = gamma.panel_width();
    double tl = gamma.node(left), tk = gamma.node(k);
    double exact =
        testsupport::adaptive_quadrature(
            [&](double t) { return (t - tl) / h * gamma.curve->derivative(t).norm(); }, tl,
            tl + h, 1e-14) +
        testsupport::adaptive_quadrature(
            [&](double t) { return (1.0 - (t - tk) / h) * gamma.curve->derivative(t).norm(); },
            tk, tk + h, 1e-14);
    EXPECT_NEAR(g.row(k).sum(), exact, 1e-12);
    double half_sum = 0.5 * (panel_arc_length(gamma, left) + panel_arc_length(gamma, k));
    EXPECT_NEAR(g.row(k).sum(), half_sum, 1e-3);
  }
  // On the circle the half-sum identity is exact.
  BoundaryMesh sigma = sigma_mesh(2);
  Eigen::MatrixXd gs = assemble_mass_G(sigma);
  double circle_len = 0.2 * sigma.panel_width();
  for (int k = 0; k < sigma.n_panels; ++k) EXPECT_NEAR(gs.row(k).sum(), circle_len, 1e-12);
  EXPECT_LT((g - g.transpose()).lpNorm<Eigen::Infinity>(), 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (g + g.transpose()));
  EXPECT_GT(eig.eigenvalues()[0], 0.0);
}

TEST(DataVector, PartitionOfUnity) {
  BoundaryMesh gamma = unperturbed_gamma(1);
  Eigen::VectorXd ones_data = boundary_data_vector(gamma, [](const Vec2&) { return 1.0; });
  double circumference = 0.0;
  for (int p = 0; p < gamma.n_panels; ++p) circumference += panel_arc_length(gamma, p);
  EXPECT_NEAR(ones_data.sum(), circumference, 1e-10);
}

TEST(SingleLayerBoth, MatchesSeparateAssemblies) {
  BoundaryMesh sigma = sigma_mesh(2);
  BoundaryMesh gamma = unperturbed_gamma(2);
  auto both = detail::single_layer_both(gamma, sigma);
  Eigen::MatrixXd v = assemble_single_layer(gamma, sigma);
  Eigen::MatrixXd v0 = assemble_single_layer(gamma, sigma, 16, false);
  EXPECT_LT((both.v - v).lpNorm<Eigen::Infinity>(), 1e-14);
  EXPECT_LT((both.v0 - v0).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Saturation, AllOperatorsStableUnderOrderDoublingLevel3) {
  BoundaryMesh sigma = sigma_mesh(3);
  BoundaryMesh gamma = unperturbed_gamma(3);
  auto check = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* label) {
    EXPECT_LT((a - b).lpNorm<Eigen::Infinity>(), 1e-10) << label;
  };
  check(assemble_single_layer(sigma, sigma, 16), assemble_single_layer(sigma, sigma, 32), "V_SS");
  check(assemble_single_layer(gamma, gamma, 16), assemble_single_layer(gamma, gamma, 32), "V_GG");
  check(assemble_single_layer(gamma, sigma, 16), assemble_single_layer(gamma, sigma, 32), "V_GS");
  check(assemble_double_layer(sigma, sigma, 16), assemble_double_layer(sigma, sigma, 32), "K_SS");
  check(assemble_double_layer(gamma, gamma, 16), assemble_double_layer(gamma, gamma, 32), "K_GG");
  check(assemble_hypersingular(sigma, sigma, 16), assemble_hypersingular(sigma, sigma, 32),
        "W_SS");
  check(assemble_hypersingular(gamma, sigma, 16), assemble_hypersingular(gamma, sigma, 32),
        "W_GS");
  check(assemble_mass_B(gamma, 16), assemble_mass_B(gamma, 32), "B_G");
  check(assemble_mass_G(gamma, 16), assemble_mass_G(gamma, 32), "G_G");
}
