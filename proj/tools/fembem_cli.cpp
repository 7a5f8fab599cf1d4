// Experiment driver: DoF tables, property validation, multilevel estimates
// and convergence sweeps, with deterministic CSV output.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fembem/bem.hpp"
#include "fembem/coupling.hpp"
#include "fembem/fem.hpp"
#include "fembem/mesh.hpp"
#include "fembem/mlqmc.hpp"

namespace {

using namespace fembem;

/// Flat key=value configuration with # comments; command-line options win.
class ConfigFile {
 public:
  static ConfigFile load(const std::string& path) {
    ConfigFile cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config file not found: " + path);
    std::string line;
    while (std::getline(in, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string v) {
        auto first = v.find_first_not_of(" \t");
        auto last = v.find_last_not_of(" \t");
        return first == std::string::npos ? std::string() : v.substr(first, last - first + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (!key.empty()) cfg.values_[key] = value;
    }
    return cfg;
  }

  void apply(const CLI::App* sub, const std::string& option, const std::string& key,
             const std::function<void(const std::string&)>& setter) const {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    if (sub->count(option) > 0) return;  // explicit flag wins
    setter(it->second);
    consumed_.insert(key);
  }

  void finish() const {
    for (const auto& [key, value] : values_) {
      if (!consumed_.count(key))
        throw std::runtime_error("config key not recognized by this command: " + key);
    }
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CLI::ValidationError("--out", "cannot open " + path);
  return out;
}

Schedule parse_schedule(const std::string& name) {
  if (name == "linear") return Schedule::kLinear;
  if (name == "quadratic") return Schedule::kQuadratic;
  throw CLI::ValidationError("--schedule", "expected linear or quadratic");
}

std::function<double(const Vec2&)> parse_u_bar(const std::string& spec) {
  if (spec == "zero") return [](const Vec2&) { return 0.0; };
  if (spec == "newton") return [](const Vec2& x) { return newton_potential(x); };
  if (spec.rfind("const:", 0) == 0) {
    double c = std::stod(spec.substr(6));
    return [c](const Vec2&) { return c; };
  }
  throw CLI::ValidationError("--u-bar", "expected zero, newton or const:<value>");
}

int cmd_dof_table(int max_level, const std::string& out_path) {
  std::ostringstream csv;
  csv << "level,fe,be\n";
  for (int level = 1; level <= max_level; ++level) {
    auto [fe, be] = dof_counts(level);
    csv << level << ',' << fe << ',' << be << '\n';
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    open_output(out_path) << csv.str();
  }
  return 0;
}

double load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("reference file not found: " + path);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(remove_if(key.begin(), key.end(), ::isspace), key.end());
    if (key == "value") return std::stod(line.substr(eq + 1));
  }
  throw std::runtime_error("reference file has no value entry: " + path);
}

struct Checker {
  int failures = 0;

  void check(const std::string& name, bool ok, const std::string& measured) {
    std::printf("%s %s (%s)\n", ok ? "PASS" : "FAIL", name.c_str(), measured.c_str());
    if (!ok) ++failures;
  }
};

int cmd_validate(bool corrupt_normals) {
  Checker c;

  {  // DoF table against the published counts.
    const long fe[] = {37, 129, 481, 1857, 7297, 28929, 115201, 459777};
    const long be[] = {32, 64, 128, 256, 512, 1024, 2048, 4096};
    bool ok = true;
    for (int level = 1; level <= 8; ++level) {
      auto [nfe, nbe] = dof_counts(level);
      ok = ok && nfe == fe[level - 1] && nbe == be[level - 1];
    }
    c.check("dof-table levels 1..8", ok, "exact integer match");
  }

  {  // Halton radical inverses.
    auto close = [](double a, double b) { return std::abs(a - b) < 1e-15; };
    bool ok = radical_inverse(1, 2) == 0.5 && radical_inverse(2, 2) == 0.25 &&
              close(radical_inverse(2, 3), 2.0 / 3.0) && close(radical_inverse(5, 3), 7.0 / 9.0);
    c.check("halton radical inverse spot values", ok, "bases 2,3");
  }

  DiskMesh mesh2 = build_disk_mesh(2);
  BoundaryMesh sigma = build_sigma_mesh(mesh2);
  SampleVector y0(PerturbationSpec{}.dimension());
  BoundaryMesh gamma = build_gamma_mesh(y0, 2);
  if (corrupt_normals) gamma.normal_sign = -gamma.normal_sign;

  {  // Single-layer potential identity at the disk center.
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(sigma.n_panels);
    double value = single_layer_potential(sigma, ones, Vec2(0, 0));
    double exact = -0.2 * std::log(0.2);
    c.check("single-layer center value -R log R", std::abs(value - exact) < 1e-8,
            "measured " + format_value(value));
  }

  {  // Double-layer row sums on Sigma and Gamma.
    Eigen::MatrixXd ks = assemble_double_layer(sigma, sigma);
    double len = 0.2 * sigma.panel_width();
    double err_s = (ks.rowwise().sum().array() + 0.5 * len).abs().maxCoeff();
    Eigen::MatrixXd kg = assemble_double_layer(gamma, gamma);
    Rule1d gl = gauss_legendre(32);
    double err_g = 0.0;
    for (int p = 0; p < gamma.n_panels; ++p) {
      double arc = 0.0;
      for (int i = 0; i < gl.size(); ++i) {
        arc += gamma.panel_width() * gl.weights[i] *
               gamma.curve->derivative(gamma.node(p) + gamma.panel_width() * gl.nodes[i]).norm();
      }
      err_g = std::max(err_g, std::abs(kg.row(p).sum() - 0.5 * arc));
    }
    c.check("double-layer row sums (Sigma, outward)", err_s < 1e-8,
            "max deviation " + format_value(err_s));
    c.check("double-layer row sums (Gamma, inner)", err_g < 1e-8,
            "max deviation " + format_value(err_g));
  }

  {  // Hypersingular operator kills constants.
    Eigen::MatrixXd w = assemble_hypersingular(sigma, sigma);
    double err = (w * Eigen::VectorXd::Ones(sigma.n_panels)).lpNorm<Eigen::Infinity>();
    c.check("hypersingular annihilates constants", err < 1e-10, "residual " + format_value(err));
  }

  {  // Quadrature saturation at level 1.
    DiskMesh mesh1 = build_disk_mesh(1);
    BoundaryMesh sigma1 = build_sigma_mesh(mesh1);
    double diff = (assemble_single_layer(sigma1, sigma1, 16) -
                   assemble_single_layer(sigma1, sigma1, 32))
                      .lpNorm<Eigen::Infinity>();
    c.check("single-layer order saturation", diff < 1e-10, "16 vs 32: " + format_value(diff));
  }

  {  // Radial exact solution on a synthetic circular boundary.
    const double radius = 0.5, data = radius * radius / 4.0;
    LevelContext ctx(1);
    BoundaryMesh circle;
    circle.curve = std::make_shared<CircleCurve>(radius);
    circle.n_panels = 16;
    circle.normal_sign = -1.0;
    CoupledSolution sol = solve_reduced(ctx, circle, [&](const Vec2&) { return data; });
    double err = (sol.u_tilde.coeffs.array() - data).abs().maxCoeff();
    c.check("radial solution: constant harmonic part", err < 1e-8,
            "max deviation " + format_value(err));
  }

  {  // Manufactured quadratic harmonic: convergence orders.
    auto dirichlet = [](const Vec2& x) { return x.x() * x.x() - x.y() * x.y(); };
    auto ref = [](const Vec2& x) {
      return std::make_pair(x.x() * x.x() - x.y() * x.y(), Vec2(2.0 * x.x(), -2.0 * x.y()));
    };
    std::vector<double> h1, l2;
    for (int level = 1; level <= 3; ++level) {
      LevelContext ctx(level);
      BoundaryMesh g = build_gamma_mesh(y0, level);
      CoupledSolution sol = solve_reduced(ctx, g, dirichlet);
      ErrorNorms norms = error_norms(ctx.geometry(), sol.u_tilde, ref);
      h1.push_back(norms.h1);
      l2.push_back(norms.l2);
    }
    double h1_order = std::log2(h1[0] / h1[2]) / 2.0;
    double l2_order = std::log2(l2[0] / l2[2]) / 2.0;
    c.check("manufactured harmonic H1 order", h1_order > 0.8 && h1_order < 1.2,
            "order " + format_value(h1_order));
    c.check("manufactured harmonic L2 order", l2_order > 1.7 && l2_order < 2.3,
            "order " + format_value(l2_order));
  }

  {  // Telescoping with a frozen boundary.
    PerturbationSpec frozen;
    frozen.epsilon = 0.0;
    Estimator est(EllipseReference{}, frozen);
    auto f = Estimator::qoi_functional(nullptr);
    double ml = est.multilevel_estimate(2, 2, Schedule::kLinear, f).value;
    double direct = est.single_level_estimate(2, 1, f);
    double rel = std::abs(ml - direct) / std::abs(direct);
    c.check("telescoping with frozen boundary", rel < 1e-10,
            "relative deviation " + format_value(rel));
  }

  std::printf("%s\n", c.failures == 0 ? "all checks passed" : "validation FAILED");
  return c.failures == 0 ? 0 : 1;
}

int cmd_estimate(int level, long fine_samples, Schedule schedule, const std::string& u_bar_spec,
                 double epsilon, const std::string& out_path) {
  PerturbationSpec spec;
  spec.epsilon = epsilon;
  Estimator est(EllipseReference{}, spec);
  auto f = Estimator::qoi_functional(parse_u_bar(u_bar_spec));
  MlEstimate ml = est.multilevel_estimate(level, fine_samples, schedule, f);
  std::ostringstream csv;
  csv << "level,samples,mean_difference\n";
  for (const auto& d : ml.per_level)
    csv << d.level << ',' << d.samples << ',' << format_value(d.mean_difference) << '\n';
  std::cout << csv.str();
  std::cout << "estimate," << format_value(ml.value) << '\n';
  if (!out_path.empty()) {
    auto out = open_output(out_path);
    out << csv.str() << "estimate," << format_value(ml.value) << '\n';
  }
  return 0;
}

int cmd_convergence(int max_level, long fine_samples, Schedule schedule,
                    const std::string& reference_path, bool compute_reference, int ref_level,
                    long ref_samples, double epsilon, const std::string& out_path) {
  PerturbationSpec spec;
  spec.epsilon = epsilon;
  Estimator est(EllipseReference{}, spec);
  auto f = Estimator::qoi_functional(nullptr);

  double reference;
  if (compute_reference) {
    reference = est.single_level_estimate(ref_level, ref_samples, f);
    auto out = open_output(reference_path);
    out << "# single-level reference estimate of the tracking QoI\n";
    out << "level = " << ref_level << "\n";
    out << "samples = " << ref_samples << "\n";
    out << "u_bar = zero\n";
    out << "value = " << format_value(reference) << "\n";
  } else {
    reference = load_reference(reference_path);
  }

  std::ostringstream csv;
  csv << "level,error,guide_linear,guide_quadratic\n";
  for (int l = 1; l <= max_level; ++l) {
    MlEstimate ml = est.multilevel_estimate(l, fine_samples, schedule, f);
    double error = std::abs(ml.value - reference);
    csv << l << ',' << format_value(error) << ',' << format_value(std::pow(2.0, -l)) << ','
        << format_value(std::pow(4.0, -l)) << '\n';
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    open_output(out_path) << csv.str();
  }
  return 0;
}

int cmd_dump_mesh(int level, const std::string& out_path) {
  DiskMesh mesh = build_disk_mesh(level);
  if (out_path.empty()) {
    dump_mesh(mesh, std::cout);
  } else {
    auto out = open_output(out_path);
    dump_mesh(mesh, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FEM-BEM coupled Poisson solver on randomly perturbed domains"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (default: all cores)");
  std::string config_path;

  int dof_level = 8;
  std::string dof_out;
  auto* dof = app.add_subcommand("dof-table", "finite/boundary element DoF counts per level");
  dof->fallthrough();
    dof->add_option("--config", config_path, "flat key=value configuration file");
  dof->add_option("--level", dof_level, "maximum level")->check(CLI::Range(1, 8));
  dof->add_option("--out", dof_out, "CSV output path (default: stdout)");

  bool corrupt_normals = false;
  auto* validate = app.add_subcommand("validate", "run the property suite");
  validate->fallthrough();
    validate->add_option("--config", config_path, "flat key=value configuration file");
  validate->add_flag("--corrupt-normals", corrupt_normals)->group("");  // test hook

  int est_level = 3;
  long est_samples = 10;
  std::string est_schedule = "linear", est_ubar = "zero", est_out;
  double est_epsilon = 0.05;
  auto* estimate = app.add_subcommand("estimate", "multilevel quasi-Monte Carlo estimate");
  estimate->fallthrough();
    estimate->add_option("--config", config_path, "flat key=value configuration file");
  estimate->add_option("--level", est_level, "finest level L")->check(CLI::Range(0, 6));
  estimate->add_option("--fine-samples", est_samples, "N_L")->check(CLI::PositiveNumber);
  estimate->add_option("--schedule", est_schedule, "linear or quadratic");
  estimate->add_option("--u-bar", est_ubar, "tracking target: zero, newton or const:<v>");
  estimate->add_option("--epsilon", est_epsilon, "perturbation amplitude");
  estimate->add_option("--out", est_out, "CSV output path");

  int conv_level = 4;
  long conv_samples = 10;
  std::string conv_schedule = "linear", conv_reference = "data/reference_qoi.txt", conv_out;
  bool conv_compute_ref = false;
  int conv_ref_level = 6;
  long conv_ref_samples = 2000;
  double conv_epsilon = 0.05;
  auto* convergence =
      app.add_subcommand("convergence", "multilevel error against the reference estimate");
  convergence->fallthrough();
    convergence->add_option("--config", config_path, "flat key=value configuration file");
  convergence->add_option("--level", conv_level, "maximum level L")->check(CLI::Range(1, 6));
  convergence->add_option("--fine-samples", conv_samples, "N_L")->check(CLI::PositiveNumber);
  convergence->add_option("--schedule", conv_schedule, "linear or quadratic");
  convergence->add_option("--reference", conv_reference, "reference value file");
  convergence->add_flag("--compute-reference", conv_compute_ref,
                        "recompute and store the reference estimate");
  convergence->add_option("--reference-level", conv_ref_level)->check(CLI::Range(0, 6));
  convergence->add_option("--reference-samples", conv_ref_samples)->check(CLI::PositiveNumber);
  convergence->add_option("--epsilon", conv_epsilon, "perturbation amplitude");
  convergence->add_option("--out", conv_out, "CSV output path (default: stdout)");

  int dump_level = 0;
  std::string dump_out;
  auto* dump = app.add_subcommand("dump-mesh", "plain-text disk mesh dump");
  dump->fallthrough();
    dump->add_option("--config", config_path, "flat key=value configuration file");
  dump->add_option("--level", dump_level, "refinement level")->check(CLI::Range(0, 8));
  dump->add_option("--out", dump_out, "output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigFile cfg = ConfigFile::load(config_path);
    auto to_int = [](const std::string& v) { return std::stoi(v); };
    auto to_long = [](const std::string& v) { return std::stol(v); };
    cfg.apply(&app, "--threads", "threads", [&](const std::string& v) { threads = to_int(v); });
    if (*dof) {
      cfg.apply(dof, "--level", "level", [&](const std::string& v) { dof_level = to_int(v); });
      cfg.apply(dof, "--out", "out", [&](const std::string& v) { dof_out = v; });
    } else if (*estimate) {
      cfg.apply(estimate, "--level", "level",
                [&](const std::string& v) { est_level = to_int(v); });
      cfg.apply(estimate, "--fine-samples", "fine-samples",
                [&](const std::string& v) { est_samples = to_long(v); });
      cfg.apply(estimate, "--schedule", "schedule",
                [&](const std::string& v) { est_schedule = v; });
      cfg.apply(estimate, "--u-bar", "u-bar", [&](const std::string& v) { est_ubar = v; });
      cfg.apply(estimate, "--epsilon", "epsilon",
                [&](const std::string& v) { est_epsilon = std::stod(v); });
      cfg.apply(estimate, "--out", "out", [&](const std::string& v) { est_out = v; });
    } else if (*convergence) {
      cfg.apply(convergence, "--level", "level",
                [&](const std::string& v) { conv_level = to_int(v); });
      cfg.apply(convergence, "--fine-samples", "fine-samples",
                [&](const std::string& v) { conv_samples = to_long(v); });
      cfg.apply(convergence, "--schedule", "schedule",
                [&](const std::string& v) { conv_schedule = v; });
      cfg.apply(convergence, "--reference", "reference",
                [&](const std::string& v) { conv_reference = v; });
      cfg.apply(convergence, "--compute-reference", "compute-reference",
                [&](const std::string& v) { conv_compute_ref = v == "true" || v == "1"; });
      cfg.apply(convergence, "--reference-level", "reference-level",
                [&](const std::string& v) { conv_ref_level = to_int(v); });
      cfg.apply(convergence, "--reference-samples", "reference-samples",
                [&](const std::string& v) { conv_ref_samples = to_long(v); });
      cfg.apply(convergence, "--epsilon", "epsilon",
                [&](const std::string& v) { conv_epsilon = std::stod(v); });
      cfg.apply(convergence, "--out", "out", [&](const std::string& v) { conv_out = v; });
    } else if (*dump) {
      cfg.apply(dump, "--level", "level", [&](const std::string& v) { dump_level = to_int(v); });
      cfg.apply(dump, "--out", "out", [&](const std::string& v) { dump_out = v; });
    }
    cfg.finish();
    fembem::set_thread_count(threads);

    if (*dof) return cmd_dof_table(dof_level, dof_out);
    if (*validate) return cmd_validate(corrupt_normals);
    if (*estimate)
      return cmd_estimate(est_level, est_samples, parse_schedule(est_schedule), est_ubar,
                          est_epsilon, est_out);
    if (*convergence)
      return cmd_convergence(conv_level, conv_samples, parse_schedule(conv_schedule),
                             conv_reference, conv_compute_ref, conv_ref_level, conv_ref_samples,
                             conv_epsilon, conv_out);
    if (*dump) return cmd_dump_mesh(dump_level, dump_out);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
