#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fembem/common.hpp"
#include "fembem/geometry.hpp"

namespace fembem {

/// Triangle with positive orientation. If curved, the edge opposite vertex 0
/// (i.e. v[1] -> v[2]) is a circular arc on Sigma; both endpoints lie on the
/// circle of radius 0.2.
struct CurvedTriangle {
  std::array<int, 3> v;
  bool curved = false;
};

/// Triangulation of the fixed disk B. Boundary vertices are listed
/// counterclockwise in boundary_loop, starting at angle 0, and sit at the
/// exact angles 2*pi*j / (8 * 2^level).
struct DiskMesh {
  int level = 0;
  std::vector<Vec2> vertices;
  std::vector<CurvedTriangle> triangles;
  std::vector<int> boundary_loop;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  int boundary_edge_count() const { return static_cast<int>(boundary_loop.size()); }
};

/// Panel mesh of a closed parametric curve. Panels are the uniform parameter
/// intervals [t_j, t_{j+1}] with t_j = 2*pi*j/n. Piecewise-constant DoFs are
/// one per panel; piecewise-linear DoFs are one per panel endpoint (periodic,
/// linear in the parameter). normal_sign = +1 selects the right-hand normal
/// of the (counterclockwise) parametrization, which points away from the
/// enclosed region; -1 selects the inner normal.
struct BoundaryMesh {
  std::shared_ptr<const ParametricCurve> curve;
  int n_panels = 0;
  double normal_sign = 1.0;
  /// Highest angular frequency carried by the curve; quadrature orders are
  /// floored so wide panels still resolve it.
  double oscillation = 0.0;

  double panel_width() const { return kTwoPi / n_panels; }
  double node(int j) const { return kTwoPi * j / n_panels; }
  Vec2 endpoint(int j) const { return curve->point(node(j % n_panels)); }
};

inline DiskMesh build_coarse_disk_mesh() {
  DiskMesh mesh;
  mesh.level = 0;
  const double r_in = 0.1, r_out = kSigmaRadius;
  for (int j = 0; j < 4; ++j) {
    double phi = kPi / 4.0 + j * kPi / 2.0;
    mesh.vertices.push_back({r_in * std::cos(phi), r_in * std::sin(phi)});
  }
  for (int j = 0; j < 8; ++j) {
    double phi = j * kPi / 4.0;
    mesh.vertices.push_back({r_out * std::cos(phi), r_out * std::sin(phi)});
  }
  auto inner = [](int j) { return j % 4; };
  auto outer = [](int j) { return 4 + (j % 8); };
  // Inner square split along one diagonal.
  mesh.triangles.push_back({{inner(0), inner(1), inner(2)}, false});
  mesh.triangles.push_back({{inner(0), inner(2), inner(3)}, false});
  // Ring of 12 triangles; the outer edges are arcs.
  for (int j = 0; j < 4; ++j) {
    mesh.triangles.push_back({{inner(j), outer(2 * j + 1), outer(2 * j + 2)}, true});
    mesh.triangles.push_back({{inner(j), outer(2 * j + 2), inner(j + 1)}, false});
    mesh.triangles.push_back({{inner(j + 1), outer(2 * j + 2), outer(2 * j + 3)}, true});
  }
  for (int j = 0; j < 8; ++j) mesh.boundary_loop.push_back(outer(j));
  return mesh;
}

namespace detail {

inline double vertex_angle(const Vec2& p) {
  double a = std::atan2(p.y(), p.x());
  return a < 0 ? a + kTwoPi : a;
}

/// Midpoint of the circular arc between two points on the Sigma circle.
inline Vec2 arc_midpoint(const Vec2& a, const Vec2& b) {
  double ta = std::atan2(a.y(), a.x());
  double tb = std::atan2(b.y(), b.x());
  double d = tb - ta;
  if (d > kPi) d -= kTwoPi;
  if (d < -kPi) d += kTwoPi;
  double tm = ta + 0.5 * d;
  return {kSigmaRadius * std::cos(tm), kSigmaRadius * std::sin(tm)};
}

}  // namespace detail

/// Uniform refinement: every triangle splits into four by edge midpoints;
/// midpoints of arcs stay on the Sigma circle at the bisecting angle.
inline DiskMesh refine(const DiskMesh& mesh) {
  DiskMesh fine;
  fine.level = mesh.level + 1;
  fine.vertices = mesh.vertices;

  std::map<std::pair<int, int>, int> midpoint;
  auto midpoint_of = [&](int a, int b, bool curved) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec2 m = curved ? detail::arc_midpoint(mesh.vertices[a], mesh.vertices[b])
                    : Vec2(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    int idx = static_cast<int>(fine.vertices.size());
    fine.vertices.push_back(m);
    midpoint.emplace(key, idx);
    return idx;
  };

  for (const auto& t : mesh.triangles) {
    const int v0 = t.v[0], v1 = t.v[1], v2 = t.v[2];
    const int m01 = midpoint_of(v0, v1, false);
    const int m12 = midpoint_of(v1, v2, t.curved);
    const int m20 = midpoint_of(v2, v0, false);
    if (t.curved) {
      fine.triangles.push_back({{v0, m01, m20}, false});
      fine.triangles.push_back({{m01, v1, m12}, true});
      fine.triangles.push_back({{m20, m12, v2}, true});
      fine.triangles.push_back({{m01, m12, m20}, false});
    } else {
      fine.triangles.push_back({{v0, m01, m20}, false});
      fine.triangles.push_back({{v1, m12, m01}, false});
      fine.triangles.push_back({{v2, m20, m12}, false});
      fine.triangles.push_back({{m01, m12, m20}, false});
    }
  }

  fine.boundary_loop.reserve(2 * mesh.boundary_loop.size());
  const int nb = static_cast<int>(mesh.boundary_loop.size());
  for (int j = 0; j < nb; ++j) {
    int a = mesh.boundary_loop[j];
    int b = mesh.boundary_loop[(j + 1) % nb];
    fine.boundary_loop.push_back(a);
    fine.boundary_loop.push_back(midpoint.at(std::minmax(a, b)));
  }
  return fine;
}

/// Builds the level-l mesh by refining the 14-triangle coarse mesh l times.
inline DiskMesh build_disk_mesh(int level) {
  DiskMesh mesh = build_coarse_disk_mesh();
  for (int l = 0; l < level; ++l) mesh = refine(mesh);
  return mesh;
}

/// FE vertex count and total boundary-element count (Sigma + Gamma constants)
/// per level, without building meshes.
inline std::pair<long, long> dof_counts(int level) {
  if (level < 1) throw std::invalid_argument("dof_counts: level out of range");
  long v = 12, t = 14, b = 8;
  for (int l = 0; l < level; ++l) {
    v += (3 * t + b) / 2;
    t *= 4;
    b *= 2;
  }
  return {v, 2 * b};
}

/// Boundary mesh of Sigma induced by the disk mesh: one panel per curved
/// boundary edge, ordered counterclockwise from angle 0. Linear DoF j is the
/// trace of the FE basis function at boundary_loop[j].
inline BoundaryMesh build_sigma_mesh(const DiskMesh& mesh) {
  BoundaryMesh bm;
  bm.curve = std::make_shared<CircleCurve>(kSigmaRadius);
  bm.n_panels = mesh.boundary_edge_count();
  bm.normal_sign = 1.0;  // away from B
  return bm;
}

/// Panel mesh of the sampled outer boundary with 8 * 2^level panels; normals
/// point into the domain (inner normal).
inline BoundaryMesh build_gamma_mesh(const EllipseReference& ellipse, const PerturbationSpec& spec,
                                     const SampleVector& y, int level) {
  BoundaryMesh bm;
  auto curve = std::make_shared<PerturbedEllipseCurve>(ellipse, spec, y);
  bm.curve = curve;
  bm.n_panels = 8 << level;
  bm.normal_sign = -1.0;  // into D
  bm.oscillation = spec.k_max;
  // Probe the radius on a finer grid than the panels so a degenerate sample
  // fails fast, before any assembly.
  const int probes = 4 * bm.n_panels;
  for (int j = 0; j < probes; ++j) boundary_radius(ellipse, spec, y, kTwoPi * j / probes);
  return bm;
}

inline BoundaryMesh build_gamma_mesh(const SampleVector& y, int level) {
  return build_gamma_mesh(EllipseReference{}, PerturbationSpec{}, y, level);
}

/// Plain-text dump: one "v x y" line per vertex, one "t i j k [c]" line per
/// triangle where the optional trailing index marks the curved edge.
inline void dump_mesh(const DiskMesh& mesh, std::ostream& out) {
  for (const auto& p : mesh.vertices) out << "v " << p.x() << ' ' << p.y() << '\n';
  for (const auto& t : mesh.triangles) {
    out << "t " << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2];
    if (t.curved) out << " 0";
    out << '\n';
  }
}

}  // namespace fembem
