#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "blocktet/geometry.hpp"

namespace blocktet {

enum class MacroKind : std::uint8_t { Vertex, Edge, Face, Cell };

struct PrimitiveId {
  MacroKind kind{};
  int index = 0;
  auto operator<=>(const PrimitiveId&) const = default;
};

struct ParseError : std::runtime_error {
  int line = 0;
  ParseError(int line_, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_) + ": " + what),
        line(line_) {}
};

/// Unstructured conforming tetrahedral mesh. Cells come from the input in
/// file order (with an orientation repair); edges and faces are derived from
/// the cells and stored once each, sorted.
struct CoarseMesh {
  std::vector<Vec3> vertex_coords;
  std::vector<std::array<int, 4>> cells;
  std::vector<std::array<int, 2>> edges;        // sorted pairs, lexicographic
  std::vector<std::array<int, 3>> faces;        // sorted triples, lexicographic
  std::vector<char> boundary_flags;             // per face; 1 = constrained
  std::vector<std::array<int, 2>> face_cells;   // incident cells, -1 if none
  std::vector<std::string> warnings;

  int n_vertices() const { return static_cast<int>(vertex_coords.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }

  int face_index(std::array<int, 3> f) const {
    std::sort(f.begin(), f.end());
    const auto it = std::lower_bound(faces.begin(), faces.end(), f);
    if (it == faces.end() || *it != f) throw std::out_of_range("unknown face");
    return static_cast<int>(it - faces.begin());
  }

  int edge_index(std::array<int, 2> e) const {
    std::sort(e.begin(), e.end());
    const auto it = std::lower_bound(edges.begin(), edges.end(), e);
    if (it == edges.end() || *it != e) throw std::out_of_range("unknown edge");
    return static_cast<int>(it - edges.begin());
  }

  bool is_boundary_face(int f) const { return face_cells[f][1] < 0; }

  /// Global face ids of cell c; slot t holds the face opposite local vertex t.
  std::array<int, 4> cell_face_indices(int c) const {
    const auto& v = cells[c];
    return {face_index({v[1], v[2], v[3]}), face_index({v[0], v[2], v[3]}),
            face_index({v[0], v[1], v[3]}), face_index({v[0], v[1], v[2]})};
  }

  bool operator==(const CoarseMesh& o) const {
    return std::equal(vertex_coords.begin(), vertex_coords.end(),
                      o.vertex_coords.begin(), o.vertex_coords.end(),
                      [](Vec3 a, Vec3 b) {
                        return a.x == b.x && a.y == b.y && a.z == b.z;
                      }) &&
           cells == o.cells && edges == o.edges && faces == o.faces &&
           boundary_flags == o.boundary_flags;
  }
};

/// Affine map x = A r + b taking the reference tetrahedron to a physical cell.
struct MacroCellMap {
  Mat3 a;
  Vec3 b;
  double det = 0;  // equals 6 times the signed cell volume

  Vec3 map(Vec3 r) const { return a * r + b; }
};

inline MacroCellMap macro_cell_map(const CoarseMesh& mesh, int cell) {
  if (cell < 0 || cell >= mesh.n_cells())
    throw std::out_of_range("macro_cell_map: no such cell");
  const auto& c = mesh.cells[cell];
  const Vec3 v0 = mesh.vertex_coords[c[0]];
  MacroCellMap m;
  m.a = from_columns(mesh.vertex_coords[c[1]] - v0,
                     mesh.vertex_coords[c[2]] - v0,
                     mesh.vertex_coords[c[3]] - v0);
  m.b = v0;
  m.det = m.a.det();
  if (m.det == 0.0) throw std::invalid_argument("macro_cell_map: degenerate cell");
  return m;
}

namespace detail {

inline double signed_volume6(const CoarseMesh& mesh, const std::array<int, 4>& c) {
  const Vec3 v0 = mesh.vertex_coords[c[0]];
  return dot(mesh.vertex_coords[c[1]] - v0,
             cross(mesh.vertex_coords[c[2]] - v0, mesh.vertex_coords[c[3]] - v0));
}

// Hanging-node scan: a vertex strictly inside another cell's edge or face
// breaks conformity even when the index-level checks pass.
inline void check_hanging_nodes(const CoarseMesh& mesh) {
  constexpr double eps = 1e-9;
  for (int vi = 0; vi < mesh.n_vertices(); ++vi) {
    const Vec3 p = mesh.vertex_coords[vi];
    for (int ci = 0; ci < mesh.n_cells(); ++ci) {
      const auto& c = mesh.cells[ci];
      if (std::find(c.begin(), c.end(), vi) != c.end()) continue;
      for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
          const Vec3 va = mesh.vertex_coords[c[a]];
          const Vec3 d = mesh.vertex_coords[c[b]] - va;
          const double len2 = dot(d, d);
          const double t = dot(p - va, d) / len2;
          if (t <= eps || t >= 1 - eps) continue;
          const Vec3 foot = va + d * t;
          if (norm(p - foot) < eps * std::sqrt(len2))
            throw std::invalid_argument(
                "non-conforming mesh: vertex " + std::to_string(vi) +
                " lies inside an edge of cell " + std::to_string(ci));
        }
      for (int skip = 0; skip < 4; ++skip) {
        std::array<int, 3> f{};
        int n = 0;
        for (int a = 0; a < 4; ++a)
          if (a != skip) f[n++] = c[a];
        const Vec3 va = mesh.vertex_coords[f[0]];
        const Vec3 u = mesh.vertex_coords[f[1]] - va;
        const Vec3 w = mesh.vertex_coords[f[2]] - va;
        const Vec3 nrm = cross(u, w);
        const double area2 = dot(nrm, nrm);
        if (std::abs(dot(p - va, nrm)) >= eps * std::sqrt(area2) * norm(p - va) + 1e-300)
          continue;
        // Barycentric coordinates of the in-plane projection.
        const Vec3 r = p - va;
        const double uu = dot(u, u), vv = dot(w, w), uv = dot(u, w);
        const double ru = dot(r, u), rv = dot(r, w);
        const double den = uu * vv - uv * uv;
        const double s = (vv * ru - uv * rv) / den;
        const double t = (uu * rv - uv * ru) / den;
        if (s > eps && t > eps && s + t < 1 - eps)
          throw std::invalid_argument(
              "non-conforming mesh: vertex " + std::to_string(vi) +
              " lies inside a face of cell " + std::to_string(ci));
      }
    }
  }
}

inline void derive_topology(CoarseMesh& mesh) {
  std::map<std::array<int, 3>, std::vector<int>> face_use;
  std::map<std::array<int, 2>, int> edge_use;
  for (int ci = 0; ci < mesh.n_cells(); ++ci) {
    std::array<int, 4> v = mesh.cells[ci];
    std::sort(v.begin(), v.end());
    if (std::unique(v.begin(), v.end()) != v.end())
      throw std::invalid_argument("cell " + std::to_string(ci) +
                                  " repeats a vertex");
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        ++edge_use[{v[a], v[b]}];
        for (int c = b + 1; c < 4; ++c) {
          auto& use = face_use[{v[a], v[b], v[c]}];
          use.push_back(ci);
          if (use.size() > 2)
            throw std::invalid_argument("non-conforming mesh: face shared by " +
                                        std::to_string(use.size()) + " cells");
        }
      }
    }
  }
  for (const auto& [e, n] : edge_use) mesh.edges.push_back(e);
  for (const auto& [f, use] : face_use) {
    mesh.faces.push_back(f);
    mesh.face_cells.push_back({use[0], use.size() == 2 ? use[1] : -1});
    mesh.boundary_flags.push_back(use.size() == 1 ? 1 : 0);
  }
}

inline void validate_and_finalize(CoarseMesh& mesh) {
  for (int ci = 0; ci < mesh.n_cells(); ++ci) {
    double vol = signed_volume6(mesh, mesh.cells[ci]);
    if (vol < 0) {
      std::swap(mesh.cells[ci][2], mesh.cells[ci][3]);
      vol = -vol;
      mesh.warnings.push_back("cell " + std::to_string(ci) +
                              " reoriented (negative volume in input order)");
    }
    if (vol == 0.0 || !std::isfinite(vol))
      throw std::invalid_argument("cell " + std::to_string(ci) + " is degenerate");
  }
  derive_topology(mesh);
  check_hanging_nodes(mesh);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------
//
//   # comment
//   vertices N
//   x y z              (N lines)
//   cells M
//   i0 i1 i2 i3        (M lines)
//   boundary K         (optional; overrides the all-Dirichlet default)
//   f0 f1 f2 flag      (K lines; flag 0 releases a boundary face)

inline CoarseMesh parse_mesh(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;

  const auto next_line = [&](std::istringstream& out) {
    while (std::getline(in, raw)) {
      ++lineno;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      if (raw.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      out = std::istringstream(raw);
      return true;
    }
    return false;
  };

  std::istringstream line;
  const auto expect_section = [&](const char* name, bool required) {
    if (!next_line(line)) {
      if (required) throw ParseError(lineno, std::string("expected '") + name + "' section");
      return std::int64_t{-1};
    }
    std::string word;
    std::int64_t count = -1;
    const bool ok = static_cast<bool>(line >> word >> count);
    if (!required && (!ok || word != name))
      throw ParseError(lineno, "trailing content after mesh data");
    if (!ok || word != name || count < 0)
      throw ParseError(lineno, std::string("expected '") + name + " <count>'");
    return count;
  };

  CoarseMesh mesh;
  const std::int64_t nv = expect_section("vertices", true);
  for (std::int64_t i = 0; i < nv; ++i) {
    if (!next_line(line)) throw ParseError(lineno, "unexpected end of vertex list");
    Vec3 v;
    if (!(line >> v.x >> v.y >> v.z))
      throw ParseError(lineno, "expected three vertex coordinates");
    mesh.vertex_coords.push_back(v);
  }

  const std::int64_t nc = expect_section("cells", true);
  for (std::int64_t i = 0; i < nc; ++i) {
    if (!next_line(line)) throw ParseError(lineno, "unexpected end of cell list");
    std::array<int, 4> c{};
    if (!(line >> c[0] >> c[1] >> c[2] >> c[3]))
      throw ParseError(lineno, "expected four vertex ids");
    for (int id : c)
      if (id < 0 || id >= mesh.n_vertices())
        throw ParseError(lineno, "vertex id " + std::to_string(id) + " out of range");
    mesh.cells.push_back(c);
  }
  if (mesh.cells.empty()) throw ParseError(lineno, "mesh has no cells");

  const int boundary_line = lineno;
  const std::int64_t nb = expect_section("boundary", false);

  try {
    detail::validate_and_finalize(mesh);
  } catch (const std::invalid_argument& e) {
    throw ParseError(boundary_line, e.what());
  }

  for (std::int64_t i = 0; i < nb; ++i) {
    if (!next_line(line)) throw ParseError(lineno, "unexpected end of boundary list");
    std::array<int, 3> f{};
    int flag = 0;
    if (!(line >> f[0] >> f[1] >> f[2] >> flag))
      throw ParseError(lineno, "expected three vertex ids and a flag");
    int fi;
    try {
      fi = mesh.face_index(f);
    } catch (const std::out_of_range&) {
      throw ParseError(lineno, "boundary line names a non-existent face");
    }
    if (!mesh.is_boundary_face(fi))
      throw ParseError(lineno, "boundary line names an interior face");
    mesh.boundary_flags[fi] = flag != 0 ? 1 : 0;
  }
  if (next_line(line)) throw ParseError(lineno, "trailing content after mesh data");
  return mesh;
}

inline std::string serialize_mesh(const CoarseMesh& mesh) {
  std::ostringstream os;
  os.precision(17);
  os << "vertices " << mesh.n_vertices() << "\n";
  for (const Vec3& v : mesh.vertex_coords)
    os << v.x << " " << v.y << " " << v.z << "\n";
  os << "cells " << mesh.n_cells() << "\n";
  for (const auto& c : mesh.cells)
    os << c[0] << " " << c[1] << " " << c[2] << " " << c[3] << "\n";
  std::int64_t nb = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    if (mesh.is_boundary_face(static_cast<int>(f))) ++nb;
  os << "boundary " << nb << "\n";
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    if (mesh.is_boundary_face(static_cast<int>(f)))
      os << mesh.faces[f][0] << " " << mesh.faces[f][1] << " "
         << mesh.faces[f][2] << " " << static_cast<int>(mesh.boundary_flags[f])
         << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Built-in meshes
// ---------------------------------------------------------------------------

inline std::string ref_tet_text() {
  return "# reference tetrahedron\n"
         "vertices 4\n"
         "0 0 0\n1 0 0\n0 1 0\n0 0 1\n"
         "cells 1\n"
         "0 1 2 3\n";
}

/// Unit cube split into six tetrahedra around the (0,0,0)-(1,1,1) diagonal.
inline std::string cube_kuhn_text() {
  std::ostringstream os;
  os << "# unit cube, six tetrahedra around the main diagonal\n"
     << "vertices 8\n";
  std::array<Vec3, 8> corner{};
  for (int id = 0; id < 8; ++id) {
    corner[id] = {static_cast<double>(id & 1), static_cast<double>((id >> 1) & 1),
                  static_cast<double>((id >> 2) & 1)};
    os << corner[id].x << " " << corner[id].y << " " << corner[id].z << "\n";
  }
  os << "cells 6\n";
  const std::array<std::array<int, 3>, 6> perms = {
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (const auto& axes : perms) {
    std::array<int, 4> c = {0, 0, 0, 7};
    c[1] = 1 << axes[0];
    c[2] = c[1] | (1 << axes[1]);
    const Vec3 v0 = corner[c[0]];
    if (dot(corner[c[1]] - v0,
            cross(corner[c[2]] - v0, corner[c[3]] - v0)) < 0)
      std::swap(c[2], c[3]);
    os << c[0] << " " << c[1] << " " << c[2] << " " << c[3] << "\n";
  }
  return os.str();
}

/// Resolves a builtin mesh name; returns nothing for unknown names so callers
/// can fall back to treating the argument as a file path.
inline std::optional<std::string> builtin_mesh_text(std::string_view name) {
  if (name == "ref-tet") return ref_tet_text();
  if (name == "cube-kuhn") return cube_kuhn_text();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Primitive graph
// ---------------------------------------------------------------------------

struct PrimitiveGraph {
  std::map<PrimitiveId, std::vector<PrimitiveId>> adjacency;

  const std::vector<PrimitiveId>& links(PrimitiveId p) const {
    static const std::vector<PrimitiveId> none;
    const auto it = adjacency.find(p);
    return it == adjacency.end() ? none : it->second;
  }
};

inline PrimitiveGraph build_primitive_graph(const CoarseMesh& mesh) {
  PrimitiveGraph g;
  const auto link = [&](PrimitiveId a, PrimitiveId b) {
    g.adjacency[a].push_back(b);
    g.adjacency[b].push_back(a);
  };
  for (int v = 0; v < mesh.n_vertices(); ++v)
    g.adjacency[{MacroKind::Vertex, v}];
  for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
    const PrimitiveId pe{MacroKind::Edge, static_cast<int>(e)};
    for (int v : mesh.edges[e]) link(pe, {MacroKind::Vertex, v});
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const PrimitiveId pf{MacroKind::Face, static_cast<int>(f)};
    const auto& fv = mesh.faces[f];
    for (int v : fv) link(pf, {MacroKind::Vertex, v});
    link(pf, {MacroKind::Edge, mesh.edge_index({fv[0], fv[1]})});
    link(pf, {MacroKind::Edge, mesh.edge_index({fv[0], fv[2]})});
    link(pf, {MacroKind::Edge, mesh.edge_index({fv[1], fv[2]})});
  }
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const PrimitiveId pc{MacroKind::Cell, c};
    const auto& cv = mesh.cells[c];
    for (int v : cv) link(pc, {MacroKind::Vertex, v});
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        link(pc, {MacroKind::Edge, mesh.edge_index({cv[a], cv[b]})});
    for (int f : mesh.cell_face_indices(c)) link(pc, {MacroKind::Face, f});
  }
  for (std::size_t f = 0; f < mesh.faces.size(); ++f)
    if (!mesh.is_boundary_face(static_cast<int>(f)))
      link({MacroKind::Cell, mesh.face_cells[f][0]},
           {MacroKind::Cell, mesh.face_cells[f][1]});
  return g;
}

// ---------------------------------------------------------------------------
// Inner-edge shape optimization
// ---------------------------------------------------------------------------

/// Relabeling of a cell's local vertices that makes the shortest octahedron
/// diagonal the interior refinement edge. Candidates are the three
/// orientation-preserving relabelings that put each diagonal onto the
/// (v0 v2, v1 v3) slot; ties pick the lexicographically smallest permutation.
inline std::array<int, 4> select_inner_edge_permutation(const CoarseMesh& mesh,
                                                        int cell, bool enabled) {
  if (cell < 0 || cell >= mesh.n_cells())
    throw std::out_of_range("select_inner_edge_permutation: no such cell");
  if (!enabled) return {0, 1, 2, 3};
  const std::array<std::array<int, 4>, 3> candidates = {
      {{0, 1, 2, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}}};
  std::array<int, 4> best{};
  double best_len = -1;
  for (const auto& perm : candidates) {
    const auto at = [&](int slot) {
      return mesh.vertex_coords[mesh.cells[cell][perm[slot]]];
    };
    const Vec3 m02 = (at(0) + at(2)) * 0.5;
    const Vec3 m13 = (at(1) + at(3)) * 0.5;
    const double len = norm(m02 - m13);
    if (best_len < 0 || len < best_len - 1e-15 * (1 + best_len)) {
      best_len = len;
      best = perm;
    }
  }
  return best;
}

}  // namespace blocktet
