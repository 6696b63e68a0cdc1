#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "blocktet/geometry.hpp"

namespace blocktet {

using Level = int;

/// The 26 congruence classes of micro-primitives inside a regularly refined
/// tetrahedron: 1 vertex class, 7 edge classes, 12 face classes, 6 cell
/// classes. Tags follow the lattice directions they represent; see
/// subgroup_offsets() for the frozen geometry and naming conventions.
enum class Subgroup : std::uint8_t {
  V = 0,
  EdgeX, EdgeY, EdgeZ, EdgeXY, EdgeXZ, EdgeYZ, EdgeXYZ,
  FaceZUp, FaceZDown, FaceYUp, FaceYDown, FaceXUp, FaceXDown,
  FaceXYZUp, FaceXYZDown, FaceXYUp, FaceXYDown, FaceYZUp, FaceYZDown,
  CellIUp, CellIDown, CellIIUp, CellIIDown, CellIIIUp, CellIIIDown,
};

inline constexpr int kSubgroupCount = 26;

enum class MicroKind : std::uint8_t { Vertex, Edge, Face, Cell };

constexpr MicroKind subgroup_kind(Subgroup g) {
  const auto v = static_cast<int>(g);
  if (v == 0) return MicroKind::Vertex;
  if (v <= 7) return MicroKind::Edge;
  if (v <= 19) return MicroKind::Face;
  return MicroKind::Cell;
}

/// Number of micro-vertices of one instance: 1, 2, 3, or 4.
constexpr int subgroup_arity(Subgroup g) {
  switch (subgroup_kind(g)) {
    case MicroKind::Vertex: return 1;
    case MicroKind::Edge: return 2;
    case MicroKind::Face: return 3;
    case MicroKind::Cell: return 4;
  }
  return 0;
}

inline constexpr std::array<Subgroup, kSubgroupCount> kAllSubgroups = [] {
  std::array<Subgroup, kSubgroupCount> a{};
  for (int i = 0; i < kSubgroupCount; ++i) a[i] = static_cast<Subgroup>(i);
  return a;
}();

inline constexpr std::array<std::string_view, kSubgroupCount> kSubgroupNames = {
    "V",
    "x", "y", "z", "xy", "xz", "yz", "xyz",
    "z-up", "z-down", "y-up", "y-down", "x-up", "x-down",
    "xyz-up", "xyz-down", "xy-up", "xy-down", "yz-up", "yz-down",
    "I-up", "I-down", "II-up", "II-down", "III-up", "III-down",
};

constexpr std::string_view subgroup_name(Subgroup g) {
  return kSubgroupNames[static_cast<int>(g)];
}

constexpr std::string_view micro_kind_name(MicroKind k) {
  switch (k) {
    case MicroKind::Vertex: return "vertex";
    case MicroKind::Edge: return "edge";
    case MicroKind::Face: return "face";
    case MicroKind::Cell: return "cell";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Cardinalities and widths
// ---------------------------------------------------------------------------

constexpr std::int64_t n_tri(std::int64_t w) {
  return w > 0 ? w * (w + 1) / 2 : 0;
}

constexpr std::int64_t n_tet(std::int64_t w) {
  return w > 0 ? w * (w + 1) * (w + 2) / 6 : 0;
}

/// Raw width formula; may be <= 0 on coarse levels where a class is absent.
/// The value for FaceXYZDown is 2^l - 1: the published table's 2^l - 2 breaks
/// both the face-total identity 2*8^l + 2*4^l and the Euler characteristic,
/// and the constructive classification counts n_tet(2^l - 1) instances.
constexpr int width_formula(Subgroup g, Level level) {
  const int n = 1 << level;
  switch (g) {
    case Subgroup::V:
      return n + 1;
    case Subgroup::EdgeXYZ:
    case Subgroup::FaceZDown:
    case Subgroup::FaceYDown:
    case Subgroup::FaceXDown:
    case Subgroup::FaceXYZDown:
    case Subgroup::FaceXYUp:
    case Subgroup::FaceXYDown:
    case Subgroup::FaceYZUp:
    case Subgroup::FaceYZDown:
    case Subgroup::CellIIUp:
    case Subgroup::CellIIDown:
    case Subgroup::CellIIIUp:
    case Subgroup::CellIIIDown:
      return n - 1;
    case Subgroup::CellIDown:
      return n - 2;
    default:
      return n;  // V-adjacent edges, up faces of boundary planes, CellIUp
  }
}

/// Instances per macro-cell side; classes absent on a level (possible only
/// for level < 2) raise.
inline int width(Subgroup g, Level level) {
  if (level < 0) throw std::invalid_argument("width: negative level");
  const int w = width_formula(g, level);
  if (w <= 0)
    throw std::domain_error(std::string("width: subgroup ") +
                            std::string(subgroup_name(g)) +
                            " has no instances on level " +
                            std::to_string(level));
  return w;
}

// ---------------------------------------------------------------------------
// Linearization of I_tet(w) = {(i,j,k) : i+j+k < w, i,j,k >= 0}
// ---------------------------------------------------------------------------

constexpr bool in_i_tet(int w, Idx3 p) {
  return p[0] >= 0 && p[1] >= 0 && p[2] >= 0 && idx_sum(p) < w;
}

/// Position of p in the k-outer, j-middle, i-inner enumeration of I_tet(w).
constexpr std::int64_t linearize(int w, Idx3 p) {
  const int i = p[0], j = p[1], k = p[2];
  return n_tet(w) - n_tet(w - k) + n_tri(w - k) - n_tri(w - k - j) + i;
}

inline std::int64_t linearize_checked(int w, Idx3 p) {
  if (!in_i_tet(w, p))
    throw std::out_of_range("linearize: index outside I_tet(w)");
  return linearize(w, p);
}

/// Inverse of linearize by layer-wise subtraction; exact integer arithmetic.
inline Idx3 delinearize(int w, std::int64_t t) {
  if (t < 0 || t >= n_tet(w))
    throw std::out_of_range("delinearize: offset out of range");
  int k = 0;
  while (t >= n_tri(w - k)) t -= n_tri(w - k), ++k;
  int j = 0;
  while (t >= w - k - j) t -= w - k - j, ++j;
  return {static_cast<int>(t), j, k};
}

inline std::int64_t linearize_aos(int w, int m, Idx3 p, int d) {
  if (d < 0 || d >= m) throw std::out_of_range("linearize_aos: bad DoF index");
  return m * linearize_checked(w, p) + d;
}

inline std::int64_t linearize_soa(int w, int m, Idx3 p, int d) {
  if (d < 0 || d >= m) throw std::out_of_range("linearize_soa: bad DoF index");
  return d * n_tet(w) + linearize_checked(w, p);
}

/// Visits I_tet(w) in linearization order (k outer, j middle, i inner).
template <class F>
constexpr void for_each_index(int w, F&& f) {
  for (int k = 0; k < w; ++k)
    for (int j = 0; j < w - k; ++j)
      for (int i = 0; i < w - k - j; ++i) f(Idx3{i, j, k});
}

inline std::vector<Idx3> index_set(int w) {
  std::vector<Idx3> out;
  out.reserve(static_cast<std::size_t>(n_tet(w)));
  for_each_index(w, [&](Idx3 p) { out.push_back(p); });
  return out;
}

// ---------------------------------------------------------------------------
// Frozen subgroup geometry
// ---------------------------------------------------------------------------
//
// Offsets of an instance's micro-vertices relative to its anchor, where the
// anchor is the componentwise minimum of the vertex coordinates. Generated by
// the constructive refinement oracle and frozen here; the oracle test
// regenerates them from scratch and compares.
//
// Naming conventions (fixed once, by the table generator):
//  * edge tags are lattice directions: x=(1,0,0), y=(0,1,0), z=(0,0,1),
//    xy=(1,-1,0), xz=(1,0,-1), yz=(0,1,-1), xyz=(1,-1,1) up to sign; xyz is
//    the interior-diagonal direction of the refinement rule,
//  * face tags are plane normals: x/y/z faces lie in coordinate planes,
//    xyz faces parallel the diagonal boundary plane, xy=(1,1,0) and
//    yz=(0,1,1) are the two interior orientations (no xz-normal class
//    exists),
//  * within a family, -up is the larger-width class where widths differ and
//    the lexicographically smaller offset key otherwise; each -up/-down pair
//    is related by point reflection,
//  * cell vertex offsets are stored in refinement-rule generation order,
//    which is identical for every instance of a class; cells of the I-down,
//    II-down, and III-down classes are negatively oriented in that order.

namespace detail {

inline constexpr std::array<Idx3, 1> kOffV = {Idx3{0, 0, 0}};

inline constexpr std::array<std::array<Idx3, 2>, 7> kOffEdge = {{
    {Idx3{0, 0, 0}, Idx3{1, 0, 0}},  // x
    {Idx3{0, 0, 0}, Idx3{0, 1, 0}},  // y
    {Idx3{0, 0, 0}, Idx3{0, 0, 1}},  // z
    {Idx3{0, 1, 0}, Idx3{1, 0, 0}},  // xy
    {Idx3{0, 0, 1}, Idx3{1, 0, 0}},  // xz
    {Idx3{0, 0, 1}, Idx3{0, 1, 0}},  // yz
    {Idx3{0, 1, 0}, Idx3{1, 0, 1}},  // xyz
}};

inline constexpr std::array<std::array<Idx3, 3>, 12> kOffFace = {{
    {Idx3{0, 0, 0}, Idx3{0, 1, 0}, Idx3{1, 0, 0}},  // z-up
    {Idx3{0, 1, 0}, Idx3{1, 0, 0}, Idx3{1, 1, 0}},  // z-down
    {Idx3{0, 0, 0}, Idx3{0, 0, 1}, Idx3{1, 0, 0}},  // y-up
    {Idx3{0, 0, 1}, Idx3{1, 0, 0}, Idx3{1, 0, 1}},  // y-down
    {Idx3{0, 0, 0}, Idx3{0, 0, 1}, Idx3{0, 1, 0}},  // x-up
    {Idx3{0, 0, 1}, Idx3{0, 1, 0}, Idx3{0, 1, 1}},  // x-down
    {Idx3{0, 0, 1}, Idx3{0, 1, 0}, Idx3{1, 0, 0}},  // xyz-up
    {Idx3{0, 1, 1}, Idx3{1, 0, 1}, Idx3{1, 1, 0}},  // xyz-down
    {Idx3{0, 1, 0}, Idx3{0, 1, 1}, Idx3{1, 0, 1}},  // xy-up
    {Idx3{0, 1, 0}, Idx3{1, 0, 0}, Idx3{1, 0, 1}},  // xy-down
    {Idx3{0, 0, 1}, Idx3{0, 1, 0}, Idx3{1, 0, 1}},  // yz-up
    {Idx3{0, 1, 0}, Idx3{1, 0, 1}, Idx3{1, 1, 0}},  // yz-down
}};

inline constexpr std::array<std::array<Idx3, 4>, 6> kOffCell = {{
    {Idx3{0, 0, 0}, Idx3{1, 0, 0}, Idx3{0, 1, 0}, Idx3{0, 0, 1}},  // I-up
    {Idx3{1, 1, 0}, Idx3{1, 0, 1}, Idx3{0, 1, 1}, Idx3{1, 1, 1}},  // I-down
    {Idx3{0, 1, 0}, Idx3{0, 0, 1}, Idx3{1, 0, 1}, Idx3{0, 1, 1}},  // II-up
    {Idx3{1, 0, 0}, Idx3{0, 1, 0}, Idx3{1, 1, 0}, Idx3{1, 0, 1}},  // II-down
    {Idx3{1, 0, 0}, Idx3{0, 1, 0}, Idx3{0, 0, 1}, Idx3{1, 0, 1}},  // III-up
    {Idx3{0, 1, 0}, Idx3{1, 1, 0}, Idx3{1, 0, 1}, Idx3{0, 1, 1}},  // III-down
}};

}  // namespace detail

/// Micro-vertex offsets of one instance relative to its anchor.
inline std::span<const Idx3> subgroup_offsets(Subgroup g) {
  const int v = static_cast<int>(g);
  if (v == 0) return detail::kOffV;
  if (v <= 7) return detail::kOffEdge[v - 1];
  if (v <= 19) return detail::kOffFace[v - 8];
  return detail::kOffCell[v - 20];
}

/// Physical coordinate of a micro-vertex inside the reference tetrahedron.
inline Vec3 micro_vertex_coord(Level level, Idx3 p) {
  if (!in_i_tet((1 << level) + 1, p))
    throw std::out_of_range("micro_vertex_coord: index outside lattice");
  const double h = 1.0 / (1 << level);
  return {h * p[0], h * p[1], h * p[2]};
}

/// Micro-vertex lattice indices of the instance of g anchored at p.
inline std::vector<Idx3> micro_primitive_vertices(Subgroup g, Idx3 p,
                                                  Level level) {
  const int w = width(g, level);
  if (!in_i_tet(w, p))
    throw std::out_of_range("micro_primitive_vertices: anchor out of range");
  std::vector<Idx3> out;
  for (Idx3 off : subgroup_offsets(g)) out.push_back(p + off);
  return out;
}

/// Total DoFs of a space on a single macro-cell at one level.
inline std::int64_t dof_count(
    std::span<const std::pair<Subgroup, int>> entries, Level level) {
  std::int64_t total = 0;
  for (auto [g, m] : entries) total += m * n_tet(width(g, level));
  return total;
}

}  // namespace blocktet
