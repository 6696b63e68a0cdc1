#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "blocktet/coarse_mesh.hpp"
#include "blocktet/geometry.hpp"
#include "blocktet/micro_index.hpp"

namespace blocktet {

enum class LayoutKind : std::uint8_t { AoS, SoA };

inline constexpr std::string_view layout_name(LayoutKind k) {
  return k == LayoutKind::AoS ? "aos" : "soa";
}

/// Which DoFs a function carries: m values per micro-primitive for each listed
/// subgroup. Entries are kept sorted by subgroup id and must be distinct; all
/// edge entries share one m so that interface DoFs pair up componentwise even
/// when the two sides of a macro face classify a micro-edge differently.
struct SpaceDescriptor {
  std::string name;
  std::vector<std::pair<Subgroup, int>> entries;
  LayoutKind layout = LayoutKind::AoS;

  int entry_of(Subgroup g) const {
    for (std::size_t e = 0; e < entries.size(); ++e)
      if (entries[e].first == g) return static_cast<int>(e);
    return -1;
  }

  bool same_space(const SpaceDescriptor& o) const { return entries == o.entries; }
};

inline SpaceDescriptor p1_space(LayoutKind layout = LayoutKind::AoS) {
  return {"p1", {{Subgroup::V, 1}}, layout};
}

inline SpaceDescriptor p2_space(LayoutKind layout = LayoutKind::AoS) {
  SpaceDescriptor d{"p2", {{Subgroup::V, 1}}, layout};
  for (int g = 1; g <= 7; ++g)
    d.entries.emplace_back(static_cast<Subgroup>(g), 1);
  return d;
}

namespace detail {

inline void validate_descriptor(const SpaceDescriptor& d) {
  if (d.entries.empty())
    throw std::invalid_argument("space descriptor has no entries");
  int edge_m = -1;
  for (std::size_t e = 0; e < d.entries.size(); ++e) {
    if (e > 0 && !(d.entries[e - 1].first < d.entries[e].first))
      throw std::invalid_argument("space descriptor entries must be sorted and distinct");
    if (d.entries[e].second < 1)
      throw std::invalid_argument("space descriptor needs m >= 1");
    if (subgroup_kind(d.entries[e].first) == MicroKind::Face)
      throw std::invalid_argument(
          "face subgroup DoFs are not supported (no interface identification)");
    if (subgroup_kind(d.entries[e].first) == MicroKind::Edge) {
      if (edge_m >= 0 && edge_m != d.entries[e].second)
        throw std::invalid_argument("edge entries must share one m");
      edge_m = d.entries[e].second;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Grid: mesh + per-level interface identification
// ---------------------------------------------------------------------------
//
// All storage lives on macro-cells; DoFs on shared macro faces/edges/vertices
// are replicated per adjacent cell. Replicas are identified symbolically: a
// lattice point maps to integer barycentric weights over the macro corners,
// and the multiset {(macro vertex id, weight)} of its positive entries is a
// position key that is independent of which cell computed it. Edge midpoints
// use the weight sum of their endpoints; vertex weights are doubled to put
// both on one scale (keys of distinct physical points never collide).

class Grid {
 public:
  struct Member {
    int cell;
    Subgroup g;
    std::int64_t t;  // linearized lattice offset within (cell, g)
    auto operator<=>(const Member&) const = default;
  };

  struct CellMasks {
    std::vector<std::uint8_t> owned;
    std::vector<std::uint8_t> dirichlet;
  };

  Grid(CoarseMesh mesh, int min_level, int max_level)
      : mesh_(std::move(mesh)), min_(min_level), max_(max_level) {
    if (min_ < 2 || max_ > 6 || min_ > max_)
      throw std::invalid_argument("grid levels must satisfy 2 <= min <= max <= 6");
    maps_.reserve(mesh_.n_cells());
    for (int c = 0; c < mesh_.n_cells(); ++c)
      maps_.push_back(macro_cell_map(mesh_, c));
    levels_.resize(max_ - min_ + 1);
    for (int l = min_; l <= max_; ++l) build_level(l);
  }

  const CoarseMesh& mesh() const { return mesh_; }
  int min_level() const { return min_; }
  int max_level() const { return max_; }
  bool has_level(Level l) const { return l >= min_ && l <= max_; }
  const MacroCellMap& cell_map(int c) const { return maps_[c]; }

  const std::vector<std::vector<Member>>& groups(Level l) const {
    return level(l).groups;
  }

  /// Masks exist for the vertex subgroup and the seven edge subgroups.
  const CellMasks& masks(Level l, int cell, Subgroup g) const {
    const int slot = static_cast<int>(g);
    if (slot > 7) throw std::invalid_argument("masks: vertex or edge subgroup expected");
    return level(l).masks[cell][slot];
  }

 private:
  struct LevelData {
    std::vector<std::vector<Member>> groups;
    std::vector<std::array<CellMasks, 8>> masks;
  };

  const LevelData& level(Level l) const {
    if (!has_level(l)) throw std::out_of_range("level not covered by grid");
    return levels_[l - min_];
  }

  // Integer barycentric weights of lattice point p over the macro corners,
  // on the doubled scale (sums to 2^(level+1)).
  std::array<std::int64_t, 4> bary2(Level l, Idx3 p) const {
    const std::int64_t n = std::int64_t{1} << l;
    return {2 * (n - idx_sum(p)), 2 * p[0], 2 * p[1], 2 * p[2]};
  }

  using Key = std::vector<std::pair<int, std::int64_t>>;

  Key position_key(int cell, const std::array<std::int64_t, 4>& w) const {
    Key key;
    for (int i = 0; i < 4; ++i)
      if (w[i] > 0) key.emplace_back(mesh_.cells[cell][i], w[i]);
    std::sort(key.begin(), key.end());
    return key;
  }

  void build_level(Level l) {
    LevelData& data = levels_[l - min_];
    data.masks.resize(mesh_.n_cells());

    std::map<Key, std::vector<Member>> shared;
    for (int c = 0; c < mesh_.n_cells(); ++c) {
      const std::array<int, 4> cf = mesh_.cell_face_indices(c);
      const auto dirichlet_face = [&](int local) {
        return mesh_.boundary_flags[cf[local]] != 0;
      };
      for (int slot = 0; slot <= 7; ++slot) {
        const Subgroup g = static_cast<Subgroup>(slot);
        const int w = width_formula(g, l);
        const std::int64_t count = w > 0 ? n_tet(w) : 0;
        CellMasks& masks = data.masks[c][slot];
        masks.owned.assign(count, 1);
        masks.dirichlet.assign(count, 0);
        const auto offs = subgroup_offsets(g);
        std::int64_t t = 0;
        for_each_index(w > 0 ? w : 0, [&](Idx3 p) {
          std::array<std::int64_t, 4> wsum{};
          std::array<std::int64_t, 4> wmax{};
          for (const Idx3& o : offs) {
            const auto b = bary2(l, p + o);
            for (int i = 0; i < 4; ++i) {
              wsum[i] += b[i];
              wmax[i] = std::max(wmax[i], b[i]);
            }
          }
          // The primitive lies in a macro face iff every one of its vertices
          // has zero barycentric weight on the opposite corner.
          for (int local = 0; local < 4; ++local)
            if (wmax[local] == 0 && dirichlet_face(local))
              masks.dirichlet[t] = 1;
          // Replication scale: divide edge sums by the primitive size so
          // vertex and edge keys live on one doubled-barycentric scale.
          for (auto& v : wsum) v /= static_cast<std::int64_t>(offs.size());
          int support = 0;
          for (std::int64_t v : wsum) support += v > 0;
          if (support < 4) shared[position_key(c, wsum)].push_back({c, g, t});
          ++t;
        });
      }
    }

    for (auto& [key, members] : shared) {
      if (members.size() < 2) continue;
      std::sort(members.begin(), members.end());
      std::uint8_t dir = 0;
      for (const Member& m : members)
        dir |= data.masks[m.cell][static_cast<int>(m.g)].dirichlet[m.t];
      for (std::size_t i = 0; i < members.size(); ++i) {
        auto& cm = data.masks[members[i].cell][static_cast<int>(members[i].g)];
        cm.dirichlet[members[i].t] = dir;
        if (i > 0) cm.owned[members[i].t] = 0;
      }
      data.groups.push_back(std::move(members));
    }
  }

  CoarseMesh mesh_;
  int min_, max_;
  std::vector<MacroCellMap> maps_;
  std::vector<LevelData> levels_;
};

// ---------------------------------------------------------------------------
// FEFunction
// ---------------------------------------------------------------------------

struct FEFunction {
  std::shared_ptr<const Grid> grid;
  SpaceDescriptor descriptor;
  int min_level = 0;
  int max_level = -1;
  // values[level - min_level][cell][entry]
  std::vector<std::vector<std::vector<std::vector<double>>>> values;

  int width_of(int entry, Level l) const {
    return width_formula(descriptor.entries[entry].first, l);
  }

  std::int64_t slots_of(int entry, Level l) const {
    const int w = width_of(entry, l);
    return w > 0 ? n_tet(w) : 0;
  }

  std::vector<double>& array(Level l, int cell, int entry) {
    return values[check_level(l)][cell][entry];
  }
  const std::vector<double>& array(Level l, int cell, int entry) const {
    return values[check_level(l)][cell][entry];
  }

  /// Layout-aware slot offset of (lattice offset t, component d).
  std::int64_t offset(Level l, int entry, std::int64_t t, int d) const {
    const int m = descriptor.entries[entry].second;
    return descriptor.layout == LayoutKind::AoS ? m * t + d
                                                : d * slots_of(entry, l) + t;
  }

  double& at(Level l, int cell, int entry, std::int64_t t, int d) {
    return array(l, cell, entry)[offset(l, entry, t, d)];
  }
  double at(Level l, int cell, int entry, std::int64_t t, int d) const {
    return array(l, cell, entry)[offset(l, entry, t, d)];
  }

  int check_level(Level l) const {
    if (l < min_level || l > max_level)
      throw std::out_of_range("level not allocated");
    return l - min_level;
  }
};

inline FEFunction allocate(const SpaceDescriptor& descriptor,
                           std::shared_ptr<const Grid> grid, int min_level = -1,
                           int max_level = -1) {
  detail::validate_descriptor(descriptor);
  if (!grid) throw std::invalid_argument("allocate: grid required");
  if (min_level < 0) min_level = grid->min_level();
  if (max_level < 0) max_level = grid->max_level();
  if (!grid->has_level(min_level) || !grid->has_level(max_level) ||
      min_level > max_level)
    throw std::out_of_range("allocate: levels outside grid range");
  FEFunction fn;
  fn.grid = std::move(grid);
  fn.descriptor = descriptor;
  fn.min_level = min_level;
  fn.max_level = max_level;
  fn.values.resize(max_level - min_level + 1);
  const int cells = fn.grid->mesh().n_cells();
  for (int l = min_level; l <= max_level; ++l) {
    auto& per_cell = fn.values[l - min_level];
    per_cell.resize(cells);
    for (int c = 0; c < cells; ++c) {
      per_cell[c].resize(descriptor.entries.size());
      for (std::size_t e = 0; e < descriptor.entries.size(); ++e)
        per_cell[c][e].assign(
            static_cast<std::size_t>(descriptor.entries[e].second) *
                fn.slots_of(static_cast<int>(e), l),
            0.0);
    }
  }
  return fn;
}

namespace detail {

inline void check_compatible(const FEFunction& a, const FEFunction& b, Level l) {
  if (a.grid.get() != b.grid.get())
    throw std::invalid_argument("functions live on different grids");
  if (!a.descriptor.same_space(b.descriptor))
    throw std::invalid_argument("descriptor mismatch");
  a.check_level(l);
  b.check_level(l);
}

}  // namespace detail

// --- elementwise algebra (replicas included) -------------------------------

inline void assign(FEFunction& fn, Level l, double value) {
  for (auto& per_entry : fn.values[fn.check_level(l)])
    for (auto& arr : per_entry) std::fill(arr.begin(), arr.end(), value);
}

inline void scale(FEFunction& fn, Level l, double s) {
  for (auto& per_entry : fn.values[fn.check_level(l)])
    for (auto& arr : per_entry)
      for (double& v : arr) v *= s;
}

inline void copy(const FEFunction& src, FEFunction& dst, Level l) {
  detail::check_compatible(src, dst, l);
  const auto& sv = src.values[src.check_level(l)];
  auto& dv = dst.values[dst.check_level(l)];
  for (std::size_t c = 0; c < sv.size(); ++c)
    for (std::size_t e = 0; e < sv[c].size(); ++e) {
      if (src.descriptor.layout == dst.descriptor.layout) {
        dv[c][e] = sv[c][e];
      } else {
        const int m = src.descriptor.entries[e].second;
        const std::int64_t n = src.slots_of(static_cast<int>(e), l);
        for (std::int64_t t = 0; t < n; ++t)
          for (int d = 0; d < m; ++d)
            dst.at(l, static_cast<int>(c), static_cast<int>(e), t, d) =
                src.at(l, static_cast<int>(c), static_cast<int>(e), t, d);
      }
    }
}

inline void axpy(FEFunction& y, double a, const FEFunction& x, Level l) {
  detail::check_compatible(x, y, l);
  for (int c = 0; c < y.grid->mesh().n_cells(); ++c)
    for (std::size_t e = 0; e < y.descriptor.entries.size(); ++e) {
      if (x.descriptor.layout == y.descriptor.layout) {
        auto& ya = y.array(l, c, static_cast<int>(e));
        const auto& xa = x.array(l, c, static_cast<int>(e));
        for (std::size_t i = 0; i < ya.size(); ++i) ya[i] += a * xa[i];
      } else {
        const int m = y.descriptor.entries[e].second;
        const std::int64_t n = y.slots_of(static_cast<int>(e), l);
        for (std::int64_t t = 0; t < n; ++t)
          for (int d = 0; d < m; ++d)
            y.at(l, c, static_cast<int>(e), t, d) +=
                a * x.at(l, c, static_cast<int>(e), t, d);
      }
    }
}

/// Owned-DoF scalar product: each physical DoF counted once, accumulated in
/// the fixed (cell, entry, lattice, component) order so the result is bitwise
/// reproducible and layout-independent.
inline double dot(const FEFunction& x, const FEFunction& y, Level l) {
  detail::check_compatible(x, y, l);
  double acc = 0;
  for (int c = 0; c < x.grid->mesh().n_cells(); ++c)
    for (std::size_t e = 0; e < x.descriptor.entries.size(); ++e) {
      const auto [g, m] = x.descriptor.entries[e];
      const std::int64_t n = x.slots_of(static_cast<int>(e), l);
      const std::uint8_t* owned =
          static_cast<int>(g) <= 7 ? x.grid->masks(l, c, g).owned.data()
                                   : nullptr;
      for (std::int64_t t = 0; t < n; ++t) {
        if (owned && !owned[t]) continue;
        for (int d = 0; d < m; ++d)
          acc += x.at(l, c, static_cast<int>(e), t, d) *
                 y.at(l, c, static_cast<int>(e), t, d);
      }
    }
  return acc;
}

inline double norm2(const FEFunction& x, Level l) { return std::sqrt(dot(x, x, l)); }

// --- interface synchronization ----------------------------------------------

inline void sync_additive(FEFunction& fn, Level l) {
  fn.check_level(l);
  for (const auto& group : fn.grid->groups(l)) {
    int e0 = -1, present = 0;
    for (const Grid::Member& m : group)
      if (fn.descriptor.entry_of(m.g) >= 0) {
        if (e0 < 0) e0 = fn.descriptor.entry_of(m.g);
        ++present;
      }
    if (present < 2) continue;
    const int m_dofs = fn.descriptor.entries[e0].second;
    for (int d = 0; d < m_dofs; ++d) {
      double sum = 0;
      for (const Grid::Member& mem : group) {
        const int e = fn.descriptor.entry_of(mem.g);
        if (e >= 0) sum += fn.at(l, mem.cell, e, mem.t, d);
      }
      for (const Grid::Member& mem : group) {
        const int e = fn.descriptor.entry_of(mem.g);
        if (e >= 0) fn.at(l, mem.cell, e, mem.t, d) = sum;
      }
    }
  }
}

inline void sync_broadcast(FEFunction& fn, Level l) {
  fn.check_level(l);
  for (const auto& group : fn.grid->groups(l)) {
    int eo = -1;
    const Grid::Member* owner = nullptr;
    for (const Grid::Member& m : group)
      if (fn.descriptor.entry_of(m.g) >= 0) {
        owner = &m;
        eo = fn.descriptor.entry_of(m.g);
        break;
      }
    if (!owner) continue;
    const int m_dofs = fn.descriptor.entries[eo].second;
    for (const Grid::Member& mem : group) {
      if (&mem == owner) continue;
      const int e = fn.descriptor.entry_of(mem.g);
      if (e < 0) continue;
      for (int d = 0; d < m_dofs; ++d)
        fn.at(l, mem.cell, e, mem.t, d) = fn.at(l, owner->cell, eo, owner->t, d);
    }
  }
}

// --- interpolation and evaluation -------------------------------------------

/// Sets each DoF to f at its physical node (vertex, or primitive centroid for
/// higher kinds), then broadcasts so replicas are bitwise identical even
/// though the sharing cells' affine maps round differently.
template <class F>
void interpolate(FEFunction& fn, Level l, F&& f) {
  fn.check_level(l);
  for (int c = 0; c < fn.grid->mesh().n_cells(); ++c) {
    const MacroCellMap& map = fn.grid->cell_map(c);
    for (std::size_t e = 0; e < fn.descriptor.entries.size(); ++e) {
      const auto [g, m] = fn.descriptor.entries[e];
      const int w = fn.width_of(static_cast<int>(e), l);
      const auto offs = subgroup_offsets(g);
      std::int64_t t = 0;
      for_each_index(w > 0 ? w : 0, [&](Idx3 p) {
        Vec3 ref{0, 0, 0};
        for (const Idx3& o : offs) ref = ref + micro_vertex_coord(l, p + o);
        ref = ref * (1.0 / static_cast<double>(offs.size()));
        const double value = f(map.map(ref));
        for (int d = 0; d < m; ++d)
          fn.at(l, c, static_cast<int>(e), t, d) = value;
        ++t;
      });
    }
  }
  sync_broadcast(fn, l);
}

/// Seeded uniform(-1,1) fill of owned DoFs in canonical order, replicas
/// broadcast afterwards; identical values for AoS and SoA.
inline void random_fill(FEFunction& fn, Level l, std::uint64_t seed) {
  fn.check_level(l);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int c = 0; c < fn.grid->mesh().n_cells(); ++c)
    for (std::size_t e = 0; e < fn.descriptor.entries.size(); ++e) {
      const auto [g, m] = fn.descriptor.entries[e];
      const std::int64_t n = fn.slots_of(static_cast<int>(e), l);
      const std::uint8_t* owned =
          static_cast<int>(g) <= 7 ? fn.grid->masks(l, c, g).owned.data()
                                   : nullptr;
      for (std::int64_t t = 0; t < n; ++t) {
        if (owned && !owned[t]) continue;
        for (int d = 0; d < m; ++d)
          fn.at(l, c, static_cast<int>(e), t, d) = dist(rng);
      }
    }
  sync_broadcast(fn, l);
}

/// Point evaluation of a P1 function: locate the macro-cell by inverse affine
/// map, then the containing micro-cell by probing anchors near the lattice
/// floor, and interpolate barycentrically.
inline double evaluate_at(const FEFunction& fn, Level l, Vec3 point) {
  fn.check_level(l);
  if (fn.descriptor.entries.size() != 1 ||
      fn.descriptor.entries[0].first != Subgroup::V)
    throw std::invalid_argument("evaluate_at supports P1 functions only");
  const double n = static_cast<double>(std::int64_t{1} << l);
  const int wv = width_formula(Subgroup::V, l);

  for (int c = 0; c < fn.grid->mesh().n_cells(); ++c) {
    const MacroCellMap& map = fn.grid->cell_map(c);
    const Vec3 r = map.a.inverse() * (point - map.b);
    if (std::min({r.x, r.y, r.z, 1.0 - r.x - r.y - r.z}) < -1e-12) continue;
    const Vec3 u = r * n;  // real-valued lattice coordinates
    const Idx3 base = {static_cast<int>(std::floor(u.x)),
                       static_cast<int>(std::floor(u.y)),
                       static_cast<int>(std::floor(u.z))};
    for (int dz = 0; dz <= 1; ++dz)
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          const Idx3 anchor = base - Idx3{dx, dy, dz};
          for (int s = 20; s < 26; ++s) {
            const Subgroup g = static_cast<Subgroup>(s);
            const int w = width_formula(g, l);
            if (w <= 0 || !in_i_tet(w, anchor)) continue;
            const auto offs = subgroup_offsets(g);
            std::array<Vec3, 4> q{};
            for (int i = 0; i < 4; ++i) {
              const Idx3 v = anchor + offs[i];
              q[i] = {static_cast<double>(v[0]), static_cast<double>(v[1]),
                      static_cast<double>(v[2])};
            }
            const Mat3 edges = from_columns(q[1] - q[0], q[2] - q[0], q[3] - q[0]);
            const Vec3 lam = edges.inverse() * (u - q[0]);
            const double lam0 = 1.0 - lam.x - lam.y - lam.z;
            if (std::min({lam0, lam.x, lam.y, lam.z}) < -1e-9) continue;
            const std::array<double, 4> weight = {lam0, lam.x, lam.y, lam.z};
            double value = 0;
            for (int i = 0; i < 4; ++i)
              value += weight[i] *
                       fn.at(l, c, 0, linearize(wv, anchor + offs[i]), 0);
            return value;
          }
        }
  }
  throw std::domain_error("evaluate_at: point outside the domain");
}

/// Number of distinct physical DoFs (owned slots) of a function at a level.
inline std::int64_t owned_dof_count(const FEFunction& fn, Level l) {
  fn.check_level(l);
  std::int64_t count = 0;
  for (int c = 0; c < fn.grid->mesh().n_cells(); ++c)
    for (const auto& [g, m] : fn.descriptor.entries) {
      const int w = width_formula(g, l);
      const std::int64_t n = w > 0 ? n_tet(w) : 0;
      if (static_cast<int>(g) > 7) {
        count += m * n;
        continue;
      }
      const auto& owned = fn.grid->masks(l, c, g).owned;
      for (std::int64_t t = 0; t < n; ++t)
        if (owned[t]) count += m;
    }
  return count;
}

}  // namespace blocktet
