#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "blocktet/operators.hpp"

namespace blocktet {

/// Dense numbering of the distinct physical P1 DoFs: owned slots get ids in
/// canonical (cell, lattice) order, replicas resolve to the owner's id.
struct GlobalEnumeration {
  std::int64_t n = 0;
  std::vector<std::vector<std::int64_t>> ids;        // [cell][t]
  std::vector<std::uint8_t> dirichlet;               // per global id
};

inline GlobalEnumeration enumerate_global(const Grid& grid, Level l) {
  GlobalEnumeration e;
  const int cells = grid.mesh().n_cells();
  const std::int64_t slots = n_tet(width_formula(Subgroup::V, l));
  e.ids.assign(cells, std::vector<std::int64_t>(slots, -1));
  for (int c = 0; c < cells; ++c) {
    const auto& owned = grid.masks(l, c, Subgroup::V).owned;
    for (std::int64_t t = 0; t < slots; ++t)
      if (owned[t]) e.ids[c][t] = e.n++;
  }
  for (const auto& group : grid.groups(l)) {
    if (group.front().g != Subgroup::V) continue;
    const std::int64_t owner_id = e.ids[group[0].cell][group[0].t];
    for (const Grid::Member& m : group) e.ids[m.cell][m.t] = owner_id;
  }
  e.dirichlet.assign(e.n, 0);
  for (int c = 0; c < cells; ++c) {
    const auto& dir = grid.masks(l, c, Subgroup::V).dirichlet;
    for (std::int64_t t = 0; t < slots; ++t)
      if (dir[t]) e.dirichlet[e.ids[c][t]] = 1;
  }
  return e;
}

struct SparseMatrix {
  std::int64_t n = 0;
  std::vector<std::int64_t> row_offsets;  // size n+1
  std::vector<std::int64_t> cols;         // sorted unique per row
  std::vector<double> vals;

  double at(std::int64_t r, std::int64_t c) const {
    for (std::int64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
      if (cols[k] == c) return vals[k];
    return 0.0;
  }
};

/// Conventional triplet assembly over all micro-cells, using the same
/// local_matrix as the matrix-free path; the optional cell_order exists to
/// probe that reassembly under permuted macro traversal only reassociates
/// floating-point sums.
inline SparseMatrix assemble(const FormId& form, const Grid& grid, Level l,
                             BC bc = BC::None,
                             std::span<const int> cell_order = {}) {
  const GlobalEnumeration e = enumerate_global(grid, l);
  std::vector<int> order(cell_order.begin(), cell_order.end());
  if (order.empty()) {
    order.resize(grid.mesh().n_cells());
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = static_cast<int>(c);
  }

  std::vector<std::tuple<std::int64_t, std::int64_t, double>> trip;
  for (int c : order) {
    const MacroCellMap& map = grid.cell_map(c);
    const auto cls = form.constant_coefficient()
                         ? detail::class_matrices(form, grid, c, l)
                         : std::array<ElementMatrix, 6>{};
    const int wv = width_formula(Subgroup::V, l);
    for (int s = 0; s < 6; ++s) {
      const Subgroup g = static_cast<Subgroup>(20 + s);
      const int w = width_formula(g, l);
      if (w <= 0) continue;
      const auto offs = subgroup_offsets(g);
      for_each_index(w, [&](Idx3 p) {
        ElementMatrix em;
        if (form.constant_coefficient()) {
          em = cls[s];
        } else {
          std::array<Vec3, 4> corners{};
          for (int i = 0; i < 4; ++i)
            corners[i] = map.map(micro_vertex_coord(l, p + offs[i]));
          em = local_matrix(form, corners);
        }
        std::array<std::int64_t, 4> gid{};
        for (int i = 0; i < 4; ++i)
          gid[i] = e.ids[c][linearize(wv, p + offs[i])];
        for (int i = 0; i < 4; ++i) {
          if (bc == BC::DirichletIdentity && e.dirichlet[gid[i]]) continue;
          for (int j = 0; j < 4; ++j) trip.emplace_back(gid[i], gid[j], em(i, j));
        }
      });
    }
  }
  if (bc == BC::DirichletIdentity)
    for (std::int64_t r = 0; r < e.n; ++r)
      if (e.dirichlet[r]) trip.emplace_back(r, r, 1.0);

  std::stable_sort(trip.begin(), trip.end(),
                   [](const auto& a, const auto& b) {
                     return std::tie(std::get<0>(a), std::get<1>(a)) <
                            std::tie(std::get<0>(b), std::get<1>(b));
                   });
  SparseMatrix a;
  a.n = e.n;
  a.row_offsets.assign(e.n + 1, 0);
  for (std::size_t k = 0; k < trip.size();) {
    const auto [r, c, v0] = trip[k];
    double v = 0;
    for (; k < trip.size() && std::get<0>(trip[k]) == r &&
           std::get<1>(trip[k]) == c;
         ++k)
      v += std::get<2>(trip[k]);
    a.cols.push_back(c);
    a.vals.push_back(v);
    ++a.row_offsets[r + 1];
  }
  for (std::int64_t r = 0; r < e.n; ++r)
    a.row_offsets[r + 1] += a.row_offsets[r];
  return a;
}

inline std::vector<double> spmv(const SparseMatrix& a,
                                std::span<const double> x) {
  if (static_cast<std::int64_t>(x.size()) != a.n)
    throw std::invalid_argument("spmv: dimension mismatch");
  std::vector<double> y(a.n, 0.0);
  for (std::int64_t r = 0; r < a.n; ++r)
    for (std::int64_t k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
      y[r] += a.vals[k] * x[a.cols[k]];
  return y;
}

/// Owned values in enumeration order.
inline std::vector<double> gather(const FEFunction& fn,
                                  const GlobalEnumeration& e, Level l) {
  detail::require_p1(fn);
  std::vector<double> x(e.n, 0.0);
  for (int c = 0; c < fn.grid->mesh().n_cells(); ++c) {
    const auto& owned = fn.grid->masks(l, c, Subgroup::V).owned;
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(owned.size()); ++t)
      if (owned[t]) x[e.ids[c][t]] = fn.at(l, c, 0, t, 0);
  }
  return x;
}

/// Writes a global vector into every slot (owner and replicas alike), leaving
/// the function broadcast-consistent.
inline void scatter(std::span<const double> x, const GlobalEnumeration& e,
                    FEFunction& fn, Level l) {
  detail::require_p1(fn);
  if (static_cast<std::int64_t>(x.size()) != e.n)
    throw std::invalid_argument("scatter: dimension mismatch");
  for (int c = 0; c < fn.grid->mesh().n_cells(); ++c) {
    const auto& ids = e.ids[c];
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(ids.size()); ++t)
      fn.at(l, c, 0, t, 0) = x[ids[t]];
  }
}

inline void write_matrix_market(const SparseMatrix& a, std::ostream& os) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.n << " " << a.n << " " << a.vals.size() << "\n";
  os.precision(17);
  for (std::int64_t r = 0; r < a.n; ++r)
    for (std::int64_t k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
      os << r + 1 << " " << a.cols[k] + 1 << " " << a.vals[k] << "\n";
}

}  // namespace blocktet
