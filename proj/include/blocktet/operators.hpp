#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "blocktet/fe_function.hpp"
#include "blocktet/forms.hpp"
#include "blocktet/threading.hpp"

namespace blocktet {

enum class ApplyMode : std::uint8_t { Replace, Add };
enum class BC : std::uint8_t { None, DirichletIdentity };
enum class SweepDirection : std::uint8_t { Forward, Backward };

/// Stencil directions: the center plus the seven lattice edge directions and
/// their negatives, in a fixed order (index 0 = center, 1..7 = +, 8..14 = -).
inline constexpr std::array<Idx3, 15> kStencilDirs = {
    Idx3{0, 0, 0},  {1, 0, 0},  {0, 1, 0},  {0, 0, 1},   {1, -1, 0},
    {1, 0, -1},     {0, 1, -1}, {1, -1, 1}, {-1, 0, 0},  {0, -1, 0},
    {0, 0, -1},     {-1, 1, 0}, {-1, 0, 1}, {0, -1, 1},  {-1, 1, -1},
};

inline int stencil_dir_index(Idx3 d) {
  for (int i = 0; i < 15; ++i)
    if (kStencilDirs[i] == d) return i;
  throw std::invalid_argument("not a stencil direction");
}

namespace detail {

inline void require_p1(const FEFunction& fn) {
  if (fn.descriptor.entries.size() != 1 ||
      fn.descriptor.entries[0].first != Subgroup::V ||
      fn.descriptor.entries[0].second != 1)
    throw std::invalid_argument("operator kernels require a P1 function");
}

inline void require_pair(const FEFunction& src, const FEFunction& dst, Level l) {
  require_p1(src);
  require_p1(dst);
  check_compatible(src, dst, l);
  if (&src == &dst)
    throw std::invalid_argument("source and destination must be distinct");
}

/// Per-class element matrices of one macro-cell. Instances of a class are
/// translates of each other under an affine map, so for constant-coefficient
/// forms the matrix of the anchor-at-origin instance serves the whole class.
inline std::array<ElementMatrix, 6> class_matrices(const FormId& form,
                                                   const Grid& grid, int cell,
                                                   Level l) {
  std::array<ElementMatrix, 6> out{};
  const MacroCellMap& map = grid.cell_map(cell);
  for (int s = 0; s < 6; ++s) {
    const Subgroup g = static_cast<Subgroup>(20 + s);
    if (width_formula(g, l) <= 0) continue;
    const auto offs = subgroup_offsets(g);
    std::array<Vec3, 4> corners{};
    for (int i = 0; i < 4; ++i)
      corners[i] = map.map(micro_vertex_coord(l, offs[i]));
    out[s] = local_matrix(form, corners);
  }
  return out;
}

inline bool p1_interior(Idx3 p, std::int64_t n) {
  return p[0] >= 1 && p[1] >= 1 && p[2] >= 1 && idx_sum(p) <= n - 1;
}

/// dst row p restricted to this cell: the sum over all incident micro-cells
/// of the element-matrix row belonging to p. Crossing contributions come from
/// the other cells via sync_additive.
inline double partial_row_apply(const std::array<ElementMatrix, 6>& cls,
                                const FEFunction& src, Level l, int cell,
                                int wv, Idx3 p) {
  double acc = 0;
  for (int s = 0; s < 6; ++s) {
    const Subgroup g = static_cast<Subgroup>(20 + s);
    const int w = width_formula(g, l);
    if (w <= 0) continue;
    const auto offs = subgroup_offsets(g);
    for (int slot = 0; slot < 4; ++slot) {
      const Idx3 anchor = p - offs[slot];
      if (!in_i_tet(w, anchor)) continue;
      for (int j = 0; j < 4; ++j)
        acc += cls[s](slot, j) *
               src.at(l, cell, 0, linearize(wv, anchor + offs[j]), 0);
    }
  }
  return acc;
}

inline void impose_dirichlet(const FEFunction& src, FEFunction& dst, Level l) {
  for (int c = 0; c < dst.grid->mesh().n_cells(); ++c) {
    const auto& dir = dst.grid->masks(l, c, Subgroup::V).dirichlet;
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(dir.size()); ++t)
      if (dir[t]) dst.at(l, c, 0, t, 0) = src.at(l, c, 0, t, 0);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Element-wise application
// ---------------------------------------------------------------------------

/// y <- A x by looping all micro-cells: gather 4 source values, multiply by
/// the element matrix, scatter-add, then one additive sync. Add mode goes
/// through a scratch function because the sync may not see prior content.
inline void apply_elementwise(const FormId& form, const FEFunction& src,
                              FEFunction& dst, Level l,
                              ApplyMode mode = ApplyMode::Replace,
                              BC bc = BC::None, int threads = 1) {
  detail::require_pair(src, dst, l);
  if (mode == ApplyMode::Add) {
    FEFunction scratch = allocate(dst.descriptor, dst.grid, l, l);
    apply_elementwise(form, src, scratch, l, ApplyMode::Replace, bc, threads);
    axpy(dst, 1.0, scratch, l);
    return;
  }
  assign(dst, l, 0.0);
  const int wv = width_formula(Subgroup::V, l);
  parallel_for(dst.grid->mesh().n_cells(), threads, [&](int c) {
    const MacroCellMap& map = dst.grid->cell_map(c);
    const auto cls = form.constant_coefficient()
                         ? detail::class_matrices(form, *dst.grid, c, l)
                         : std::array<ElementMatrix, 6>{};
    for (int s = 0; s < 6; ++s) {
      const Subgroup g = static_cast<Subgroup>(20 + s);
      const int w = width_formula(g, l);
      if (w <= 0) continue;
      const auto offs = subgroup_offsets(g);
      for_each_index(w, [&](Idx3 p) {
        std::array<std::int64_t, 4> idx{};
        std::array<double, 4> xv{};
        for (int i = 0; i < 4; ++i) {
          idx[i] = linearize(wv, p + offs[i]);
          xv[i] = src.at(l, c, 0, idx[i], 0);
        }
        ElementMatrix em;
        if (form.constant_coefficient()) {
          em = cls[s];
        } else {
          std::array<Vec3, 4> corners{};
          for (int i = 0; i < 4; ++i)
            corners[i] = map.map(micro_vertex_coord(l, p + offs[i]));
          em = local_matrix(form, corners);
        }
        for (int i = 0; i < 4; ++i) {
          double acc = 0;
          for (int j = 0; j < 4; ++j) acc += em(i, j) * xv[j];
          dst.at(l, c, 0, idx[i], 0) += acc;
        }
      });
    }
  });
  sync_additive(dst, l);
  if (bc == BC::DirichletIdentity) detail::impose_dirichlet(src, dst, l);
}

// ---------------------------------------------------------------------------
// Stencil table
// ---------------------------------------------------------------------------

/// Constant-coefficient operator data per macro-cell: the merged 15-direction
/// row shared by every interior vertex, the six class element matrices for
/// partial rows near the lattice boundary, and the globally assembled
/// diagonal used by interface relaxation.
struct StencilTable {
  std::shared_ptr<const Grid> grid;
  FormKind form = FormKind::Diffusion;
  Level level = 0;
  std::vector<std::array<double, 15>> rows;
  std::vector<std::array<ElementMatrix, 6>> cls;
  FEFunction diagonal;
};

inline StencilTable compute_stencil(const FormId& form,
                                    std::shared_ptr<const Grid> grid, Level l,
                                    Idx3 probe = {1, 1, 1}) {
  if (!form.constant_coefficient())
    throw std::invalid_argument(
        "compute_stencil: variable-coefficient forms are unsupported");
  if (!grid) throw std::invalid_argument("compute_stencil: grid required");
  const std::int64_t n = std::int64_t{1} << l;
  if (!detail::p1_interior(probe, n))
    throw std::invalid_argument("compute_stencil: probe vertex not interior");

  StencilTable table;
  table.grid = grid;
  table.form = form.kind;
  table.level = l;
  const int cells = grid->mesh().n_cells();
  table.rows.resize(cells);
  table.cls.resize(cells);
  table.diagonal = allocate(p1_space(), grid, l, l);
  const int wv = width_formula(Subgroup::V, l);

  for (int c = 0; c < cells; ++c) {
    table.cls[c] = detail::class_matrices(form, *grid, c, l);
    auto& row = table.rows[c];
    row.fill(0.0);
    int combos = 0;
    for (int s = 0; s < 6; ++s) {
      const Subgroup g = static_cast<Subgroup>(20 + s);
      const int w = width_formula(g, l);
      if (w <= 0) continue;
      const auto offs = subgroup_offsets(g);
      for (int slot = 0; slot < 4; ++slot) {
        const Idx3 anchor = probe - offs[slot];
        if (!in_i_tet(w, anchor)) continue;
        ++combos;
        for (int j = 0; j < 4; ++j)
          row[stencil_dir_index(offs[j] - offs[slot])] += table.cls[c][s](slot, j);
      }
    }
    if (combos != 24)
      throw std::logic_error("interior probe must touch 24 micro-cells");
    // Assembled diagonal: per-vertex partial sums, then one additive sync.
    std::int64_t t = 0;
    for_each_index(wv, [&](Idx3 p) {
      double diag = 0;
      for (int s = 0; s < 6; ++s) {
        const Subgroup g = static_cast<Subgroup>(20 + s);
        const int w = width_formula(g, l);
        if (w <= 0) continue;
        const auto offs = subgroup_offsets(g);
        for (int slot = 0; slot < 4; ++slot)
          if (in_i_tet(w, p - offs[slot])) diag += table.cls[c][s](slot, slot);
      }
      table.diagonal.at(l, c, 0, t, 0) = diag;
      ++t;
    });
  }
  sync_additive(table.diagonal, l);
  return table;
}

/// y <- A x with the merged row on interior vertices and per-class partial
/// rows on lattice-boundary vertices; equals apply_elementwise up to
/// floating-point reassociation.
inline void apply_stencil(const StencilTable& table, const FEFunction& src,
                          FEFunction& dst, Level l, BC bc = BC::None,
                          int threads = 1) {
  detail::require_pair(src, dst, l);
  if (table.level != l || table.grid.get() != src.grid.get())
    throw std::invalid_argument("apply_stencil: table/grid mismatch");
  const std::int64_t n = std::int64_t{1} << l;
  const int wv = width_formula(Subgroup::V, l);
  parallel_for(dst.grid->mesh().n_cells(), threads, [&](int c) {
    const auto& row = table.rows[c];
    for_each_index(wv, [&](Idx3 p) {
      double acc;
      if (detail::p1_interior(p, n)) {
        acc = row[0] * src.at(l, c, 0, linearize(wv, p), 0);
        for (int d = 1; d < 15; ++d)
          acc += row[d] * src.at(l, c, 0, linearize(wv, p + kStencilDirs[d]), 0);
      } else {
        acc = detail::partial_row_apply(table.cls[c], src, l, c, wv, p);
      }
      dst.at(l, c, 0, linearize(wv, p), 0) = acc;
    });
  });
  sync_additive(dst, l);
  if (bc == BC::DirichletIdentity) detail::impose_dirichlet(src, dst, l);
}

// ---------------------------------------------------------------------------
// Diagonal extraction
// ---------------------------------------------------------------------------

inline void extract_diagonal(const FormId& form, FEFunction& diag, Level l,
                             int threads = 1) {
  detail::require_p1(diag);
  assign(diag, l, 0.0);
  const int wv = width_formula(Subgroup::V, l);
  parallel_for(diag.grid->mesh().n_cells(), threads, [&](int c) {
    const MacroCellMap& map = diag.grid->cell_map(c);
    const auto cls = form.constant_coefficient()
                         ? detail::class_matrices(form, *diag.grid, c, l)
                         : std::array<ElementMatrix, 6>{};
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
        for (int i = 0; i < 4; ++i)
          diag.at(l, c, 0, linearize(wv, p + offs[i]), 0) += em(i, i);
      });
    }
  });
  sync_additive(diag, l);
}

inline void extract_diagonal(const StencilTable& table, FEFunction& diag,
                             Level l) {
  detail::require_p1(diag);
  if (table.level != l || table.grid.get() != diag.grid.get())
    throw std::invalid_argument("extract_diagonal: table/grid mismatch");
  copy(table.diagonal, diag, l);
}

// ---------------------------------------------------------------------------
// Hybrid Gauss-Seidel
// ---------------------------------------------------------------------------

/// One relaxation sweep: in-place lexicographic Gauss-Seidel on the interior
/// of every macro-cell (concurrently safe, each cell's interior reads only
/// its own lattice), then a Jacobi step with the assembled diagonal on the
/// remaining vertices after an additive residual sync. Dirichlet rows are
/// pinned to the rhs value.
inline void gauss_seidel_sweep(const StencilTable& table, const FEFunction& rhs,
                               FEFunction& x, Level l,
                               SweepDirection direction = SweepDirection::Forward,
                               int threads = 1) {
  detail::require_pair(rhs, x, l);
  if (table.level != l || table.grid.get() != x.grid.get())
    throw std::invalid_argument("gauss_seidel_sweep: table/grid mismatch");
  const std::int64_t n = std::int64_t{1} << l;
  const int wv = width_formula(Subgroup::V, l);
  const int cells = x.grid->mesh().n_cells();
  for (int c = 0; c < cells; ++c)
    if (table.rows[c][0] == 0.0)
      throw std::invalid_argument("gauss_seidel_sweep: zero center weight");

  parallel_for(cells, threads, [&](int c) {
    const auto& row = table.rows[c];
    const auto update = [&](Idx3 p) {
      const std::int64_t t = linearize(wv, p);
      double acc = rhs.at(l, c, 0, t, 0);
      for (int d = 1; d < 15; ++d)
        acc -= row[d] * x.at(l, c, 0, linearize(wv, p + kStencilDirs[d]), 0);
      x.at(l, c, 0, t, 0) = acc / row[0];
    };
    const int ni = static_cast<int>(n);
    if (direction == SweepDirection::Forward) {
      for (int k = 1; k < ni; ++k)
        for (int j = 1; j < ni - k; ++j)
          for (int i = 1; i <= ni - 1 - k - j; ++i) update({i, j, k});
    } else {
      for (int k = ni - 1; k >= 1; --k)
        for (int j = ni - k - 1; j >= 1; --j)
          for (int i = ni - 1 - k - j; i >= 1; --i) update({i, j, k});
    }
  });

  // Interface and lattice-boundary vertices: damped by nothing, plain Jacobi
  // with the globally assembled diagonal on the synced residual.
  FEFunction scratch = allocate(x.descriptor, x.grid, l, l);
  parallel_for(cells, threads, [&](int c) {
    for_each_index(wv, [&](Idx3 p) {
      if (detail::p1_interior(p, n)) return;
      scratch.at(l, c, 0, linearize(wv, p), 0) =
          detail::partial_row_apply(table.cls[c], x, l, c, wv, p);
    });
  });
  sync_additive(scratch, l);
  parallel_for(cells, threads, [&](int c) {
    const auto& dir = x.grid->masks(l, c, Subgroup::V).dirichlet;
    for_each_index(wv, [&](Idx3 p) {
      if (detail::p1_interior(p, n)) return;
      const std::int64_t t = linearize(wv, p);
      if (dir[t]) {
        x.at(l, c, 0, t, 0) = rhs.at(l, c, 0, t, 0);
      } else {
        x.at(l, c, 0, t, 0) +=
            (rhs.at(l, c, 0, t, 0) - scratch.at(l, c, 0, t, 0)) /
            table.diagonal.at(l, c, 0, t, 0);
      }
    });
  });
}

}  // namespace blocktet
