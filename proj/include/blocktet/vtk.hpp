#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "blocktet/reference_assembly.hpp"

namespace blocktet {

/// Legacy ASCII unstructured-grid export: one point per physically distinct
/// vertex in global enumeration order (mapped by its owning cell), every
/// micro-tetrahedron as a VTK type-10 cell, and the function as point data.
inline void write_vtk(const FEFunction& fn, Level l, const std::string& name,
                      std::ostream& os) {
  detail::require_p1(fn);
  if (name.empty())
    throw std::invalid_argument("write_vtk: function name required");
  const Grid& grid = *fn.grid;
  const GlobalEnumeration e = enumerate_global(grid, l);
  const int wv = width_formula(Subgroup::V, l);
  const int cells = grid.mesh().n_cells();

  std::vector<Vec3> points(e.n);
  std::vector<double> values(e.n);
  for (int c = 0; c < cells; ++c) {
    const auto& owned = grid.masks(l, c, Subgroup::V).owned;
    const MacroCellMap& map = grid.cell_map(c);
    std::int64_t t = 0;
    for_each_index(wv, [&](Idx3 p) {
      if (owned[t]) {
        points[e.ids[c][t]] = map.map(micro_vertex_coord(l, p));
        values[e.ids[c][t]] = fn.at(l, c, 0, t, 0);
      }
      ++t;
    });
  }

  os << "# vtk DataFile Version 3.0\n" << name
     << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os.precision(17);
  os << "POINTS " << e.n << " double\n";
  for (const Vec3& p : points) os << p.x << " " << p.y << " " << p.z << "\n";

  const std::int64_t micro = static_cast<std::int64_t>(cells) << (3 * l);
  os << "CELLS " << micro << " " << micro * 5 << "\n";
  for (int c = 0; c < cells; ++c)
    for (int s = 0; s < 6; ++s) {
      const Subgroup g = static_cast<Subgroup>(20 + s);
      const int w = width_formula(g, l);
      if (w <= 0) continue;
      const auto offs = subgroup_offsets(g);
      for_each_index(w, [&](Idx3 p) {
        os << 4;
        for (int i = 0; i < 4; ++i)
          os << " " << e.ids[c][linearize(wv, p + offs[i])];
        os << "\n";
      });
    }
  os << "CELL_TYPES " << micro << "\n";
  for (std::int64_t i = 0; i < micro; ++i) os << 10 << "\n";

  os << "POINT_DATA " << e.n << "\nSCALARS " << name
     << " double 1\nLOOKUP_TABLE default\n";
  for (double v : values) os << v << "\n";
}

}  // namespace blocktet
