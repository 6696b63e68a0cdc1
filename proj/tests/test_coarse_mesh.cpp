#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>

#include "blocktet/coarse_mesh.hpp"

using namespace blocktet;

namespace {

int count_links(const PrimitiveGraph& g, MacroKind a, MacroKind b) {
  int n = 0;
  for (const auto& [p, nbrs] : g.adjacency) {
    if (p.kind != a) continue;
    for (const PrimitiveId& q : nbrs)
      if (q.kind == b) ++n;
  }
  return n;  // directed count; halve for undirected same-kind links
}

}  // namespace

TEST_CASE("reference tetrahedron parses to the expected primitive counts") {
  const CoarseMesh mesh = parse_mesh(ref_tet_text());
  REQUIRE(mesh.n_vertices() == 4);
  REQUIRE(mesh.n_cells() == 1);
  REQUIRE(mesh.edges.size() == 6);
  REQUIRE(mesh.faces.size() == 4);
  REQUIRE(mesh.cells[0] == std::array<int, 4>{0, 1, 2, 3});
  REQUIRE(mesh.vertex_coords[1].x == 1.0);
  REQUIRE(mesh.vertex_coords[3].z == 1.0);
  for (char f : mesh.boundary_flags) REQUIRE(f == 1);
  REQUIRE(mesh.warnings.empty());

  // Faces opposite each local vertex, found through the sorted global table.
  const auto cf = mesh.cell_face_indices(0);
  REQUIRE(mesh.faces[cf[0]] == std::array<int, 3>{1, 2, 3});
  REQUIRE(mesh.faces[cf[3]] == std::array<int, 3>{0, 1, 2});
}

TEST_CASE("Kuhn cube splits into six conforming tetrahedra") {
  const CoarseMesh mesh = parse_mesh(cube_kuhn_text());
  REQUIRE(mesh.n_vertices() == 8);
  REQUIRE(mesh.n_cells() == 6);
  REQUIRE(mesh.edges.size() == 19);
  REQUIRE(mesh.faces.size() == 18);
  REQUIRE(mesh.warnings.empty());  // generator emits positive orientation

  int boundary = 0;
  for (char f : mesh.boundary_flags) boundary += f;
  REQUIRE(boundary == 12);

  // Every cell is positively oriented and contains the main diagonal (0, 7).
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& cv = mesh.cells[c];
    REQUIRE(std::count(cv.begin(), cv.end(), 0) == 1);
    REQUIRE(std::count(cv.begin(), cv.end(), 7) == 1);
    REQUIRE(macro_cell_map(mesh, c).det > 0);
  }
  REQUIRE_NOTHROW(mesh.edge_index({0, 7}));

  // Face incidences total 4 per cell.
  int incidences = 0;
  for (const auto& fc : mesh.face_cells) incidences += fc[1] < 0 ? 1 : 2;
  REQUIRE(incidences == 4 * mesh.n_cells());
}

TEST_CASE("any vertex pair shared by two cells is a stored edge of both") {
  const CoarseMesh mesh = parse_mesh(cube_kuhn_text());
  for (int a = 0; a < mesh.n_cells(); ++a)
    for (int b = a + 1; b < mesh.n_cells(); ++b) {
      std::vector<int> shared;
      for (int v : mesh.cells[a])
        if (std::count(mesh.cells[b].begin(), mesh.cells[b].end(), v))
          shared.push_back(v);
      for (std::size_t i = 0; i < shared.size(); ++i)
        for (std::size_t j = i + 1; j < shared.size(); ++j)
          REQUIRE_NOTHROW(mesh.edge_index({shared[i], shared[j]}));
    }
}

TEST_CASE("serialization round-trips exactly") {
  for (const std::string text :
       {ref_tet_text(), cube_kuhn_text(),
        ref_tet_text() + "boundary 1\n1 2 3 0\n"}) {
    const CoarseMesh mesh = parse_mesh(text);
    const std::string canonical = serialize_mesh(mesh);
    REQUIRE(parse_mesh(canonical) == mesh);
    REQUIRE(serialize_mesh(parse_mesh(canonical)) == canonical);
  }
}

TEST_CASE("boundary flags default to constrained and accept overrides") {
  const CoarseMesh mesh = parse_mesh(ref_tet_text() + "boundary 1\n1 2 3 0\n");
  REQUIRE(mesh.boundary_flags[mesh.face_index({1, 2, 3})] == 0);
  REQUIRE(mesh.boundary_flags[mesh.face_index({0, 1, 2})] == 1);

  REQUIRE_THROWS_WITH(parse_mesh(cube_kuhn_text() + "boundary 1\n0 3 7 1\n"),
                      Catch::Matchers::ContainsSubstring("interior face"));
  REQUIRE_THROWS_WITH(parse_mesh(cube_kuhn_text() + "boundary 1\n1 2 4 0\n"),
                      Catch::Matchers::ContainsSubstring("non-existent face"));
}

TEST_CASE("parser reports malformed input with line numbers") {
  REQUIRE_THROWS_AS(parse_mesh("cells 1\n0 1 2 3\n"), ParseError);
  REQUIRE_THROWS_WITH(parse_mesh("vertices 2\n0 0 0\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
  REQUIRE_THROWS_WITH(parse_mesh("vertices 1\n0 0 zero\n"),
                      Catch::Matchers::ContainsSubstring("coordinates"));
  REQUIRE_THROWS_WITH(
      parse_mesh("vertices 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ncells 1\n0 1 2 9\n"),
      Catch::Matchers::ContainsSubstring("out of range"));
  REQUIRE_THROWS_WITH(parse_mesh(ref_tet_text() + "extra stuff\n"),
                      Catch::Matchers::ContainsSubstring("trailing"));

  // Comments and blank lines are insignificant.
  REQUIRE(parse_mesh("# header\n\nvertices 4 # four\n0 0 0\n1 0 0\n0 1 0\n"
                     "0 0 1\n\ncells 1\n0 1 2 3\n") ==
          parse_mesh(ref_tet_text()));
}

TEST_CASE("conformity violations are rejected") {
  SECTION("face shared by three cells") {
    const std::string text =
        "vertices 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 0 -1\n1 1 1\n"
        "cells 3\n0 1 2 3\n0 1 2 4\n0 1 2 5\n";
    REQUIRE_THROWS_WITH(parse_mesh(text),
                        Catch::Matchers::ContainsSubstring("non-conforming"));
  }
  SECTION("degenerate cell") {
    const std::string text =
        "vertices 4\n0 0 0\n1 0 0\n2 0 0\n0 1 0\ncells 1\n0 1 2 3\n";
    REQUIRE_THROWS_WITH(parse_mesh(text),
                        Catch::Matchers::ContainsSubstring("degenerate"));
  }
  SECTION("vertex hanging on an edge") {
    const std::string text =
        "vertices 5\n0 0 0\n2 0 0\n0 2 0\n0 0 2\n1 0 0\n"
        "cells 2\n0 1 2 3\n4 1 2 3\n";
    REQUIRE_THROWS_WITH(parse_mesh(text),
                        Catch::Matchers::ContainsSubstring("inside an edge"));
  }
  SECTION("vertex hanging on a face") {
    const std::string text =
        "vertices 5\n0 0 0\n3 0 0\n0 3 0\n0 0 3\n1 1 0\n"
        "cells 2\n0 1 2 3\n0 1 3 4\n";
    REQUIRE_THROWS_WITH(parse_mesh(text),
                        Catch::Matchers::ContainsSubstring("inside a face"));
  }
}

TEST_CASE("negative cells are reoriented with a warning") {
  const std::string text =
      "vertices 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ncells 1\n0 1 3 2\n";
  const CoarseMesh mesh = parse_mesh(text);
  REQUIRE(mesh.cells[0] == std::array<int, 4>{0, 1, 2, 3});
  REQUIRE(mesh.warnings.size() == 1);
  REQUIRE(mesh.warnings[0].find("reoriented") != std::string::npos);
}

TEST_CASE("macro cell map carries edge columns, offset, and determinant") {
  const std::string text =
      "vertices 4\n0 0 0\n1 0 0\n1 1 0\n1 1 1\ncells 1\n0 1 2 3\n";
  const MacroCellMap m = macro_cell_map(parse_mesh(text), 0);
  REQUIRE(m.det == Catch::Approx(1.0));
  REQUIRE(m.a(0, 0) == 1.0);
  REQUIRE(m.a(1, 1) == 1.0);
  REQUIRE(m.a(2, 2) == 1.0);
  REQUIRE(m.a(1, 0) == 0.0);

  const Vec3 v1 = m.map({1, 0, 0});
  REQUIRE(v1.x == 1.0);
  REQUIRE(v1.y == 0.0);
  const Vec3 v3 = m.map({0, 0, 1});
  REQUIRE(v3.x == 1.0);
  REQUIRE(v3.y == 1.0);
  REQUIRE(v3.z == 1.0);
  const Vec3 mid = m.map({0.5, 0.5, 0});
  REQUIRE(mid.x == 1.0);
  REQUIRE(mid.y == Catch::Approx(0.5));
}

TEST_CASE("primitive graph links cells, faces, edges, and vertices") {
  SECTION("single tetrahedron") {
    const CoarseMesh mesh = parse_mesh(ref_tet_text());
    const PrimitiveGraph g = build_primitive_graph(mesh);
    REQUIRE(g.links({MacroKind::Cell, 0}).size() == 14);
    REQUIRE(count_links(g, MacroKind::Cell, MacroKind::Cell) == 0);

    std::size_t directed = 0;
    for (const auto& [p, nbrs] : g.adjacency) directed += nbrs.size();
    REQUIRE(directed == 100);  // 50 undirected links

    for (const auto& [p, nbrs] : g.adjacency)
      for (const PrimitiveId& q : nbrs) {
        const auto& back = g.links(q);
        REQUIRE(std::count(back.begin(), back.end(), p) == 1);
      }
  }
  SECTION("Kuhn cube") {
    const PrimitiveGraph g = build_primitive_graph(parse_mesh(cube_kuhn_text()));
    REQUIRE(count_links(g, MacroKind::Cell, MacroKind::Cell) == 12);  // 6 pairs
    for (int c = 0; c < 6; ++c) {
      const auto& nbrs = g.links({MacroKind::Cell, c});
      REQUIRE(std::count_if(nbrs.begin(), nbrs.end(), [](PrimitiveId q) {
                return q.kind == MacroKind::Face;
              }) == 4);
      REQUIRE(std::count_if(nbrs.begin(), nbrs.end(), [](PrimitiveId q) {
                return q.kind == MacroKind::Edge;
              }) == 6);
    }
  }
}

TEST_CASE("inner edge selection prefers the shortest octahedron diagonal") {
  const CoarseMesh ref = parse_mesh(ref_tet_text());
  REQUIRE(select_inner_edge_permutation(ref, 0, false) ==
          std::array<int, 4>{0, 1, 2, 3});
  // All three diagonals tie on the reference tetrahedron.
  REQUIRE(select_inner_edge_permutation(ref, 0, true) ==
          std::array<int, 4>{0, 1, 2, 3});

  // Needle stretched along the v0-v1 edge: the (v0 v1, v2 v3) diagonal is the
  // short one, reached by the relabeling (0, 3, 1, 2).
  const std::string needle =
      "vertices 4\n-5 0 0\n5 0 0\n0 1 0\n0 0 1\ncells 1\n0 1 2 3\n";
  const CoarseMesh mesh = parse_mesh(needle);
  REQUIRE(mesh.warnings.empty());
  REQUIRE(select_inner_edge_permutation(mesh, 0, true) ==
          std::array<int, 4>{0, 3, 1, 2});
  REQUIRE(select_inner_edge_permutation(mesh, 0, false) ==
          std::array<int, 4>{0, 1, 2, 3});
}

TEST_CASE("builtin mesh names resolve, unknown names do not") {
  REQUIRE(builtin_mesh_text("ref-tet").has_value());
  REQUIRE(builtin_mesh_text("cube-kuhn").has_value());
  REQUIRE_FALSE(builtin_mesh_text("ref-tet.txt").has_value());
}
