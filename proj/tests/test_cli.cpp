// End-to-end checks of the command line tool. Each case runs the real binary
// through std::system and inspects the captured output and exit code.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string temp_path(const std::string& hint) {
  static int counter = 0;
  return "/tmp/blocktet_cli_test_" + std::to_string(getpid()) + "_" +
         std::to_string(counter++) + "_" + hint;
}

RunResult run_cli(const std::string& args) {
  const std::string capture = temp_path("capture.txt");
  const std::string cmd =
      std::string(BLOCKTET_CLI_PATH) + " " + args + " >" + capture + " 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  REQUIRE(raw != -1);
  REQUIRE(WIFEXITED(raw));
  r.code = WEXITSTATUS(raw);
  r.out = slurp(capture);
  std::remove(capture.c_str());
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

bool contains(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

/// Data rows of the solver CSV with the wall-clock column dropped, so runs
/// can be compared for numeric identity.
std::vector<std::string> csv_rows_without_seconds(const std::string& text) {
  std::vector<std::string> rows;
  for (const std::string& line : lines_of(text)) {
    if (line.empty() || !(line[0] >= '0' && line[0] <= '9')) continue;
    const auto cut = line.rfind(',');
    rows.push_back(line.substr(0, cut));
  }
  return rows;
}

double reported_error(const std::string& text, int level) {
  const std::string key = "# level " + std::to_string(level) + " l2_error ";
  for (const std::string& line : lines_of(text))
    if (line.rfind(key, 0) == 0) return std::stod(line.substr(key.size()));
  FAIL("no l2_error line for level " << level);
  return 0;
}

}  // namespace

TEST_CASE("mesh-info reports primitive counts") {
  const RunResult r = run_cli("mesh-info --mesh ref-tet");
  CHECK(r.code == 0);
  CHECK(contains(r.out, "cells 1, faces 4, edges 6, vertices 4"));
  CHECK(contains(r.out, "boundary faces 4 (4 constrained)"));

  const RunResult cube = run_cli("mesh-info --mesh cube-kuhn");
  CHECK(cube.code == 0);
  CHECK(contains(cube.out, "cells 6, faces 18, edges 19, vertices 8"));
}

TEST_CASE("mesh-info distinguishes parse errors from io errors") {
  const std::string bad = temp_path("bad.mesh");
  {
    std::ofstream out(bad);
    out << "vertices 3\n0 0 0\n1 0 0\ncells 1\n0 1 2 3\n";
  }
  const RunResult parse = run_cli("mesh-info --mesh " + bad);
  CHECK(parse.code == 2);
  CHECK(contains(parse.out, "line "));
  std::remove(bad.c_str());

  const RunResult missing = run_cli("mesh-info --mesh /does/not/exist.mesh");
  CHECK(missing.code == 4);

  const RunResult noargs = run_cli("");
  CHECK(noargs.code == 2);
}

TEST_CASE("verify-taxonomy recounts every class and documents the "
          "xyz-down width") {
  const RunResult r = run_cli("verify-taxonomy --level 2");
  REQUIRE(r.code == 0);

  int rows = 0;
  for (const std::string& line : lines_of(r.out))
    if (line.rfind("vertex ", 0) == 0 || line.rfind("edge ", 0) == 0 ||
        line.rfind("face ", 0) == 0 || line.rfind("cell ", 0) == 0)
      ++rows;
  CHECK(rows == 26);

  CHECK(contains(r.out, "face xyz-down width 3 count 10 expected 10"));
  CHECK(contains(r.out, "cells total 64 expected 64"));
  CHECK(contains(r.out, "vertices total 35 expected 35"));
  CHECK(contains(r.out, "euler characteristic 1 expected 1"));
  CHECK(contains(r.out, "xyz-down has width 2^l-1"));
  CHECK(contains(r.out, "2^l-2"));
  CHECK(contains(r.out, "taxonomy verified"));
  CHECK_FALSE(contains(r.out, "MISMATCH"));
}

TEST_CASE("verify-taxonomy warns below level 2 and bounds the level") {
  const RunResult l1 = run_cli("verify-taxonomy --level 1");
  CHECK(l1.code == 0);
  CHECK(contains(l1.out, "warning: taxonomy incomplete below level 2"));
  // the smallest cell reflection class has no instances at level 1
  CHECK_FALSE(contains(l1.out, "cell I-down"));
  int rows = 0;
  for (const std::string& line : lines_of(l1.out))
    if (line.rfind("cell ", 0) == 0) ++rows;
  CHECK(rows == 5);

  CHECK(run_cli("verify-taxonomy --level 0").code == 2);
  CHECK(run_cli("verify-taxonomy --level 6").code == 2);
}

TEST_CASE("poisson full-multigrid study converges at second order") {
  const RunResult r = run_cli("poisson --min-level 3 --max-level 5");
  REQUIRE(r.code == 0);

  const auto lines = lines_of(r.out);
  REQUIRE_FALSE(lines.empty());
  CHECK(lines[0] == "level,cycle,residual,error,seconds");
  // coarse solve plus five cycles on each of the two finer levels
  CHECK(csv_rows_without_seconds(r.out).size() == 11);

  bool found_order = false;
  for (const std::string& line : lines) {
    if (line.rfind("# order 4->5 ", 0) != 0) continue;
    found_order = true;
    CHECK(std::stod(line.substr(13)) >= 1.9);
  }
  CHECK(found_order);
}

TEST_CASE("poisson flags a pre-asymptotic level pair") {
  // the 2->3 error ratio on the Kuhn cube is still far from 4
  const RunResult r = run_cli("poisson --min-level 2 --max-level 3");
  CHECK(r.code == 1);
  CHECK(contains(r.out, "below 1.9"));
}

TEST_CASE("poisson kernels agree on the discretization error") {
  const std::string base = "poisson --level 3 --solver cg --tol 1e-12 ";
  const RunResult stencil = run_cli(base + "--kernel stencil");
  const RunResult element = run_cli(base + "--kernel elementwise");
  REQUIRE(stencil.code == 0);
  REQUIRE(element.code == 0);
  const double es = reported_error(stencil.out, 3);
  const double ee = reported_error(element.out, 3);
  CHECK(std::abs(es - ee) <= 1e-12 * es);

  const RunResult divkgrad =
      run_cli(base + "--kernel elementwise --form divkgrad");
  REQUIRE(divkgrad.code == 0);
  CHECK(std::abs(reported_error(divkgrad.out, 3) - ee) <= 1e-12 * ee);
}

TEST_CASE("poisson numeric output is independent of layout and threads") {
  const std::string base = "poisson --min-level 2 --max-level 3 ";
  const auto aos = csv_rows_without_seconds(run_cli(base + "--layout aos").out);
  const auto soa = csv_rows_without_seconds(run_cli(base + "--layout soa").out);
  REQUIRE_FALSE(aos.empty());
  CHECK(aos == soa);  // 17-digit round trip, so equal strings = equal doubles

  const auto t1 = csv_rows_without_seconds(run_cli(base + "--threads 1").out);
  const auto t4 = csv_rows_without_seconds(run_cli(base + "--threads 4").out);
  CHECK(t1 == t4);
}

TEST_CASE("poisson solver and smoother variants reach the same solution") {
  const std::string base = "poisson --level 3 --cycles 40 --tol 1e-11 ";
  const RunResult cg = run_cli(base + "--solver cg");
  const RunResult vgs = run_cli("poisson --min-level 2 --max-level 3 "
                                "--cycles 40 --tol 1e-11 --solver vcycle");
  const RunResult vcheb =
      run_cli("poisson --min-level 2 --max-level 3 --cycles 40 --tol 1e-11 "
              "--solver vcycle --smoother chebyshev");
  REQUIRE(cg.code == 0);
  const double reference = reported_error(cg.out, 3);
  CHECK(std::abs(reported_error(vgs.out, 3) - reference) <= 1e-9 * reference);
  CHECK(std::abs(reported_error(vcheb.out, 3) - reference) <= 1e-9 * reference);
}

TEST_CASE("poisson writes the report to a file on request") {
  const std::string csv = temp_path("report.csv");
  const RunResult r =
      run_cli("poisson --min-level 3 --max-level 4 --out " + csv);
  CHECK(r.out.empty());
  const std::string text = slurp(csv);
  CHECK(contains(text, "level,cycle,residual,error,seconds"));
  CHECK(contains(text, "# order 3->4 "));
  std::remove(csv.c_str());

  CHECK(run_cli("poisson --level 3 --out /does/not/exist/report.csv").code == 4);
}

TEST_CASE("poisson rejects unusable configurations") {
  CHECK(run_cli("poisson --form mass --level 3").code == 2);
  CHECK(run_cli("poisson --form divkgrad --kernel stencil --level 3").code == 2);
  CHECK(run_cli("poisson --form divkgrad --kernel elementwise --smoother gs "
                "--level 3 --solver vcycle --min-level 2")
            .code == 2);  // --level excludes --min-level
  CHECK(run_cli("poisson --form divkgrad --kernel elementwise --smoother gs "
                "--min-level 2 --max-level 3")
            .code == 2);  // gauss-seidel needs a stencil table
  CHECK(run_cli("poisson --solver sor --level 3").code == 2);
  CHECK(run_cli("poisson --min-level 4 --max-level 3").code == 2);
}

TEST_CASE("export-vtk writes a legacy unstructured grid") {
  const std::string ref = temp_path("ref.vtk");
  const RunResult r = run_cli("export-vtk --mesh ref-tet --level 2 "
                              "--function u --out " + ref);
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "35 points, 64 cells"));

  const std::string text = slurp(ref);
  CHECK(contains(text, "# vtk DataFile Version 3.0"));
  CHECK(contains(text, "DATASET UNSTRUCTURED_GRID"));
  CHECK(contains(text, "POINTS 35 double"));
  CHECK(contains(text, "CELLS 64 320"));
  CHECK(contains(text, "CELL_TYPES 64"));
  CHECK(contains(text, "POINT_DATA 35"));
  CHECK(contains(text, "SCALARS u double 1"));
  std::remove(ref.c_str());

  const std::string cube = temp_path("cube.vtk");
  const RunResult c = run_cli("export-vtk --mesh cube-kuhn --level 2 "
                              "--function temperature --out " + cube);
  REQUIRE(c.code == 0);
  CHECK(contains(c.out, "125 points, 384 cells"));
  CHECK(contains(slurp(cube), "SCALARS temperature double 1"));
  std::remove(cube.c_str());
}

TEST_CASE("export-vtk error paths") {
  CHECK(run_cli("export-vtk --level 2 --function \"\"").code == 2);
  CHECK(run_cli("export-vtk --level 2").code == 2);  // --function required
  CHECK(run_cli("export-vtk --level 2 --function u "
                "--out /does/not/exist/u.vtk")
            .code == 4);
}

TEST_CASE("help exits cleanly") {
  CHECK(run_cli("--help").code == 0);
  CHECK(run_cli("poisson --help").code == 0);
}
