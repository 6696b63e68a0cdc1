#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "blocktet/reference_assembly.hpp"
#include "blocktet/solvers.hpp"

using namespace blocktet;

namespace {

std::shared_ptr<const Grid> make_grid(const std::string& text, int lo, int hi) {
  return std::make_shared<Grid>(parse_mesh(text), lo, hi);
}

const double kPi = std::acos(-1.0);

double u_model(Vec3 p) {
  return std::sin(kPi * p.x) * std::sin(kPi * p.y) * std::sin(kPi * p.z);
}

double f_model(Vec3 p) { return 3.0 * kPi * kPi * u_model(p); }

/// Weak rhs of the model problem with homogeneous Dirichlet data.
FEFunction poisson_rhs(const std::shared_ptr<const Grid>& grid, Level l) {
  FEFunction f = allocate(p1_space(), grid, l, l);
  interpolate(f, l, f_model);
  FEFunction rhs = allocate(p1_space(), grid, l, l);
  apply_elementwise(FormId::mass(), f, rhs, l);
  detail::zero_dirichlet(rhs, l);
  return rhs;
}

double max_diff(const FEFunction& a, const FEFunction& b, Level l) {
  double m = 0;
  const std::int64_t n = a.slots_of(0, l);
  for (int c = 0; c < a.grid->mesh().n_cells(); ++c)
    for (std::int64_t t = 0; t < n; ++t)
      m = std::max(m, std::abs(a.at(l, c, 0, t, 0) - b.at(l, c, 0, t, 0)));
  return m;
}

double residual_norm(GridHierarchy& h, const FEFunction& rhs,
                     const FEFunction& x, Level l) {
  FEFunction r = allocate(x.descriptor, h.grid, l, l);
  hierarchy_apply(h, x, r, l, BC::DirichletIdentity);
  scale(r, l, -1.0);
  axpy(r, 1.0, rhs, l);
  return norm2(r, l);
}

double energy_norm(GridHierarchy& h, const FEFunction& x, Level l) {
  FEFunction ax = allocate(x.descriptor, h.grid, l, l);
  hierarchy_apply(h, x, ax, l, BC::DirichletIdentity);
  return std::sqrt(std::max(0.0, dot(x, ax, l)));
}

}  // namespace

TEST_CASE("cg recovers manufactured solutions") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 3);
  GridHierarchy h = make_hierarchy(grid, FormId::diffusion());
  const Level l = 2;
  FEFunction u = allocate(p1_space(), grid);
  FEFunction rhs = allocate(p1_space(), grid);
  FEFunction x = allocate(p1_space(), grid);
  random_fill(u, l, 41);
  hierarchy_apply(h, u, rhs, l);
  detail::impose_dirichlet(rhs, x, l);

  const auto apply = [&](const FEFunction& a, FEFunction& b) {
    hierarchy_apply(h, a, b, l);
  };
  const IterationReport rep = cg(apply, rhs, x, l, 1e-12, 500);
  REQUIRE(rep.converged);
  REQUIRE(rep.residual <= 1e-12);
  REQUIRE(rep.iterations == static_cast<int>(rep.rows.size()));
  REQUIRE(max_diff(x, u, l) <= 1e-8);
}

TEST_CASE("cg on the mass matrix converges quickly") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 3);
  GridHierarchy h = make_hierarchy(grid, FormId::mass());
  FEFunction rhs = allocate(p1_space(), grid);
  FEFunction x = allocate(p1_space(), grid);
  random_fill(rhs, 3, 77);
  detail::impose_dirichlet(rhs, x, 3);
  const IterationReport rep = cg(
      [&](const FEFunction& a, FEFunction& b) { hierarchy_apply(h, a, b, 3); },
      rhs, x, 3, 1e-10, 200);
  REQUIRE(rep.converged);
  REQUIRE(rep.iterations < 50);
}

TEST_CASE("cg terminates within the dof count on the model problem") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 3);
  GridHierarchy h = make_hierarchy(grid, FormId::diffusion());
  const FEFunction rhs = poisson_rhs(grid, 3);
  FEFunction x = allocate(p1_space(), grid);
  const IterationReport rep = cg(
      [&](const FEFunction& a, FEFunction& b) { hierarchy_apply(h, a, b, 3); },
      rhs, x, 3, 1e-10, 729);
  REQUIRE(rep.converged);
}

TEST_CASE("cg reports breakdown on an indefinite operator") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 2);
  GridHierarchy h = make_hierarchy(grid, FormId::diffusion());
  FEFunction rhs = allocate(p1_space(), grid);
  FEFunction x = allocate(p1_space(), grid);
  random_fill(rhs, 2, 19);
  const auto negated = [&](const FEFunction& a, FEFunction& b) {
    hierarchy_apply(h, a, b, 2);
    scale(b, 2, -1.0);
  };
  REQUIRE_THROWS_AS(cg(negated, rhs, x, 2, 1e-12, 10), std::runtime_error);
}

TEST_CASE("spectral estimate brackets the largest eigenvalue") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 2);
  const StencilTable table = compute_stencil(FormId::diffusion(), grid, 2);
  FEFunction diag = allocate(p1_space(), grid);
  extract_diagonal(table, diag, 2);
  const auto apply = [&](const FEFunction& a, FEFunction& b) {
    apply_stencil(table, a, b, 2, BC::DirichletIdentity);
  };
  const double est = estimate_lambda_max(apply, diag, 2);
  REQUIRE(est == estimate_lambda_max(apply, diag, 2));  // fixed seed

  // Long dense power iteration as an independent reference.
  const GlobalEnumeration e = enumerate_global(*grid, 2);
  const SparseMatrix a = assemble(FormId::diffusion(), *grid, 2,
                                  BC::DirichletIdentity);
  const std::vector<double> d = gather(diag, e, 2);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uni(-1, 1);
  std::vector<double> v(e.n);
  for (std::int64_t i = 0; i < e.n; ++i) v[i] = e.dirichlet[i] ? 0.0 : uni(rng);
  double lambda = 0;
  for (int it = 0; it < 3000; ++it) {
    const std::vector<double> av = spmv(a, v);
    double num = 0, den = 0, nn = 0;
    for (std::int64_t i = 0; i < e.n; ++i) {
      num += v[i] * av[i];
      den += v[i] * d[i] * v[i];
    }
    lambda = num / den;
    for (std::int64_t i = 0; i < e.n; ++i) {
      v[i] = av[i] / d[i];
      nn += v[i] * v[i];
    }
    const double inv = 1.0 / std::sqrt(nn);
    for (double& vi : v) vi *= inv;
  }
  REQUIRE(est >= lambda * (1 - 1e-9));
  REQUIRE(est <= lambda * 1.1 * (1 + 1e-9));
}

TEST_CASE("spectral estimate of the identity is the safety margin") {
  const auto grid = make_grid(ref_tet_text(), 2, 2);
  FEFunction diag = allocate(p1_space(), grid);
  assign(diag, 2, 1.0);
  const double est = estimate_lambda_max(
      [](const FEFunction& a, FEFunction& b) { copy(a, b, 2); }, diag, 2);
  REQUIRE(est == Catch::Approx(1.1).margin(1e-6));

  assign(diag, 2, 0.0);
  REQUIRE_THROWS_AS(
      estimate_lambda_max(
          [](const FEFunction& a, FEFunction& b) { copy(a, b, 2); }, diag, 2),
      std::invalid_argument);
}

TEST_CASE("smoother dispatch and validation") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 3);
  GridHierarchy h = make_hierarchy(grid, FormId::diffusion());
  const Level l = 3;
  FEFunction u = allocate(p1_space(), grid);
  FEFunction rhs = allocate(p1_space(), grid);
  random_fill(u, l, 3);
  hierarchy_apply(h, u, rhs, l);

  SECTION("gauss-seidel equals the raw sweep") {
    FEFunction x1 = allocate(p1_space(), grid);
    FEFunction x2 = allocate(p1_space(), grid);
    smooth(h, SmootherConfig::gauss_seidel(), rhs, x1, l, 1);
    gauss_seidel_sweep(*h.tables[h.index(l)], rhs, x2, l);
    REQUIRE(max_diff(x1, x2, l) == 0.0);
  }

  SECTION("jacobi keeps the exact solution fixed") {
    FEFunction x = allocate(p1_space(), grid);
    copy(u, x, l);
    smooth(h, SmootherConfig::jacobi(), rhs, x, l, 1);
    REQUIRE(max_diff(x, u, l) <= 1e-12);
  }

  SECTION("gauss-seidel decreases the energy norm on the error equation") {
    FEFunction x = allocate(p1_space(), grid);
    FEFunction zero = allocate(p1_space(), grid);
    random_fill(x, l, 8);
    detail::zero_dirichlet(x, l);
    double prev = energy_norm(h, x, l);
    for (int s = 0; s < 5; ++s) {
      smooth(h, SmootherConfig::gauss_seidel(), zero, x, l, 1);
      const double cur = energy_norm(h, x, l);
      REQUIRE(cur < prev);
      prev = cur;
    }
  }

  SECTION("chebyshev damps the oscillatory lattice mode") {
    FEFunction x = allocate(p1_space(), grid);
    FEFunction zero = allocate(p1_space(), grid);
    interpolate(x, l, [](Vec3 p) {
      return std::cos(8 * kPi * p.x) * std::cos(8 * kPi * p.y) *
             std::cos(8 * kPi * p.z);
    });
    detail::zero_dirichlet(x, l);
    const double before = energy_norm(h, x, l);
    smooth(h, SmootherConfig::chebyshev(2), zero, x, l, 1);
    REQUIRE(energy_norm(h, x, l) < 0.25 * before);
  }

  SECTION("bad configurations are rejected") {
    FEFunction x = allocate(p1_space(), grid);
    REQUIRE_THROWS_AS(smooth(h, SmootherConfig::jacobi(0.0), rhs, x, l, 1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(smooth(h, SmootherConfig::jacobi(1.5), rhs, x, l, 1),
                      std::invalid_argument);
    SmootherConfig bad = SmootherConfig::chebyshev();
    bad.lo = 0.5;
    bad.hi = 0.5;
    REQUIRE_THROWS_AS(smooth(h, bad, rhs, x, l, 1), std::invalid_argument);
    GridHierarchy hv = make_hierarchy(
        grid, FormId::div_k_grad([](Vec3) { return 1.0; }),
        KernelKind::Elementwise);
    REQUIRE_THROWS_AS(
        smooth(hv, SmootherConfig::gauss_seidel(), rhs, x, l, 1),
        std::invalid_argument);
  }
}

TEST_CASE("stencil kernel demands constant coefficients") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 2);
  REQUIRE_THROWS_AS(
      make_hierarchy(grid, FormId::div_k_grad([](Vec3) { return 1.0; }),
                     KernelKind::Stencil),
      std::invalid_argument);
}

TEST_CASE("prolongation reproduces constants and linears") {
  for (const std::string text : {ref_tet_text(), cube_kuhn_text()}) {
    const auto grid = make_grid(text, 2, 3);
    FEFunction coarse = allocate(p1_space(), grid);
    FEFunction fine = allocate(p1_space(), grid);
    FEFunction direct = allocate(p1_space(), grid);

    assign(coarse, 2, 3.25);
    prolongate_p1(coarse, fine, 3);
    assign(direct, 3, 3.25);
    REQUIRE(max_diff(fine, direct, 3) == 0.0);

    const auto lin = [](Vec3 p) { return 1 + 2 * p.x + 3 * p.y + 4 * p.z; };
    interpolate(coarse, 2, lin);
    interpolate(direct, 3, lin);
    prolongate_p1(coarse, fine, 3);
    REQUIRE(max_diff(fine, direct, 3) <= 1e-13);
  }
}

TEST_CASE("odd fine vertices average their coarse edge endpoints") {
  const auto grid = make_grid(ref_tet_text(), 2, 3);
  FEFunction coarse = allocate(p1_space(), grid);
  FEFunction fine = allocate(p1_space(), grid);
  random_fill(coarse, 2, 99);
  prolongate_p1(coarse, fine, 3);
  const int wc = width_formula(Subgroup::V, 2);
  const int wf = width_formula(Subgroup::V, 3);
  const double expected =
      0.5 * (coarse.at(2, 0, 0, linearize(wc, {0, 1, 0}), 0) +
             coarse.at(2, 0, 0, linearize(wc, {1, 0, 1}), 0));
  REQUIRE(fine.at(3, 0, 0, linearize(wf, {1, 1, 1}), 0) == expected);
}

TEST_CASE("restriction is the transpose of prolongation") {
  for (const std::string text : {ref_tet_text(), cube_kuhn_text()}) {
    const auto grid = make_grid(text, 2, 5);
    for (Level fine_l = 3; fine_l <= 5; ++fine_l) {
      FEFunction xc = allocate(p1_space(), grid);
      FEFunction yf = allocate(p1_space(), grid);
      FEFunction pxc = allocate(p1_space(), grid);
      FEFunction ryf = allocate(p1_space(), grid);
      random_fill(xc, fine_l - 1, 7 * fine_l);
      random_fill(yf, fine_l, 7 * fine_l + 1);
      prolongate_p1(xc, pxc, fine_l);
      restrict_p1(yf, ryf, fine_l);
      const double lhs = dot(pxc, yf, fine_l);
      const double rhs = dot(xc, ryf, fine_l - 1);
      REQUIRE(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("restriction of a prolongated delta concentrates its mass") {
  const auto grid = make_grid(ref_tet_text(), 2, 3);
  FEFunction coarse = allocate(p1_space(), grid);
  FEFunction fine = allocate(p1_space(), grid);
  FEFunction back = allocate(p1_space(), grid);
  assign(coarse, 2, 0.0);
  const std::int64_t center = linearize(width_formula(Subgroup::V, 2), {1, 1, 1});
  coarse.at(2, 0, 0, center, 0) = 1.0;
  prolongate_p1(coarse, fine, 3);
  restrict_p1(fine, back, 3);
  REQUIRE(back.at(2, 0, 0, center, 0) == Catch::Approx(4.5).margin(1e-14));

  assign(fine, 3, 0.0);
  restrict_p1(fine, back, 3);
  REQUIRE(norm2(back, 2) == 0.0);
}

TEST_CASE("transfer level mismatches are rejected") {
  const auto grid = make_grid(ref_tet_text(), 2, 3);
  FEFunction coarse = allocate(p1_space(), grid);
  FEFunction fine = allocate(p1_space(), grid);
  REQUIRE_THROWS_AS(prolongate_p1(coarse, fine, 2), std::out_of_range);
  REQUIRE_THROWS_AS(restrict_p1(fine, coarse, 4), std::out_of_range);
}

TEST_CASE("v-cycle keeps exact solutions and contracts the model problem") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 4);
  GridHierarchy h = make_hierarchy(grid, FormId::diffusion());
  const SmootherConfig sm = SmootherConfig::gauss_seidel();
  const MultigridConfig mg;

  SECTION("fixed point") {
    const Level l = 3;
    FEFunction u = allocate(p1_space(), grid);
    FEFunction rhs = allocate(p1_space(), grid);
    random_fill(u, l, 13);
    hierarchy_apply(h, u, rhs, l);
    FEFunction x = allocate(p1_space(), grid);
    copy(u, x, l);
    v_cycle(h, l, rhs, x, sm, mg);
    const double scale_ref = std::max(1.0, norm2(rhs, l));
    REQUIRE(residual_norm(h, rhs, x, l) <= 1e-11 * scale_ref);
  }

  SECTION("asymptotic reduction at most one half, level independent") {
    double factors[2] = {0, 0};
    for (Level l = 3; l <= 4; ++l) {
      const FEFunction rhs = poisson_rhs(grid, l);
      FEFunction x = allocate(p1_space(), grid);
      double prev = residual_norm(h, rhs, x, l);
      double worst = 0;
      for (int cyc = 1; cyc <= 10; ++cyc) {
        v_cycle(h, l, rhs, x, sm, mg);
        const double cur = residual_norm(h, rhs, x, l);
        if (cyc > 5) worst = std::max(worst, cur / prev);
        prev = cur;
      }
      factors[l - 3] = worst;
      REQUIRE(worst <= 0.5);
    }
    REQUIRE(std::abs(factors[0] - factors[1]) < 0.1);
  }

  SECTION("level guards") {
    FEFunction x = allocate(p1_space(), grid);
    FEFunction rhs = allocate(p1_space(), grid);
    MultigridConfig low = mg;
    low.coarse_level = 1;
    REQUIRE_THROWS_AS(v_cycle(h, 3, rhs, x, sm, low), std::invalid_argument);
    REQUIRE_THROWS_AS(v_cycle(h, 1, rhs, x, sm, mg), std::invalid_argument);
  }
}

TEST_CASE("full multigrid runs the documented cycle budget") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 4);
  GridHierarchy h = make_hierarchy(grid, FormId::diffusion());
  const SmootherConfig sm = SmootherConfig::gauss_seidel();
  const MultigridConfig mg;

  std::vector<FEFunction> rhs;
  for (Level l = 2; l <= 4; ++l) rhs.push_back(poisson_rhs(grid, l));
  FEFunction x = allocate(p1_space(), grid);
  const auto err = [](const FEFunction& v, Level l) {
    return l2_error(v, l, u_model);
  };
  const IterationReport rep = fmg(h, 4, rhs, x, sm, mg, err);
  REQUIRE(rep.iterations == 5 * (4 - 2));
  REQUIRE(rep.rows.size() == 1 + 5 * 2);
  REQUIRE(rep.converged);

  // Deterministic numeric payload across repeated runs.
  FEFunction x2 = allocate(p1_space(), grid);
  const IterationReport rep2 = fmg(h, 4, rhs, x2, sm, mg, err);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    REQUIRE(rep.rows[i].residual == rep2.rows[i].residual);
    REQUIRE(rep.rows[i].error == rep2.rows[i].error);
  }

  // Observed L2 orders: errors on the last row of each level.
  double err_by_level[3] = {0, 0, 0};
  for (const IterationRow& row : rep.rows) err_by_level[row.level - 2] = row.error;
  const double r23 = err_by_level[0] / err_by_level[1];
  const double r34 = err_by_level[1] / err_by_level[2];
  // The coarsest pair is pre-asymptotic; the quadratic window tightens on
  // the finer pairs.
  REQUIRE(r23 >= 2.8);
  REQUIRE(r23 <= 4.7);
  REQUIRE(r34 >= 3.4);
  REQUIRE(r34 <= 4.6);

  // FMG error tracks the tightly solved discrete error.
  GridHierarchy h2 = make_hierarchy(grid, FormId::diffusion());
  FEFunction tight = allocate(p1_space(), grid);
  cg(
      [&](const FEFunction& a, FEFunction& b) { hierarchy_apply(h2, a, b, 4); },
      rhs[2], tight, 4, 1e-12, 20000);
  const double e_fmg = l2_error(x, 4, u_model);
  const double e_cg = l2_error(tight, 4, u_model);
  REQUIRE(e_fmg <= 1.05 * e_cg);
  REQUIRE(e_fmg >= 0.95 * e_cg);
}

TEST_CASE("one-level full multigrid is the coarse solve") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 2);
  GridHierarchy h = make_hierarchy(grid, FormId::diffusion());
  std::vector<FEFunction> rhs;
  rhs.push_back(poisson_rhs(grid, 2));
  FEFunction x = allocate(p1_space(), grid);
  fmg(h, 2, rhs, x, SmootherConfig::gauss_seidel(), MultigridConfig{});

  FEFunction direct = allocate(p1_space(), grid);
  detail::impose_dirichlet(rhs[0], direct, 2);
  cg(
      [&](const FEFunction& a, FEFunction& b) { hierarchy_apply(h, a, b, 2); },
      rhs[0], direct, 2, 1e-12, 4000);
  REQUIRE(max_diff(x, direct, 2) <= 1e-14);
}

TEST_CASE("l2 error measures interpolation quality") {
  const auto grid = make_grid(cube_kuhn_text(), 2, 3);
  FEFunction fn = allocate(p1_space(), grid);

  const auto lin = [](Vec3 p) { return 0.5 - p.x + 2 * p.y + 0.25 * p.z; };
  interpolate(fn, 2, lin);
  REQUIRE(l2_error(fn, 2, lin) <= 1e-13);

  assign(fn, 2, 0.0);
  REQUIRE(l2_error(fn, 2, [](Vec3) { return 0.0; }) == 0.0);

  // Constant one against zero integrates the unit cube volume.
  assign(fn, 2, 1.0);
  REQUIRE(l2_error(fn, 2, [](Vec3) { return 0.0; }) ==
          Catch::Approx(1.0).margin(1e-12));

  interpolate(fn, 2, u_model);
  const double e2 = l2_error(fn, 2, u_model);
  interpolate(fn, 3, u_model);
  const double e3 = l2_error(fn, 3, u_model);
  REQUIRE(e2 / e3 == Catch::Approx(4.0).margin(1.0));

  const auto ref = make_grid(ref_tet_text(), 2, 2);
  FEFunction zero = allocate(p1_space(), ref);
  REQUIRE(l2_error(zero, 2, [](Vec3) { return 1.0; }) ==
          Catch::Approx(std::sqrt(1.0 / 6)).margin(1e-12));
}

TEST_CASE("iteration reports serialize to csv") {
  IterationReport rep;
  rep.rows.push_back({2, 0, 0.5, 0.25, 0.001});
  rep.rows.push_back({3, 1, 0.125, 0.0625, 0.002});
  std::ostringstream os;
  write_csv(rep, os);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  REQUIRE(header == "level,cycle,residual,error,seconds");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    REQUIRE(std::count(line.begin(), line.end(), ',') == 4);
  }
  REQUIRE(lines == 2);
  REQUIRE(os.str().find("0.125") != std::string::npos);
}
