#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "blocktet/operators.hpp"

namespace blocktet {

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct IterationRow {
  int level = 0;
  int cycle = 0;
  double residual = 0;  // relative to the rhs norm of that level
  double error = 0;     // caller-supplied norm, 0 when none was requested
  double seconds = 0;   // wall clock since the solve started; never asserted
};

struct IterationReport {
  std::vector<IterationRow> rows;
  int iterations = 0;
  double residual = 0;
  bool converged = false;
};

inline void write_csv(const IterationReport& report, std::ostream& os) {
  os << "level,cycle,residual,error,seconds\n";
  const auto prec = os.precision(17);
  for (const IterationRow& r : report.rows)
    os << r.level << ',' << r.cycle << ',' << r.residual << ',' << r.error
       << ',' << r.seconds << '\n';
  os.precision(prec);
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

/// fn <- fn o diag (multiply) or fn o 1/diag (divide), slot by slot.
inline void hadamard(FEFunction& fn, const FEFunction& diag, Level l,
                     bool divide) {
  require_p1(fn);
  check_compatible(fn, diag, l);
  const std::int64_t n = fn.slots_of(0, l);
  for (int c = 0; c < fn.grid->mesh().n_cells(); ++c)
    for (std::int64_t t = 0; t < n; ++t) {
      const double d = diag.at(l, c, 0, t, 0);
      fn.at(l, c, 0, t, 0) = divide ? fn.at(l, c, 0, t, 0) / d
                                    : fn.at(l, c, 0, t, 0) * d;
    }
}

inline void zero_dirichlet(FEFunction& fn, Level l) {
  for (int c = 0; c < fn.grid->mesh().n_cells(); ++c) {
    const auto& dir = fn.grid->masks(l, c, Subgroup::V).dirichlet;
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(dir.size()); ++t)
      if (dir[t]) fn.at(l, c, 0, t, 0) = 0.0;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Conjugate gradients
// ---------------------------------------------------------------------------

/// Plain CG on whatever the callable applies. The operator must be symmetric
/// positive definite on the space it acts on; with Dirichlet identity rows
/// that holds provided x enters with the boundary values already imposed
/// (residual zero there), which every caller in this library guarantees.
inline IterationReport cg(
    const std::function<void(const FEFunction&, FEFunction&)>& apply_op,
    const FEFunction& rhs, FEFunction& x, Level l, double tol, int maxit) {
  detail::require_pair(rhs, x, l);
  if (!apply_op) throw std::invalid_argument("cg: operator required");
  const auto t0 = std::chrono::steady_clock::now();

  FEFunction r = allocate(x.descriptor, x.grid, l, l);
  FEFunction p = allocate(x.descriptor, x.grid, l, l);
  FEFunction ap = allocate(x.descriptor, x.grid, l, l);
  apply_op(x, r);
  scale(r, l, -1.0);
  axpy(r, 1.0, rhs, l);
  copy(r, p, l);

  const double nb = norm2(rhs, l);
  const double denom = nb > 0 ? nb : 1.0;
  double rs = dot(r, r, l);

  IterationReport report;
  report.residual = std::sqrt(rs) / denom;
  if (report.residual <= tol) {
    report.converged = true;
    return report;
  }
  for (int it = 1; it <= maxit; ++it) {
    apply_op(p, ap);
    const double pap = dot(p, ap, l);
    if (!(pap > 0))
      throw std::runtime_error("cg breakdown: operator is not positive definite");
    const double alpha = rs / pap;
    axpy(x, alpha, p, l);
    axpy(r, -alpha, ap, l);
    const double rs_new = dot(r, r, l);
    report.iterations = it;
    report.residual = std::sqrt(rs_new) / denom;
    report.rows.push_back(
        {l, it, report.residual, 0.0, detail::seconds_since(t0)});
    if (report.residual <= tol) {
      report.converged = true;
      break;
    }
    scale(p, l, rs_new / rs);
    axpy(p, 1.0, r, l);
    rs = rs_new;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Spectral estimate
// ---------------------------------------------------------------------------

/// 1.1 times the Rayleigh quotient after a fixed number of power iterations
/// on D^-1 A, restricted to the free space by zeroing Dirichlet slots of the
/// start vector (the identity rows then keep every iterate inside it).
inline double estimate_lambda_max(
    const std::function<void(const FEFunction&, FEFunction&)>& apply_op,
    const FEFunction& diag, Level l, int iterations = 25) {
  detail::require_p1(diag);
  const std::int64_t n = diag.slots_of(0, l);
  for (int c = 0; c < diag.grid->mesh().n_cells(); ++c)
    for (std::int64_t t = 0; t < n; ++t)
      if (diag.at(l, c, 0, t, 0) == 0.0)
        throw std::invalid_argument("estimate_lambda_max: zero diagonal entry");

  FEFunction v = allocate(diag.descriptor, diag.grid, l, l);
  FEFunction w = allocate(diag.descriptor, diag.grid, l, l);
  FEFunction z = allocate(diag.descriptor, diag.grid, l, l);
  random_fill(v, l, 0x51cbu);
  detail::zero_dirichlet(v, l);
  const double nv = norm2(v, l);
  if (nv == 0) throw std::runtime_error("estimate_lambda_max: empty free space");
  scale(v, l, 1.0 / nv);

  double rho = 0;
  for (int k = 0; k < iterations; ++k) {
    apply_op(v, w);
    copy(v, z, l);
    detail::hadamard(z, diag, l, /*divide=*/false);
    rho = dot(v, w, l) / dot(v, z, l);
    copy(w, v, l);
    detail::hadamard(v, diag, l, /*divide=*/true);
    const double nn = norm2(v, l);
    if (nn == 0) break;
    scale(v, l, 1.0 / nn);
  }
  return 1.1 * rho;
}

// ---------------------------------------------------------------------------
// Grid transfers
// ---------------------------------------------------------------------------

namespace detail {

/// A fine vertex with any odd index bisects exactly one coarse lattice edge;
/// the parity pattern determines its two endpoints (still in fine indices,
/// all components even). All-even vertices coincide with a coarse vertex.
inline int coarse_endpoints(Idx3 p, std::array<Idx3, 2>& e) {
  const int code = (p[0] & 1) | ((p[1] & 1) << 1) | ((p[2] & 1) << 2);
  switch (code) {
    case 0:
      e[0] = p;
      return 1;
    case 1:
      e = {Idx3{p[0] - 1, p[1], p[2]}, {p[0] + 1, p[1], p[2]}};
      return 2;
    case 2:
      e = {Idx3{p[0], p[1] - 1, p[2]}, {p[0], p[1] + 1, p[2]}};
      return 2;
    case 4:
      e = {Idx3{p[0], p[1], p[2] - 1}, {p[0], p[1], p[2] + 1}};
      return 2;
    case 3:
      e = {Idx3{p[0] + 1, p[1] - 1, p[2]}, {p[0] - 1, p[1] + 1, p[2]}};
      return 2;
    case 5:
      e = {Idx3{p[0] + 1, p[1], p[2] - 1}, {p[0] - 1, p[1], p[2] + 1}};
      return 2;
    case 6:
      e = {Idx3{p[0], p[1] + 1, p[2] - 1}, {p[0], p[1] - 1, p[2] + 1}};
      return 2;
    default:
      e = {Idx3{p[0] - 1, p[1] + 1, p[2] - 1}, {p[0] + 1, p[1] - 1, p[2] + 1}};
      return 2;
  }
}

inline void check_transfer_pair(const FEFunction& coarse, const FEFunction& fine,
                                Level fine_l) {
  require_p1(coarse);
  require_p1(fine);
  if (coarse.grid.get() != fine.grid.get())
    throw std::invalid_argument("transfer: functions live on different grids");
  fine.check_level(fine_l);
  coarse.check_level(fine_l - 1);
}

}  // namespace detail

/// Linear interpolation to the next finer level. Requires replica-consistent
/// coarse input; the output is then replica-consistent without a sync.
inline void prolongate_p1(const FEFunction& coarse, FEFunction& fine,
                          Level fine_l) {
  detail::check_transfer_pair(coarse, fine, fine_l);
  const Level lc = fine_l - 1;
  const int wf = width_formula(Subgroup::V, fine_l);
  const int wc = width_formula(Subgroup::V, lc);
  for (int c = 0; c < fine.grid->mesh().n_cells(); ++c) {
    for_each_index(wf, [&](Idx3 p) {
      std::array<Idx3, 2> ends{};
      const int k = detail::coarse_endpoints(p, ends);
      double value;
      if (k == 1) {
        value = coarse.at(lc, c, 0,
                          linearize(wc, {p[0] / 2, p[1] / 2, p[2] / 2}), 0);
      } else {
        double sum = 0;
        for (int i = 0; i < 2; ++i)
          sum += coarse.at(
              lc, c, 0,
              linearize(wc, {ends[i][0] / 2, ends[i][1] / 2, ends[i][2] / 2}),
              0);
        value = 0.5 * sum;
      }
      fine.at(fine_l, c, 0, linearize(wf, p), 0) = value;
    });
  }
}

/// Transpose of prolongate_p1 in the owned inner product: copy weights 1,
/// midpoint weights 1/2 per endpoint. Non-owned fine replicas are zeroed
/// first so each physical fine vertex contributes exactly once; the additive
/// sync at the end restores replica consistency on the coarse level.
inline void restrict_p1(const FEFunction& fine, FEFunction& coarse,
                        Level fine_l) {
  detail::check_transfer_pair(coarse, fine, fine_l);
  const Level lc = fine_l - 1;
  const int wf = width_formula(Subgroup::V, fine_l);
  const int wc = width_formula(Subgroup::V, lc);

  FEFunction tmp = allocate(fine.descriptor, fine.grid, fine_l, fine_l);
  copy(fine, tmp, fine_l);
  for (int c = 0; c < tmp.grid->mesh().n_cells(); ++c) {
    const auto& owned = tmp.grid->masks(fine_l, c, Subgroup::V).owned;
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(owned.size()); ++t)
      if (!owned[t]) tmp.at(fine_l, c, 0, t, 0) = 0.0;
  }

  assign(coarse, lc, 0.0);
  for (int c = 0; c < coarse.grid->mesh().n_cells(); ++c) {
    for_each_index(wf, [&](Idx3 p) {
      const double v = tmp.at(fine_l, c, 0, linearize(wf, p), 0);
      std::array<Idx3, 2> ends{};
      const int k = detail::coarse_endpoints(p, ends);
      if (k == 1) {
        coarse.at(lc, c, 0, linearize(wc, {p[0] / 2, p[1] / 2, p[2] / 2}), 0) +=
            v;
      } else {
        for (int i = 0; i < 2; ++i)
          coarse.at(
              lc, c, 0,
              linearize(wc, {ends[i][0] / 2, ends[i][1] / 2, ends[i][2] / 2}),
              0) += 0.5 * v;
      }
    });
  }
  sync_additive(coarse, lc);
}

// ---------------------------------------------------------------------------
// Hierarchy
// ---------------------------------------------------------------------------

enum class KernelKind : std::uint8_t { Elementwise, Stencil };

inline const char* kernel_name(KernelKind k) {
  return k == KernelKind::Elementwise ? "elementwise" : "stencil";
}

/// One discretized form over every level of a grid: stencil tables where the
/// coefficient allows them, assembled diagonals always, and a lazily filled
/// spectral estimate per level for Chebyshev smoothing.
struct GridHierarchy {
  std::shared_ptr<const Grid> grid;
  FormId form;
  KernelKind kernel = KernelKind::Stencil;
  int threads = 1;
  std::vector<std::optional<StencilTable>> tables;
  std::vector<FEFunction> diagonals;
  std::vector<double> lambda_hat;

  int index(Level l) const {
    if (!grid->has_level(l)) throw std::out_of_range("level not in hierarchy");
    return l - grid->min_level();
  }
};

inline GridHierarchy make_hierarchy(std::shared_ptr<const Grid> grid,
                                    FormId form,
                                    KernelKind kernel = KernelKind::Stencil,
                                    int threads = 1) {
  if (!grid) throw std::invalid_argument("make_hierarchy: grid required");
  if (kernel == KernelKind::Stencil && !form.constant_coefficient())
    throw std::invalid_argument(
        "stencil kernel requires a constant-coefficient form");
  GridHierarchy h;
  h.grid = std::move(grid);
  h.form = std::move(form);
  h.kernel = kernel;
  h.threads = threads;
  for (int l = h.grid->min_level(); l <= h.grid->max_level(); ++l) {
    if (h.form.constant_coefficient())
      h.tables.emplace_back(compute_stencil(h.form, h.grid, l));
    else
      h.tables.emplace_back(std::nullopt);
    FEFunction d = allocate(p1_space(), h.grid, l, l);
    if (h.tables.back())
      extract_diagonal(*h.tables.back(), d, l);
    else
      extract_diagonal(h.form, d, l, h.threads);
    h.diagonals.push_back(std::move(d));
    h.lambda_hat.push_back(0.0);
  }
  return h;
}

inline void hierarchy_apply(const GridHierarchy& h, const FEFunction& x,
                            FEFunction& y, Level l,
                            BC bc = BC::DirichletIdentity) {
  const int i = h.index(l);
  if (h.kernel == KernelKind::Stencil)
    apply_stencil(*h.tables[i], x, y, l, bc, h.threads);
  else
    apply_elementwise(h.form, x, y, l, ApplyMode::Replace, bc, h.threads);
}

inline double spectral_estimate(GridHierarchy& h, Level l) {
  const int i = h.index(l);
  if (h.lambda_hat[i] == 0.0)
    h.lambda_hat[i] = estimate_lambda_max(
        [&](const FEFunction& v, FEFunction& w) {
          hierarchy_apply(h, v, w, l, BC::DirichletIdentity);
        },
        h.diagonals[i], l);
  return h.lambda_hat[i];
}

// ---------------------------------------------------------------------------
// Smoothers
// ---------------------------------------------------------------------------

enum class SmootherKind : std::uint8_t { Jacobi, GaussSeidel, Chebyshev };

struct SmootherConfig {
  SmootherKind kind = SmootherKind::GaussSeidel;
  double omega = 0.8;   // Jacobi damping, in (0, 1]
  int order = 2;        // Chebyshev polynomial degree
  double lo = 0.25;     // interval fractions of the spectral estimate
  double hi = 1.1;
  int nu1 = 1;
  int nu2 = 1;

  static SmootherConfig gauss_seidel() { return {}; }
  static SmootherConfig jacobi(double omega = 0.8) {
    SmootherConfig c;
    c.kind = SmootherKind::Jacobi;
    c.omega = omega;
    return c;
  }
  static SmootherConfig chebyshev(int order = 2) {
    SmootherConfig c;
    c.kind = SmootherKind::Chebyshev;
    c.order = order;
    return c;
  }
};

inline const char* smoother_name(SmootherKind k) {
  switch (k) {
    case SmootherKind::Jacobi: return "jacobi";
    case SmootherKind::GaussSeidel: return "gs";
    default: return "chebyshev";
  }
}

namespace detail {

inline void validate(const SmootherConfig& cfg) {
  if (!(cfg.omega > 0) || cfg.omega > 1)
    throw std::invalid_argument("smoother: omega must lie in (0, 1]");
  if (cfg.order < 1) throw std::invalid_argument("smoother: order must be >= 1");
  if (!(cfg.lo > 0) || !(cfg.hi > cfg.lo))
    throw std::invalid_argument("smoother: need 0 < lo < hi");
  if (cfg.nu1 < 0 || cfg.nu2 < 0)
    throw std::invalid_argument("smoother: sweep counts must be >= 0");
}

/// One degree-`order` Chebyshev acceleration of Jacobi on the interval
/// [a, b] of D^-1 A (three-term recurrence, restarted every call).
inline void chebyshev_apply(GridHierarchy& h, const FEFunction& rhs,
                            FEFunction& x, Level l, int order, double a,
                            double b) {
  const int i = h.index(l);
  const double theta = 0.5 * (b + a);
  const double delta = 0.5 * (b - a);
  const double sigma = theta / delta;
  double rho = 1.0 / sigma;

  FEFunction r = allocate(x.descriptor, x.grid, l, l);
  FEFunction d = allocate(x.descriptor, x.grid, l, l);
  hierarchy_apply(h, x, r, l, BC::DirichletIdentity);
  scale(r, l, -1.0);
  axpy(r, 1.0, rhs, l);
  hadamard(r, h.diagonals[i], l, /*divide=*/true);
  copy(r, d, l);
  scale(d, l, 1.0 / theta);
  axpy(x, 1.0, d, l);
  impose_dirichlet(rhs, x, l);
  for (int k = 1; k < order; ++k) {
    hierarchy_apply(h, x, r, l, BC::DirichletIdentity);
    scale(r, l, -1.0);
    axpy(r, 1.0, rhs, l);
    hadamard(r, h.diagonals[i], l, /*divide=*/true);
    const double rho_new = 1.0 / (2.0 * sigma - rho);
    scale(d, l, rho_new * rho);
    axpy(d, 2.0 * rho_new / delta, r, l);
    axpy(x, 1.0, d, l);
    impose_dirichlet(rhs, x, l);
    rho = rho_new;
  }
}

}  // namespace detail

inline void smooth(GridHierarchy& h, const SmootherConfig& cfg,
                   const FEFunction& rhs, FEFunction& x, Level l, int sweeps,
                   SweepDirection direction = SweepDirection::Forward) {
  detail::validate(cfg);
  const int i = h.index(l);
  for (int s = 0; s < sweeps; ++s) {
    switch (cfg.kind) {
      case SmootherKind::GaussSeidel: {
        if (!h.tables[i])
          throw std::invalid_argument(
              "gauss-seidel smoothing requires a stencil table");
        gauss_seidel_sweep(*h.tables[i], rhs, x, l, direction, h.threads);
        break;
      }
      case SmootherKind::Jacobi: {
        FEFunction r = allocate(x.descriptor, x.grid, l, l);
        hierarchy_apply(h, x, r, l, BC::DirichletIdentity);
        scale(r, l, -1.0);
        axpy(r, 1.0, rhs, l);
        detail::hadamard(r, h.diagonals[i], l, /*divide=*/true);
        axpy(x, cfg.omega, r, l);
        detail::impose_dirichlet(rhs, x, l);
        break;
      }
      case SmootherKind::Chebyshev: {
        const double lam = spectral_estimate(h, l);
        detail::chebyshev_apply(h, rhs, x, l, cfg.order, cfg.lo * lam,
                                cfg.hi * lam);
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Multigrid
// ---------------------------------------------------------------------------

struct MultigridConfig {
  int coarse_level = 2;
  int cycles = 5;  // V-cycles per level during full multigrid
  double coarse_tol = 1e-12;
  int coarse_maxit = 4000;
};

/// One V-cycle: pre-smooth, restrict the residual, recurse (CG on the coarse
/// level), prolongate-and-add the correction, post-smooth backwards. The
/// finest level carries the Dirichlet values; every coarser problem is the
/// homogeneous correction equation.
inline void v_cycle(GridHierarchy& h, Level l, const FEFunction& rhs,
                    FEFunction& x, const SmootherConfig& sm,
                    const MultigridConfig& mg) {
  if (mg.coarse_level < h.grid->min_level() || l < mg.coarse_level)
    throw std::invalid_argument("v_cycle: level range invalid");
  if (l == mg.coarse_level) {
    cg(
        [&](const FEFunction& a, FEFunction& b) {
          hierarchy_apply(h, a, b, l, BC::DirichletIdentity);
        },
        rhs, x, l, mg.coarse_tol, mg.coarse_maxit);
    return;
  }
  smooth(h, sm, rhs, x, l, sm.nu1, SweepDirection::Forward);

  FEFunction r = allocate(x.descriptor, h.grid, l, l);
  hierarchy_apply(h, x, r, l, BC::DirichletIdentity);
  scale(r, l, -1.0);
  axpy(r, 1.0, rhs, l);

  FEFunction rc = allocate(x.descriptor, h.grid, l - 1, l - 1);
  restrict_p1(r, rc, l);
  detail::zero_dirichlet(rc, l - 1);

  FEFunction ec = allocate(x.descriptor, h.grid, l - 1, l - 1);
  v_cycle(h, l - 1, rc, ec, sm, mg);

  FEFunction ef = allocate(x.descriptor, h.grid, l, l);
  prolongate_p1(ec, ef, l);
  axpy(x, 1.0, ef, l);

  smooth(h, sm, rhs, x, l, sm.nu2, SweepDirection::Backward);
}

/// Full multigrid: solve the coarsest problem with CG, then per ascending
/// level interpolate the previous solution and run a fixed number of
/// V-cycles. rhs_levels[i] belongs to level coarse_level + i and must carry
/// that level's Dirichlet values.
inline IterationReport fmg(
    GridHierarchy& h, Level finest, const std::vector<FEFunction>& rhs_levels,
    FEFunction& x, const SmootherConfig& sm, const MultigridConfig& mg,
    const std::function<double(const FEFunction&, Level)>& error_fn = {}) {
  if (finest < mg.coarse_level)
    throw std::invalid_argument("fmg: finest below coarse level");
  if (static_cast<int>(rhs_levels.size()) != finest - mg.coarse_level + 1)
    throw std::invalid_argument("fmg: one rhs per level expected");
  x.check_level(finest);
  const auto t0 = std::chrono::steady_clock::now();
  IterationReport report;

  const auto relative_residual = [&](const FEFunction& b, const FEFunction& v,
                                     Level l) {
    FEFunction r = allocate(v.descriptor, h.grid, l, l);
    hierarchy_apply(h, v, r, l, BC::DirichletIdentity);
    scale(r, l, -1.0);
    axpy(r, 1.0, b, l);
    const double nb = norm2(b, l);
    return norm2(r, l) / (nb > 0 ? nb : 1.0);
  };

  FEFunction cur = allocate(x.descriptor, h.grid, mg.coarse_level,
                            mg.coarse_level);
  detail::impose_dirichlet(rhs_levels[0], cur, mg.coarse_level);
  cg(
      [&](const FEFunction& a, FEFunction& b) {
        hierarchy_apply(h, a, b, mg.coarse_level, BC::DirichletIdentity);
      },
      rhs_levels[0], cur, mg.coarse_level, mg.coarse_tol, mg.coarse_maxit);
  report.rows.push_back(
      {mg.coarse_level, 0, relative_residual(rhs_levels[0], cur, mg.coarse_level),
       error_fn ? error_fn(cur, mg.coarse_level) : 0.0,
       detail::seconds_since(t0)});

  for (Level l = mg.coarse_level + 1; l <= finest; ++l) {
    const FEFunction& rhs = rhs_levels[l - mg.coarse_level];
    FEFunction next = allocate(x.descriptor, h.grid, l, l);
    prolongate_p1(cur, next, l);
    detail::impose_dirichlet(rhs, next, l);
    for (int cyc = 1; cyc <= mg.cycles; ++cyc) {
      v_cycle(h, l, rhs, next, sm, mg);
      ++report.iterations;
      report.rows.push_back({l, cyc, relative_residual(rhs, next, l),
                             error_fn ? error_fn(next, l) : 0.0,
                             detail::seconds_since(t0)});
    }
    cur = std::move(next);
  }
  copy(cur, x, finest);
  report.residual = report.rows.back().residual;
  report.converged = true;
  return report;
}

// ---------------------------------------------------------------------------
// L2 error
// ---------------------------------------------------------------------------

/// || u_h - exact ||_L2 by the order-2 quadrature rule per micro-cell.
inline double l2_error(const FEFunction& fn, Level l,
                       const std::function<double(Vec3)>& exact) {
  detail::require_p1(fn);
  if (!exact) throw std::invalid_argument("l2_error: exact solution required");
  const auto& rule = detail::tet_quadrature4();
  const int wv = width_formula(Subgroup::V, l);
  double acc = 0;
  for (int c = 0; c < fn.grid->mesh().n_cells(); ++c) {
    const MacroCellMap& map = fn.grid->cell_map(c);
    for (int s = 0; s < 6; ++s) {
      const Subgroup g = static_cast<Subgroup>(20 + s);
      const int w = width_formula(g, l);
      if (w <= 0) continue;
      const auto offs = subgroup_offsets(g);
      for_each_index(w, [&](Idx3 p) {
        std::array<Vec3, 4> corners{};
        std::array<double, 4> vals{};
        for (int i = 0; i < 4; ++i) {
          corners[i] = map.map(micro_vertex_coord(l, p + offs[i]));
          vals[i] = fn.at(l, c, 0, linearize(wv, p + offs[i]), 0);
        }
        const double vol =
            std::abs(dot(corners[1] - corners[0],
                         cross(corners[2] - corners[0],
                               corners[3] - corners[0]))) /
            6.0;
        for (const auto& bary : rule.bary) {
          Vec3 xq{0, 0, 0};
          double uh = 0;
          for (int i = 0; i < 4; ++i) {
            xq = xq + corners[i] * bary[i];
            uh += vals[i] * bary[i];
          }
          const double diff = uh - exact(xq);
          acc += vol * 0.25 * diff * diff;
        }
      });
    }
  }
  return std::sqrt(acc);
}

}  // namespace blocktet
