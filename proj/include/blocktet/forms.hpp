#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "blocktet/geometry.hpp"

namespace blocktet {

enum class FormKind : std::uint8_t { Diffusion, Mass, DivKGrad };

inline constexpr std::string_view form_name(FormKind k) {
  switch (k) {
    case FormKind::Diffusion: return "diffusion";
    case FormKind::Mass: return "mass";
    case FormKind::DivKGrad: return "divkgrad";
  }
  return "?";
}

/// Bilinear form selector. Diffusion and mass have constant coefficients and
/// closed-form element integrals; div_k_grad carries a spatial coefficient
/// and integrates with the 4-point tetrahedral rule.
struct FormId {
  FormKind kind = FormKind::Diffusion;
  std::function<double(Vec3)> k;  // DivKGrad only; must be strictly positive

  static FormId diffusion() { return {FormKind::Diffusion, {}}; }
  static FormId mass() { return {FormKind::Mass, {}}; }
  static FormId div_k_grad(std::function<double(Vec3)> coeff) {
    if (!coeff) throw std::invalid_argument("div_k_grad needs a coefficient");
    return {FormKind::DivKGrad, std::move(coeff)};
  }

  bool constant_coefficient() const { return kind != FormKind::DivKGrad; }
};

struct ElementMatrix {
  std::array<double, 16> a{};
  double& operator()(int k, int l) { return a[4 * k + l]; }
  double operator()(int k, int l) const { return a[4 * k + l]; }
};

namespace detail {

// Barycentric quadrature exact for quadratics: one coordinate (5+3*sqrt5)/20,
// the others (5-sqrt5)/20, weight 1/4 per point.
struct TetQuadrature4 {
  std::array<std::array<double, 4>, 4> bary;
  TetQuadrature4() {
    const double a = (5.0 + 3.0 * std::sqrt(5.0)) / 20.0;
    const double b = (5.0 - std::sqrt(5.0)) / 20.0;
    for (int q = 0; q < 4; ++q) {
      bary[q] = {b, b, b, b};
      bary[q][q] = a;
    }
  }
};

inline const TetQuadrature4& tet_quadrature4() {
  static const TetQuadrature4 rule;
  return rule;
}

}  // namespace detail

/// 4x4 element matrix of the form on an affine tetrahedron with the given
/// physical corners. P1 gradients are constant, so diffusion and div_k_grad
/// reduce to outer products of the mapped barycentric gradients.
inline ElementMatrix local_matrix(const FormId& form,
                                  const std::array<Vec3, 4>& x) {
  const Mat3 jac = from_columns(x[1] - x[0], x[2] - x[0], x[3] - x[0]);
  const double det = jac.det();
  if (det == 0.0 || !std::isfinite(det))
    throw std::invalid_argument("local_matrix: degenerate element");
  const double vol = std::abs(det) / 6.0;

  ElementMatrix out;
  if (form.kind == FormKind::Mass) {
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l) out(k, l) = vol / 20.0 * (k == l ? 2.0 : 1.0);
    return out;
  }

  const Mat3 inv = jac.inverse();
  constexpr std::array<Vec3, 4> ref_grad = {
      Vec3{-1, -1, -1}, Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  std::array<Vec3, 4> grad{};
  for (int i = 0; i < 4; ++i) {
    const Vec3 g = ref_grad[i];
    grad[i] = {inv(0, 0) * g.x + inv(1, 0) * g.y + inv(2, 0) * g.z,
               inv(0, 1) * g.x + inv(1, 1) * g.y + inv(2, 1) * g.z,
               inv(0, 2) * g.x + inv(1, 2) * g.y + inv(2, 2) * g.z};
  }

  if (form.kind == FormKind::Diffusion) {
    for (int k = 0; k < 4; ++k)
      for (int l = 0; l < 4; ++l) out(k, l) = vol * dot(grad[k], grad[l]);
    return out;
  }

  const auto& rule = detail::tet_quadrature4();
  double weight = 0;
  for (const auto& bary : rule.bary) {
    Vec3 point{0, 0, 0};
    for (int i = 0; i < 4; ++i) point = point + x[i] * bary[i];
    const double kq = form.k(point);
    if (!(kq > 0))
      throw std::invalid_argument("div_k_grad coefficient must be positive");
    weight += 0.25 * kq;
  }
  for (int k = 0; k < 4; ++k)
    for (int l = 0; l < 4; ++l) out(k, l) = vol * weight * dot(grad[k], grad[l]);
  return out;
}

}  // namespace blocktet
