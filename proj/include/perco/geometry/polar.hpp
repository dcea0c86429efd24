#ifndef PERCO_GEOMETRY_POLAR_HPP
#define PERCO_GEOMETRY_POLAR_HPP

#include "perco/geometry/norm.hpp"

#include <limits>

namespace perco::geometry {

template <typename Scalar>
struct PolarMembership {
  bool inside = true;
  Scalar margin = 0;        // sup over directions of (t, u) / ξ(u)
  Vec<Scalar> argmax;       // maximizing unit direction
};

namespace detail {

template <typename Scalar, typename F>
Scalar golden_max(F&& f, Scalar lo, Scalar hi, Scalar tol) {
  const Scalar r = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar a = lo, b = hi;
  Scalar c = b - r * (b - a), d = a + r * (b - a);
  Scalar fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    }
  }
  return (a + b) / Scalar(2);
}

template <typename Scalar>
Vec<Scalar> unit_at_angle(Scalar theta) {
  Vec<Scalar> u(2);
  u << std::cos(theta), std::sin(theta);
  return u;
}

/// Orthonormal tangent basis of the sphere at unit u (d = 3).
template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> tangent_basis(const Vec<Scalar>& u) {
  Vec<Scalar> a = std::abs(u[0]) < Scalar(0.9) ? Vec<Scalar>::Unit(3, 0) : Vec<Scalar>::Unit(3, 1);
  a = (a - a.dot(u) * u).normalized();
  Vec<Scalar> b(3);
  b << u[1] * a[2] - u[2] * a[1], u[2] * a[0] - u[0] * a[2], u[0] * a[1] - u[1] * a[0];
  return {a, b};
}

}  // namespace detail

/// t ∈ K iff sup_u (t,u)/ξ(u) <= 1 + 1e-9. The sup is taken over a direction
/// grid and then refined locally around the best grid direction; the refined
/// value is reported as the margin.
template <typename Scalar>
PolarMembership<Scalar> in_polar_body(const DirectionalNorm<Scalar>& xi, const Vec<Scalar>& t, int grid_count = 0) {
  const int d = xi.dimension();
  if (t.size() != d) throw GeometryError("dimension mismatch in polar membership");
  PolarMembership<Scalar> out;
  out.argmax = Vec<Scalar>::Unit(d, 0);
  if (t.isZero(0)) return out;
  auto ratio = [&](const Vec<Scalar>& u) { return t.dot(u) / xi(u); };
  const Mat<Scalar> grid = direction_grid<Scalar>(d, grid_count);
  Eigen::Index best = 0;
  Scalar best_value = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < grid.cols(); ++i) {
    const Scalar v = ratio(grid.col(i));
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  Vec<Scalar> u = grid.col(best);
  if (d == 2) {
    const Scalar step = Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(grid.cols());
    const Scalar theta0 = std::atan2(u[1], u[0]);
    const Scalar theta = detail::golden_max<Scalar>([&](Scalar a) { return ratio(detail::unit_at_angle(a)); },
                                                    theta0 - step, theta0 + step, Scalar(1e-12));
    const Vec<Scalar> refined = detail::unit_at_angle(theta);
    if (ratio(refined) > best_value) {
      u = refined;
      best_value = ratio(refined);
    }
  } else if (d == 3) {
    Scalar step = Scalar(4) / std::sqrt(Scalar(grid.cols()));
    while (step > Scalar(1e-10)) {
      const auto [a, b] = detail::tangent_basis(u);
      bool improved = false;
      for (const Vec<Scalar>& dir : {Vec<Scalar>(a), Vec<Scalar>(-a), Vec<Scalar>(b), Vec<Scalar>(-b)}) {
        const Vec<Scalar> cand = (u + step * dir).normalized();
        const Scalar v = ratio(cand);
        if (v > best_value) {
          best_value = v;
          u = cand;
          improved = true;
          break;
        }
      }
      if (!improved) step /= 2;
    }
  }
  out.margin = best_value;
  out.argmax = u;
  out.inside = best_value <= Scalar(1) + Scalar(1e-9);
  return out;
}

/// Polar point t_x = ∇ξ(x), so that (t_x, x) = ξ(x).
template <typename Scalar>
Vec<Scalar> polar_point(const DirectionalNorm<Scalar>& xi, const Vec<Scalar>& x) {
  return norm_gradient(xi, x);
}

/// The point x_t of ∂U with (t, x_t) = 1 for t on ∂K.
template <typename Scalar>
Vec<Scalar> dual_point(const DirectionalNorm<Scalar>& xi, const Vec<Scalar>& t) {
  const auto m = in_polar_body(xi, t);
  return m.argmax / xi(m.argmax);
}

/// Surcharge geometry in a fixed direction t ∈ ∂K: S_t(x) = ξ(x) − (t, x)
/// and the cone C_η(t) = { x : (t, x) >= (1 − η) ξ(x) }.
template <typename Scalar>
class SurchargeCone {
 public:
  SurchargeCone(const DirectionalNorm<Scalar>& xi, Vec<Scalar> t, Scalar tolerance = Scalar(1e-6))
      : xi_(&xi), t_(std::move(t)) {
    const auto m = in_polar_body(xi, t_);
    if (std::abs(m.margin - Scalar(1)) > tolerance) {
      throw GeometryError("direction is not on the boundary of the polar body (margin " + std::to_string(double(m.margin)) +
                          ")");
    }
    margin_ = m.margin;
    dual_ = m.argmax / xi(m.argmax);
  }

  const DirectionalNorm<Scalar>& norm() const { return *xi_; }
  const Vec<Scalar>& direction() const { return t_; }
  const Vec<Scalar>& dual_point() const { return dual_; }
  Scalar margin() const { return margin_; }

  template <typename Derived>
  Scalar surcharge(const Eigen::MatrixBase<Derived>& x) const {
    return (*xi_)(x) - t_.dot(x);
  }
  template <typename Derived>
  bool contains(Scalar eta, const Eigen::MatrixBase<Derived>& x) const {
    return t_.dot(x) >= (Scalar(1) - eta) * (*xi_)(x);
  }

  /// Unit directions of the boundary rays of C_η(t): two in d = 2, a ring of
  /// `ring` samples around the axis in d = 3.
  std::vector<Vec<Scalar>> boundary_rays(Scalar eta, int ring = 256) const {
    const int d = xi_->dimension();
    auto g = [&](const Vec<Scalar>& u) { return t_.dot(u) - (Scalar(1) - eta) * (*xi_)(u); };
    const Vec<Scalar> axis = dual_.normalized();
    std::vector<Vec<Scalar>> rays;
    // Bisection along a meridian from the axis (inside) to its antipode.
    auto edge_along = [&](auto&& at) {
      Scalar lo = 0, hi = std::numbers::pi_v<Scalar>;
      if (g(at(hi)) >= 0) return at(hi);
      for (int it = 0; it < 100; ++it) {
        const Scalar mid = (lo + hi) / 2;
        (g(at(mid)) >= 0 ? lo : hi) = mid;
      }
      return at(lo);
    };
    if (d == 2) {
      const Scalar base = std::atan2(axis[1], axis[0]);
      for (Scalar sign : {Scalar(1), Scalar(-1)}) {
        rays.push_back(edge_along([&](Scalar a) { return detail::unit_at_angle<Scalar>(base + sign * a); }));
      }
    } else if (d == 3) {
      const auto [a, b] = detail::tangent_basis(axis);
      for (int k = 0; k < ring; ++k) {
        const Scalar phi = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / Scalar(ring);
        const Vec<Scalar> w = std::cos(phi) * a + std::sin(phi) * b;
        rays.push_back(edge_along([&](Scalar s) -> Vec<Scalar> { return std::cos(s) * axis + std::sin(s) * w; }));
      }
    } else {
      throw GeometryError("cone boundaries are available for d = 2 and d = 3 only");
    }
    return rays;
  }

  /// ξ-distance from x to the translated cone apex + C_η(t). The nearest
  /// point of a convex cone to an outside point lies on a boundary ray.
  Scalar distance_to_cone(Scalar eta, const Vec<Scalar>& apex, const Vec<Scalar>& x) const {
    const Vec<Scalar> w = x - apex;
    if (contains(eta, w)) return 0;
    const Scalar reach = Scalar(2) * w.norm() * xi_->upper_constant() / xi_->lower_constant() + Scalar(1);
    Scalar best = (*xi_)(w);
    for (const auto& ray : boundary_rays(eta)) {
      const Scalar r = detail::golden_max<Scalar>([&](Scalar s) { return -(*xi_)(w - s * ray); }, Scalar(0), reach,
                                                  Scalar(1e-10) * (Scalar(1) + reach));
      best = std::min(best, (*xi_)(w - r * ray));
    }
    return best;
  }

 private:
  const DirectionalNorm<Scalar>* xi_;
  Vec<Scalar> t_;
  Vec<Scalar> dual_;
  Scalar margin_ = 1;
};

template <typename Scalar>
Scalar surcharge(const DirectionalNorm<Scalar>& xi, const Vec<Scalar>& t, const Vec<Scalar>& x) {
  return SurchargeCone<Scalar>(xi, t).surcharge(x);
}

template <typename Scalar>
bool in_surcharge_cone(const DirectionalNorm<Scalar>& xi, const Vec<Scalar>& t, Scalar eta, const Vec<Scalar>& x) {
  return SurchargeCone<Scalar>(xi, t).contains(eta, x);
}

}  // namespace perco::geometry

#endif
