#ifndef PERCO_GEOMETRY_TRIPLE_HPP
#define PERCO_GEOMETRY_TRIPLE_HPP

#include "perco/geometry/polar.hpp"

#include <random>

namespace perco::geometry {

template <typename Scalar>
using Anchors = std::array<Vec<Scalar>, 3>;

template <typename Scalar>
struct X3Diagnostics {
  bool admissible = false;
  std::array<Vec<Scalar>, 3> u;      // u_i = Σ_{j≠i} ∇ξ(x_j − x_i)
  std::array<Scalar, 3> margins{};   // polar-body margin of each u_i
};

template <typename Scalar>
struct TripleConfig {
  Anchors<Scalar> anchors;
  Vec<Scalar> x0;
  std::array<Vec<Scalar>, 3> polar;  // t_i, polar to x_i − x0
  Mat<Scalar> hessian;               // empty when not admissible
  bool admissible = false;
  X3Diagnostics<Scalar> diagnostics;
  Scalar gradient_residual = 0;      // ‖Σ_i ∇ξ(x0 − x_i)‖
  int iterations = 0;
  bool converged = false;
};

namespace detail {

template <typename Scalar>
void require_distinct(const Anchors<Scalar>& x) {
  for (int i = 0; i < 3; ++i) {
    if (x[i].size() != x[0].size()) throw GeometryError("anchors disagree on dimension");
    for (int j = i + 1; j < 3; ++j) {
      if (x[i] == x[j]) throw GeometryError("anchors must be pairwise distinct");
    }
  }
}

}  // namespace detail

/// φ(x) = Σ_i ξ(x − x_i).
template <typename Scalar>
Scalar phi(const DirectionalNorm<Scalar>& xi, const Anchors<Scalar>& anchors, const Vec<Scalar>& x) {
  return xi(x - anchors[0]) + xi(x - anchors[1]) + xi(x - anchors[2]);
}

template <typename Scalar>
Vec<Scalar> phi_gradient(const DirectionalNorm<Scalar>& xi, const Anchors<Scalar>& anchors, const Vec<Scalar>& x) {
  Vec<Scalar> g = Vec<Scalar>::Zero(x.size());
  for (const auto& a : anchors) g += norm_gradient(xi, Vec<Scalar>(x - a));
  return g;
}

template <typename Scalar>
X3Diagnostics<Scalar> in_X3prime(const DirectionalNorm<Scalar>& xi, const Anchors<Scalar>& x) {
  detail::require_distinct(x);
  X3Diagnostics<Scalar> out;
  out.admissible = true;
  for (int i = 0; i < 3; ++i) {
    out.u[i] = Vec<Scalar>::Zero(x[i].size());
    for (int j = 0; j < 3; ++j) {
      if (j != i) out.u[i] += norm_gradient(xi, Vec<Scalar>(x[j] - x[i]));
    }
    const auto m = in_polar_body(xi, out.u[i]);
    out.margins[i] = m.margin;
    if (m.inside) out.admissible = false;
  }
  return out;
}

/// Hessian of φ at x0.
template <typename Scalar>
Mat<Scalar> phi_hessian(const DirectionalNorm<Scalar>& xi, const Vec<Scalar>& x0, const Anchors<Scalar>& anchors) {
  Scalar scale = std::numeric_limits<Scalar>::infinity();
  for (const auto& a : anchors) scale = std::min(scale, (x0 - a).norm());
  if (!(scale > Scalar(1e-6))) throw GeometryError("minimizer within 1e-6 of an anchor");
  Mat<Scalar> h = Mat<Scalar>::Zero(x0.size(), x0.size());
  for (const auto& a : anchors) h += norm_hessian(xi, Vec<Scalar>(x0 - a));
  return h;
}

/// Minimizer of φ by damped Newton with backtracking, started at the
/// centroid. An anchor whose u_i lies in K is the minimizer itself; such
/// triples are reported non-admissible with x0 at that anchor.
template <typename Scalar>
TripleConfig<Scalar> minimize_phi(const DirectionalNorm<Scalar>& xi, const Anchors<Scalar>& anchors,
                                  int max_iterations = 200) {
  detail::require_distinct(anchors);
  TripleConfig<Scalar> out;
  out.anchors = anchors;
  out.diagnostics = in_X3prime(xi, anchors);
  for (int i = 0; i < 3; ++i) {
    if (out.diagnostics.margins[i] <= Scalar(1) + Scalar(1e-9)) {
      out.x0 = anchors[i];
      out.converged = true;
      return out;
    }
  }

  Vec<Scalar> x = (anchors[0] + anchors[1] + anchors[2]) / Scalar(3);
  auto safe_gradient = [&](const Vec<Scalar>& z) {
    for (const auto& a : anchors) {
      if ((z - a).norm() == 0) return Vec<Scalar>(Vec<Scalar>::Zero(z.size()));
    }
    return phi_gradient(xi, anchors, z);
  };
  Scalar f = phi(xi, anchors, x);
  Vec<Scalar> g = safe_gradient(x);
  int it = 0;
  for (; it < max_iterations; ++it) {
    if (g.norm() <= Scalar(1e-12) * xi.upper_constant()) {
      out.converged = true;
      break;
    }
    Vec<Scalar> step = -g;
    bool newton_step = false;
    Scalar nearest = std::numeric_limits<Scalar>::infinity();
    for (const auto& a : anchors) nearest = std::min(nearest, (x - a).norm());
    if (nearest > Scalar(1e-9)) {
      Mat<Scalar> h = Mat<Scalar>::Zero(x.size(), x.size());
      for (const auto& a : anchors) h += norm_hessian(xi, Vec<Scalar>(x - a));
      Eigen::LLT<Mat<Scalar>> llt(h);
      if (llt.info() == Eigen::Success) {
        const Vec<Scalar> newton = llt.solve(-g);
        if (newton.dot(g) < 0) {
          step = newton;
          newton_step = true;
        }
      }
    }
    // The gradient is order-0 homogeneous; keep descent steps on the anchor scale.
    if (!newton_step && step.norm() > nearest) step *= nearest / step.norm();
    Scalar alpha = 1;
    const Scalar slope = g.dot(step);
    Vec<Scalar> trial = x + step;
    Scalar ft = phi(xi, anchors, trial);
    // Near the minimum the decrease of φ drops below rounding; a full Newton
    // step that halves the gradient is taken regardless.
    if (newton_step && ft <= f + Scalar(1e-13) * std::abs(f)) {
      const Vec<Scalar> gt = safe_gradient(trial);
      if (gt.norm() <= Scalar(0.5) * g.norm()) {
        x = trial;
        f = std::min(f, ft);
        g = gt;
        continue;
      }
    }
    while (ft > f + Scalar(1e-4) * alpha * slope && alpha > Scalar(1e-12)) {
      alpha /= 2;
      trial = x + alpha * step;
      ft = phi(xi, anchors, trial);
    }
    if (!(ft <= f)) break;
    x = trial;
    f = ft;
    g = safe_gradient(x);
  }
  out.iterations = it;
  out.x0 = x;
  out.gradient_residual = g.norm();
  for (int i = 0; i < 3; ++i) {
    if ((x - anchors[i]).norm() < Scalar(1e-6)) {
      out.x0 = anchors[i];
      return out;
    }
  }
  for (int i = 0; i < 3; ++i) out.polar[i] = polar_point(xi, Vec<Scalar>(anchors[i] - out.x0));
  out.hessian = phi_hessian(xi, out.x0, anchors);
  out.admissible = out.diagnostics.admissible;
  return out;
}

template <typename Scalar>
struct QuadraticProbe {
  Scalar constant = 0;   // min over samples of the ratio
  Scalar radius = 0;
  int samples = 0;
  bool positive = false;
};

/// min over y, 0 < ‖y‖ <= r, of (φ(x0 + y) − φ(x0)) / Σ_i ‖P_i^⊥ y‖², where
/// P_i^⊥ projects onto the hyperplane orthogonal to t_i.
template <typename Scalar>
QuadraticProbe<Scalar> quadratic_bound_probe(const DirectionalNorm<Scalar>& xi, const TripleConfig<Scalar>& triple,
                                             Scalar radius, int samples, std::uint64_t seed = 1) {
  if (!triple.admissible) throw GeometryError("quadratic bound probe needs an admissible triple");
  const Eigen::Index d = triple.x0.size();
  std::array<Mat<Scalar>, 3> proj;
  for (int i = 0; i < 3; ++i) {
    const Vec<Scalar> n = triple.polar[i].normalized();
    proj[i] = Mat<Scalar>::Identity(d, d) - n * n.transpose();
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const Scalar f0 = phi(xi, triple.anchors, triple.x0);
  QuadraticProbe<Scalar> out;
  out.radius = radius;
  out.constant = std::numeric_limits<Scalar>::infinity();
  for (int s = 0; s < samples; ++s) {
    Vec<Scalar> y(d);
    for (Eigen::Index i = 0; i < d; ++i) y[i] = Scalar(normal(rng));
    const Scalar r = radius * Scalar(std::pow(uniform(rng), 1.0 / double(d)));
    if (!(y.norm() > 0) || !(r > 0)) continue;
    y *= r / y.norm();
    Scalar q = 0;
    for (const auto& p : proj) q += (p * y).squaredNorm();
    const Scalar ratio = (phi(xi, triple.anchors, Vec<Scalar>(triple.x0 + y)) - f0) / q;
    out.constant = std::min(out.constant, ratio);
    ++out.samples;
  }
  out.positive = out.samples > 0 && out.constant > 0;
  return out;
}

}  // namespace perco::geometry

#endif
