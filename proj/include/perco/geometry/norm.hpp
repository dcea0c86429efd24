#ifndef PERCO_GEOMETRY_NORM_HPP
#define PERCO_GEOMETRY_NORM_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace perco::geometry {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quasi-uniform unit directions, one per column: `count` equally spaced
/// angles in d=2, a subdivided icosahedron (2562 points at level 4) in d=3.
template <typename Scalar>
Mat<Scalar> direction_grid(int d, int count = 0) {
  if (d == 2) {
    const int n = count > 0 ? count : 720;
    Mat<Scalar> out(2, n);
    for (int i = 0; i < n; ++i) {
      const Scalar a = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(i) / Scalar(n);
      out(0, i) = std::cos(a);
      out(1, i) = std::sin(a);
    }
    return out;
  }
  if (d == 3) {
    int level = 4;
    if (count > 0) {
      level = 0;
      while (10 * (1 << (2 * level)) + 2 < count) ++level;
    }
    const Scalar phi = (Scalar(1) + std::sqrt(Scalar(5))) / Scalar(2);
    std::vector<Vec<Scalar>> v;
    auto add = [&](Scalar x, Scalar y, Scalar z) {
      Vec<Scalar> p(3);
      p << x, y, z;
      v.push_back(p.normalized());
    };
    add(-1, phi, 0), add(1, phi, 0), add(-1, -phi, 0), add(1, -phi, 0);
    add(0, -1, phi), add(0, 1, phi), add(0, -1, -phi), add(0, 1, -phi);
    add(phi, 0, -1), add(phi, 0, 1), add(-phi, 0, -1), add(-phi, 0, 1);
    std::vector<std::array<int, 3>> faces{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                          {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                          {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                          {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
      std::map<std::pair<int, int>, int> midpoint;
      auto mid = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        v.push_back((v[a] + v[b]).normalized());
        const int idx = static_cast<int>(v.size()) - 1;
        midpoint.emplace(key, idx);
        return idx;
      };
      std::vector<std::array<int, 3>> next;
      next.reserve(faces.size() * 4);
      for (const auto& f : faces) {
        const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
        next.push_back({f[0], a, c});
        next.push_back({f[1], b, a});
        next.push_back({f[2], c, b});
        next.push_back({a, b, c});
      }
      faces = std::move(next);
    }
    Mat<Scalar> out(3, static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = v[i];
    return out;
  }
  throw GeometryError("direction grids are available for d = 2 and d = 3 only");
}

struct NormSymmetry {
  bool permutations = true;  // invariant under coordinate permutations
  bool reflections = true;   // invariant under x_i -> -x_i
};

template <typename Scalar>
struct TableRow {
  Vec<Scalar> direction;
  Scalar value;
};

enum class NormKind { euclidean, quadratic, lp, tabulated };

/// Positively homogeneous convex function on R^d standing in for the inverse
/// correlation length. Synthetic kinds have closed forms; the tabulated kind
/// evaluates a smoothed support function of the polar polytope
///   K = { t : (t, u_k) <= value_k for every stored direction u_k },
/// ξ(x) = || ((v, x)_+ )_v ||_q over the vertices v of K, q = 1/temperature.
template <typename Scalar>
class DirectionalNorm {
 public:
  using Vector = Vec<Scalar>;
  using Matrix = Mat<Scalar>;

  static DirectionalNorm euclidean(int d, Scalar scale = Scalar(1)) {
    if (d < 1 || !(scale > 0)) throw GeometryError("euclidean norm needs d >= 1 and positive scale");
    return DirectionalNorm(d, Euclidean{scale}, {true, true});
  }

  /// sqrt(x^T A x) with A symmetric positive definite.
  static DirectionalNorm quadratic(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() < 1) throw GeometryError("quadratic norm needs a square matrix");
    if (!a.isApprox(a.transpose())) throw GeometryError("quadratic norm matrix must be symmetric");
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) throw GeometryError("quadratic norm matrix must be positive definite");
    const bool diag = a.isDiagonal();
    const bool perm = diag && (a.diagonal().array() == a(0, 0)).all();
    return DirectionalNorm(static_cast<int>(a.rows()), Quadratic{a}, {perm, diag});
  }

  /// scale * (Σ |x_i|^exponent)^(1/exponent), exponent > 1. Exponents close to
  /// 1 give a smoothed ℓ¹ norm.
  static DirectionalNorm lp(int d, Scalar exponent, Scalar scale = Scalar(1)) {
    if (!(exponent > 1)) throw GeometryError("lp norm needs exponent > 1");
    return DirectionalNorm(d, Lp{exponent, scale}, {true, true});
  }

  static DirectionalNorm tabulated(const std::vector<TableRow<Scalar>>& rows, Scalar temperature = Scalar(1e-3),
                                   NormSymmetry symmetry = {}) {
    if (rows.empty()) throw GeometryError("tabulated norm needs at least one row");
    if (!(temperature > 0)) throw GeometryError("temperature must be positive");
    const int d = static_cast<int>(rows.front().direction.size());
    Tabulated tab;
    tab.exponent = Scalar(1) / temperature;
    for (const auto& row : rows) {
      if (row.direction.size() != d) throw GeometryError("table rows disagree on dimension");
      const Scalar len = row.direction.norm();
      if (!(len > 0) || !(row.value > 0)) throw GeometryError("table rows need nonzero directions and positive values");
      tab.rows.push_back({row.direction / len, row.value / len});
    }
    tab.vertices = polar_vertices(tab.rows, d);
    return DirectionalNorm(d, std::move(tab), symmetry);
  }

  int dimension() const { return dimension_; }
  NormKind kind() const { return static_cast<NormKind>(repr_.index()); }
  const NormSymmetry& symmetry() const { return symmetry_; }
  /// c_-: min of the norm over the unit sphere (direction grid estimate).
  Scalar lower_constant() const { return c_minus_; }
  /// c_+: max of the norm over the unit sphere (direction grid estimate).
  Scalar upper_constant() const { return c_plus_; }

  /// Vertices of the polar polytope, one per column (tabulated kind only).
  const Matrix& dual_points() const { return std::get<Tabulated>(repr_).vertices; }
  const std::vector<TableRow<Scalar>>& table() const { return std::get<Tabulated>(repr_).rows; }

  template <typename Derived>
  Scalar operator()(const Eigen::MatrixBase<Derived>& x) const {
    return std::visit([&](const auto& r) { return eval(r, x); }, repr_);
  }

  /// Closed-form gradient at y != 0 (order-0 homogeneous).
  Vector gradient(const Vector& y) const {
    if (!(y.norm() > 0)) throw GeometryError("norm gradient is undefined at the origin");
    return std::visit([&](const auto& r) { return grad(r, y); }, repr_);
  }

  /// Closed-form Hessian at y != 0. Entries are infinite where an ℓ^q
  /// coordinate with q < 2 vanishes.
  Matrix hessian(const Vector& y) const {
    if (!(y.norm() > 0)) throw GeometryError("norm Hessian is undefined at the origin");
    return std::visit([&](const auto& r) { return hess(r, y); }, repr_);
  }

 private:
  struct Euclidean {
    Scalar scale;
  };
  struct Quadratic {
    Matrix a;
  };
  struct Lp {
    Scalar exponent;
    Scalar scale;
  };
  struct Tabulated {
    Scalar exponent;
    std::vector<TableRow<Scalar>> rows;
    Matrix vertices;
  };
  using Repr = std::variant<Euclidean, Quadratic, Lp, Tabulated>;

  DirectionalNorm(int d, Repr repr, NormSymmetry symmetry)
      : dimension_(d), repr_(std::move(repr)), symmetry_(symmetry) {
    if (d == 2 || d == 3) {
      const Matrix grid = direction_grid<Scalar>(d, d == 2 ? 360 : 642);
      c_minus_ = std::numeric_limits<Scalar>::infinity();
      c_plus_ = 0;
      for (Eigen::Index i = 0; i < grid.cols(); ++i) {
        const Scalar v = (*this)(grid.col(i));
        c_minus_ = std::min(c_minus_, v);
        c_plus_ = std::max(c_plus_, v);
      }
    } else {
      c_minus_ = c_plus_ = std::numeric_limits<Scalar>::quiet_NaN();
    }
  }

  template <typename Derived>
  static Scalar eval(const Euclidean& r, const Eigen::MatrixBase<Derived>& x) {
    return r.scale * x.norm();
  }
  template <typename Derived>
  static Scalar eval(const Quadratic& r, const Eigen::MatrixBase<Derived>& x) {
    return std::sqrt(std::max(Scalar(0), x.dot(r.a * x)));
  }
  template <typename Derived>
  static Scalar eval(const Lp& r, const Eigen::MatrixBase<Derived>& x) {
    const Scalar m = x.cwiseAbs().maxCoeff();
    if (m == 0) return 0;
    Scalar s = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += std::pow(std::abs(x[i]) / m, r.exponent);
    return r.scale * m * std::pow(s, Scalar(1) / r.exponent);
  }
  template <typename Derived>
  static Scalar eval(const Tabulated& r, const Eigen::MatrixBase<Derived>& x) {
    const Vector a = (r.vertices.transpose() * x).cwiseMax(Scalar(0));
    const Scalar m = a.maxCoeff();
    if (!(m > 0)) return 0;
    // Terms below half the maximum contribute less than 2^-q.
    Scalar s = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const Scalar ratio = a[i] / m;
      if (ratio > Scalar(0.5)) s += std::exp(r.exponent * std::log(ratio));
    }
    return m * std::exp(std::log(s) / r.exponent);
  }

  static Vector grad(const Euclidean& r, const Vector& y) { return r.scale * y / y.norm(); }
  static Vector grad(const Quadratic& r, const Vector& y) { return r.a * y / eval(r, y); }
  static Vector grad(const Lp& r, const Vector& y) {
    const Scalar rho = eval(Lp{r.exponent, Scalar(1)}, y);
    Vector g(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      g[i] = (y[i] < 0 ? -1 : 1) * std::pow(std::abs(y[i]) / rho, r.exponent - 1);
    }
    return r.scale * g;
  }
  static Vector grad(const Tabulated& r, const Vector& y) {
    const Vector a = (r.vertices.transpose() * y).cwiseMax(Scalar(0));
    const Scalar m = a.maxCoeff();
    const Scalar f = eval(r, y);
    Vector g = Vector::Zero(y.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a[i] / m > Scalar(0.5)) g += std::exp((r.exponent - 1) * std::log(a[i] / f)) * r.vertices.col(i);
    }
    return g;
  }

  static Matrix hess(const Euclidean& r, const Vector& y) {
    const Scalar n = y.norm();
    return r.scale * (Matrix::Identity(y.size(), y.size()) / n - y * y.transpose() / (n * n * n));
  }
  static Matrix hess(const Quadratic& r, const Vector& y) {
    const Scalar f = eval(r, y);
    const Vector ay = r.a * y;
    return r.a / f - ay * ay.transpose() / (f * f * f);
  }
  // With ρ = ‖y‖_q and g = ∇ρ: ∂_ij ρ = (q − 1) (δ_ij |y_i|^(q−2) / ρ^(q−1) − g_i g_j / ρ).
  static Matrix hess(const Lp& r, const Vector& y) {
    const Scalar q = r.exponent;
    const Scalar rho = eval(Lp{q, Scalar(1)}, y);
    Vector g(y.size()), diag(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const Scalar u = std::abs(y[i]) / rho;
      g[i] = (y[i] < 0 ? -1 : 1) * std::pow(u, q - 1);
      diag[i] = std::pow(u, q - 2) / rho;
    }
    return r.scale * (q - 1) * (Matrix(diag.asDiagonal()) - g * g.transpose() / rho);
  }
  // ξ = ‖a‖_q with a_v = (v, y)_+ over the vertices v, truncated as in eval.
  static Matrix hess(const Tabulated& r, const Vector& y) {
    const Vector a = (r.vertices.transpose() * y).cwiseMax(Scalar(0));
    const Scalar m = a.maxCoeff();
    const Scalar f = eval(r, y);
    const Eigen::Index d = y.size();
    Vector g = Vector::Zero(d);
    Matrix second = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (!(a[i] / m > Scalar(0.5))) continue;
      const Scalar w = std::exp((r.exponent - 2) * std::log(a[i] / f));
      const Vector v = r.vertices.col(i);
      g += w * (a[i] / f) * v;
      second += w * v * v.transpose();
    }
    return (r.exponent - 1) / f * (second - g * g.transpose());
  }

  /// Vertices of { t : (t, u_k) <= v_k } for d = 2 (edge clipping) and d = 3
  /// (facet polygon clipping).
  static Matrix polar_vertices(const std::vector<TableRow<Scalar>>& rows, int d) {
    const Scalar eps = Scalar(1e-12);
    std::vector<Vector> verts;
    auto push_unique = [&](const Vector& p) {
      for (const auto& q : verts) {
        if ((q - p).norm() <= Scalar(1e-10) * (Scalar(1) + p.norm())) return;
      }
      verts.push_back(p);
    };
    const std::size_t n = rows.size();
    if (d == 2) {
      for (std::size_t k = 0; k < n; ++k) {
        const Vector& u = rows[k].direction;
        Vector w(2);
        w << -u[1], u[0];
        const Vector base = rows[k].value * u;
        Scalar lo = -std::numeric_limits<Scalar>::infinity();
        Scalar hi = std::numeric_limits<Scalar>::infinity();
        for (std::size_t j = 0; j < n && lo <= hi; ++j) {
          if (j == k) continue;
          const Scalar slope = w.dot(rows[j].direction);
          const Scalar room = rows[j].value - base.dot(rows[j].direction);
          if (std::abs(slope) < eps) {
            if (room < -eps) lo = std::numeric_limits<Scalar>::infinity();
          } else if (slope > 0) {
            hi = std::min(hi, room / slope);
          } else {
            lo = std::max(lo, room / slope);
          }
        }
        if (lo > hi + eps) continue;
        if (!std::isfinite(lo) || !std::isfinite(hi)) throw GeometryError("table directions do not span the plane");
        push_unique(base + lo * w);
        push_unique(base + hi * w);
      }
    } else if (d == 3) {
      for (std::size_t k = 0; k < n; ++k) {
        const Vector& u = rows[k].direction;
        // Orthonormal basis (w1, w2) of the facet plane.
        Vector w1 = (std::abs(u[0]) < Scalar(0.9) ? Vector::Unit(3, 0) : Vector::Unit(3, 1));
        w1 = (w1 - w1.dot(u) * u).normalized();
        Vector w2(3);
        w2 << u[1] * w1[2] - u[2] * w1[1], u[2] * w1[0] - u[0] * w1[2], u[0] * w1[1] - u[1] * w1[0];
        const Vector base = rows[k].value * u;
        const Scalar big = Scalar(1e3) * (Scalar(1) + rows[k].value);
        std::vector<std::array<Scalar, 2>> poly{{-big, -big}, {big, -big}, {big, big}, {-big, big}};
        for (std::size_t j = 0; j < n && !poly.empty(); ++j) {
          if (j == k) continue;
          const Scalar a = w1.dot(rows[j].direction);
          const Scalar b = w2.dot(rows[j].direction);
          const Scalar c = rows[j].value - base.dot(rows[j].direction);
          auto inside = [&](const std::array<Scalar, 2>& p) { return a * p[0] + b * p[1] <= c + eps; };
          std::vector<std::array<Scalar, 2>> clipped;
          for (std::size_t i = 0; i < poly.size(); ++i) {
            const auto& p = poly[i];
            const auto& q = poly[(i + 1) % poly.size()];
            const bool pin = inside(p), qin = inside(q);
            if (pin) clipped.push_back(p);
            if (pin != qin) {
              const Scalar fp = a * p[0] + b * p[1] - c;
              const Scalar fq = a * q[0] + b * q[1] - c;
              const Scalar s = fp / (fp - fq);
              clipped.push_back({p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])});
            }
          }
          poly = std::move(clipped);
        }
        for (const auto& p : poly) {
          if (std::abs(p[0]) >= big * Scalar(0.999) || std::abs(p[1]) >= big * Scalar(0.999)) {
            throw GeometryError("table directions do not span space");
          }
          push_unique(base + p[0] * w1 + p[1] * w2);
        }
      }
    } else {
      throw GeometryError("tabulated norms are available for d = 2 and d = 3 only");
    }
    Matrix out(d, static_cast<Eigen::Index>(verts.size()));
    for (std::size_t i = 0; i < verts.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = verts[i];
    return out;
  }

  int dimension_;
  Repr repr_;
  NormSymmetry symmetry_;
  Scalar c_minus_ = 0;
  Scalar c_plus_ = 0;
};

template <typename Scalar, typename Derived>
Vec<Scalar> norm_gradient(const DirectionalNorm<Scalar>& xi, const Eigen::MatrixBase<Derived>& x) {
  return xi.gradient(Vec<Scalar>(x));
}

/// Second-order central-difference Hessian with step `h`, symmetrized.
template <typename Scalar, typename F>
Mat<Scalar> finite_difference_hessian(F&& f, const Vec<Scalar>& x, Scalar h) {
  const Eigen::Index d = x.size();
  Mat<Scalar> hess(d, d);
  const Scalar f0 = f(x);
  Vec<Scalar> y = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    y[i] = x[i] + h;
    const Scalar fp = f(y);
    y[i] = x[i] - h;
    const Scalar fm = f(y);
    y[i] = x[i];
    hess(i, i) = (fp - Scalar(2) * f0 + fm) / (h * h);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      auto at = [&](Scalar si, Scalar sj) {
        y[i] = x[i] + si * h;
        y[j] = x[j] + sj * h;
        const Scalar v = f(y);
        y[i] = x[i];
        y[j] = x[j];
        return v;
      };
      hess(i, j) = hess(j, i) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (Scalar(4) * h * h);
    }
  }
  return Scalar(0.5) * (hess + hess.transpose());
}

/// Hessian of the norm at y != 0 (homogeneous of order -1).
template <typename Scalar>
Mat<Scalar> norm_hessian(const DirectionalNorm<Scalar>& xi, const Vec<Scalar>& y) {
  return xi.hessian(y);
}

/// Image of x under the coordinate permutation `perm` followed by sign flips.
template <typename Scalar>
Vec<Scalar> apply_symmetry(const Vec<Scalar>& x, const std::vector<int>& perm, const std::vector<int>& signs) {
  Vec<Scalar> y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = Scalar(signs[static_cast<std::size_t>(i)]) * x[perm[static_cast<std::size_t>(i)]];
  return y;
}

/// Rows sampled on [0, π/4] in d = 2 extended to the full circle by the
/// square-lattice symmetry group, interpolated with the fit
///   1/ξ(θ) = a_0 + Σ_m a_m cos(4 m θ),   m = 1 .. harmonics,
/// and tabulated at `count` equally spaced directions.
template <typename Scalar>
std::vector<TableRow<Scalar>> densify_square_symmetric(const std::vector<TableRow<Scalar>>& samples, int harmonics,
                                                       int count = 720) {
  if (samples.empty()) throw GeometryError("no samples to densify");
  const Eigen::Index terms = harmonics + 1;
  if (static_cast<Eigen::Index>(samples.size()) < terms) throw GeometryError("too few samples for the requested harmonics");
  Mat<Scalar> design(static_cast<Eigen::Index>(samples.size()), terms);
  Vec<Scalar> rhs(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.direction.size() != 2) throw GeometryError("square-symmetric densification is two-dimensional");
    const Scalar len = s.direction.norm();
    const Scalar theta = std::atan2(s.direction[1], s.direction[0]);
    for (Eigen::Index m = 0; m < terms; ++m) design(static_cast<Eigen::Index>(i), m) = std::cos(Scalar(4 * m) * theta);
    rhs[static_cast<Eigen::Index>(i)] = len / s.value;
  }
  const Vec<Scalar> coef = design.colPivHouseholderQr().solve(rhs);
  std::vector<TableRow<Scalar>> out;
  const Mat<Scalar> grid = direction_grid<Scalar>(2, count);
  for (Eigen::Index i = 0; i < grid.cols(); ++i) {
    const Scalar theta = std::atan2(grid(1, i), grid(0, i));
    Scalar r = 0;
    for (Eigen::Index m = 0; m < terms; ++m) r += coef[m] * std::cos(Scalar(4 * m) * theta);
    if (!(r > 0)) throw GeometryError("densified profile is not positive");
    out.push_back({grid.col(i), Scalar(1) / r});
  }
  return out;
}

}  // namespace perco::geometry

#endif
