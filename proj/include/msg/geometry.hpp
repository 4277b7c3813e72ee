#pragma once

// Constant-curvature manifold kernels in ambient coordinates.
//
// Lorentz (curvature -1): hyperboloid <z,z>_L = -1, z0 > 0 in R^{d+1}.
// Sphere  (curvature +1): unit sphere <z,z> = 1 in R^{d+1}.
// Euclidean (curvature 0): R^d.
// Product: Cartesian product of the above; every operation acts factor-wise on
// contiguous slices of the ambient vector, Jacobians are block-diagonal.
//
// Jacobians are ambient (n x n) derivatives of the closed-form expressions, so
// gradients are pulled back with plain transposes.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "msg/error.hpp"

namespace msg {

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Vector = Vec<double>;
using Matrix = Mat<double>;
using Index = Eigen::Index;

enum class ManifoldKind { Lorentz, Sphere, Euclidean, Product };

inline std::string_view kind_name(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::Lorentz: return "lorentz";
    case ManifoldKind::Sphere: return "sphere";
    case ManifoldKind::Euclidean: return "euclidean";
    case ManifoldKind::Product: return "product";
  }
  return "?";
}

class ManifoldSpec {
 public:
  // One constant-curvature factor and its slice of the ambient vector.
  struct Factor {
    ManifoldKind kind;
    int dim;
    Index offset;
    Index size;
  };

  static ManifoldSpec lorentz(int dim) { return simple(ManifoldKind::Lorentz, dim); }
  static ManifoldSpec sphere(int dim) { return simple(ManifoldKind::Sphere, dim); }
  static ManifoldSpec euclidean(int dim) { return simple(ManifoldKind::Euclidean, dim); }

  static ManifoldSpec product(const std::vector<ManifoldSpec>& factors) {
    if (factors.empty()) throw ConfigError("product manifold needs at least one factor");
    ManifoldSpec s;
    s.kind_ = ManifoldKind::Product;
    s.dim_ = 0;
    Index offset = 0;
    for (const auto& f : factors) {
      if (f.kind_ == ManifoldKind::Product) throw ConfigError("product factors cannot be products");
      const Index n = f.ambient_dim();
      s.layout_.push_back({f.kind_, f.dim_, offset, n});
      s.factors_.push_back(f);
      offset += n;
      s.dim_ += f.dim_;
    }
    s.ambient_ = offset;
    return s;
  }

  // Accepts "lorentz:32", "sphere:8", "euclidean:4", "product:lorentz:16+sphere:16".
  // Names are case-insensitive; surrounding whitespace is ignored.
  static ManifoldSpec parse(std::string_view text) {
    std::string s;
    for (char c : text) {
      if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (s.rfind("product:", 0) == 0) {
      std::vector<ManifoldSpec> parts;
      std::string_view rest = std::string_view(s).substr(8);
      while (true) {
        const auto plus = rest.find('+');
        parts.push_back(parse_simple(rest.substr(0, plus), text));
        if (plus == std::string_view::npos) break;
        rest = rest.substr(plus + 1);
      }
      return product(parts);
    }
    return parse_simple(s, text);
  }

  [[nodiscard]] std::string to_string() const {
    if (kind_ != ManifoldKind::Product) return std::string(kind_name(kind_)) + ":" + std::to_string(dim_);
    std::string out = "product:";
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (i) out += "+";
      out += factors_[i].to_string();
    }
    return out;
  }

  [[nodiscard]] ManifoldKind kind() const { return kind_; }
  [[nodiscard]] int intrinsic_dim() const { return dim_; }
  [[nodiscard]] Index ambient_dim() const { return ambient_; }
  [[nodiscard]] const std::vector<ManifoldSpec>& factors() const { return factors_; }
  // Flat factor list; a non-product spec is its own single factor.
  [[nodiscard]] const std::vector<Factor>& layout() const { return layout_; }

  [[nodiscard]] double curvature() const {
    switch (kind_) {
      case ManifoldKind::Lorentz: return -1.0;
      case ManifoldKind::Sphere: return 1.0;
      default: return 0.0;
    }
  }

  friend bool operator==(const ManifoldSpec& a, const ManifoldSpec& b) { return a.to_string() == b.to_string(); }

 private:
  ManifoldSpec() = default;

  static ManifoldSpec simple(ManifoldKind kind, int dim) {
    if (dim < 1) throw ConfigError("manifold dimension must be positive, got " + std::to_string(dim));
    ManifoldSpec s;
    s.kind_ = kind;
    s.dim_ = dim;
    s.ambient_ = kind == ManifoldKind::Euclidean ? dim : dim + 1;
    s.layout_.push_back({kind, dim, 0, s.ambient_});
    return s;
  }

  static ManifoldSpec parse_simple(std::string_view s, std::string_view original) {
    const auto colon = s.find(':');
    auto fail = [&] { return ParseError("invalid manifold spec '" + std::string(original) + "'"); };
    if (colon == std::string_view::npos) throw fail();
    const auto name = s.substr(0, colon);
    const auto digits = s.substr(colon + 1);
    if (digits.empty() || digits.size() > 9 ||
        !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw fail();
    const int dim = std::stoi(std::string(digits));
    if (dim < 1) throw fail();
    if (name == "lorentz") return lorentz(dim);
    if (name == "sphere") return sphere(dim);
    if (name == "euclidean") return euclidean(dim);
    throw fail();
  }

  ManifoldKind kind_ = ManifoldKind::Euclidean;
  int dim_ = 0;
  Index ambient_ = 0;
  std::vector<ManifoldSpec> factors_;
  std::vector<Factor> layout_;
};

namespace detail {

template <class S>
inline constexpr S kSeriesCutoff = S(1e-4);
// The cubic coefficients below lose digits to cancellation roughly like
// eps / t^2, so they switch to their series much earlier.
template <class S>
inline constexpr S kCubicCutoff = S(0.05);
template <class S>
inline constexpr S kBoundarySlack = S(1e-9);

// sinh(t)/t
template <class S>
S sinhc(S t) {
  if (std::abs(t) < kSeriesCutoff<S>) {
    const S t2 = t * t;
    return S(1) + t2 / S(6) + t2 * t2 / S(120);
  }
  return std::sinh(t) / t;
}

// sin(t)/t
template <class S>
S sinc(S t) {
  if (std::abs(t) < kSeriesCutoff<S>) {
    const S t2 = t * t;
    return S(1) - t2 / S(6) + t2 * t2 / S(120);
  }
  return std::sin(t) / t;
}

// (t cosh t - sinh t) / t^3
template <class S>
S lorentz_exp_coeff(S t) {
  if (std::abs(t) < kCubicCutoff<S>) {
    const S t2 = t * t;
    return S(1) / S(3) + t2 / S(30) + t2 * t2 / S(840) + t2 * t2 * t2 / S(45360);
  }
  return (t * std::cosh(t) - std::sinh(t)) / (t * t * t);
}

// (t cos t - sin t) / t^3
template <class S>
S sphere_exp_coeff(S t) {
  if (std::abs(t) < kCubicCutoff<S>) {
    const S t2 = t * t;
    return -S(1) / S(3) + t2 / S(30) - t2 * t2 / S(840) + t2 * t2 * t2 / S(45360);
  }
  return (t * std::cos(t) - std::sin(t)) / (t * t * t);
}

// t / sinh t
template <class S>
S inv_sinhc(S t) {
  if (std::abs(t) < kSeriesCutoff<S>) {
    const S t2 = t * t;
    return S(1) - t2 / S(6) + S(7) * t2 * t2 / S(360);
  }
  return t / std::sinh(t);
}

// t / sin t
template <class S>
S inv_sinc(S t) {
  if (std::abs(t) < kSeriesCutoff<S>) {
    const S t2 = t * t;
    return S(1) + t2 / S(6) + S(7) * t2 * t2 / S(360);
  }
  return t / std::sin(t);
}

// (t cosh t - sinh t) / sinh^3 t : derivative of t/sinh t w.r.t. -cosh t
template <class S>
S lorentz_log_coeff(S t) {
  if (std::abs(t) < kCubicCutoff<S>) {
    const S t2 = t * t;
    return S(1) / S(3) - S(2) * t2 / S(15) + S(2) * t2 * t2 / S(63) - S(4) * t2 * t2 * t2 / S(675);
  }
  const S sh = std::sinh(t);
  return (t * std::cosh(t) - sh) / (sh * sh * sh);
}

// (t cos t - sin t) / sin^3 t : derivative of t/sin t w.r.t. cos t
template <class S>
S sphere_log_coeff(S t) {
  if (std::abs(t) < kCubicCutoff<S>) {
    const S t2 = t * t;
    return -S(1) / S(3) - S(2) * t2 / S(15) - S(2) * t2 * t2 / S(63) - S(4) * t2 * t2 * t2 / S(675);
  }
  const S sn = std::sin(t);
  return (t * std::cos(t) - sn) / (sn * sn * sn);
}

// Minkowski signature flip: [-v0, v1, ..., vd].
template <class S>
Vec<S> flip0(const Vec<S>& v) {
  Vec<S> out = v;
  out(0) = -out(0);
  return out;
}

template <class S>
S lorentz_inner(const Vec<S>& u, const Vec<S>& v) {
  return -u(0) * v(0) + u.tail(u.size() - 1).dot(v.tail(v.size() - 1));
}

// Tangent vectors on the hyperboloid are space-like, so <v,v>_L >= 0 up to rounding.
template <class S>
S lorentz_norm(const Vec<S>& v) {
  return std::sqrt(std::max(lorentz_inner(v, v), S(0)));
}

// -<z,x>_L clamped to [1, inf) when within slack of the boundary.
template <class S>
S lorentz_cosh_dist(const Vec<S>& z, const Vec<S>& x) {
  const S a = -lorentz_inner(z, x);
  const S scale = std::max(S(1), std::abs(z(0) * x(0)));
  if (a < S(1) - kBoundarySlack<S> * scale)
    throw DomainError("points are not on a common hyperboloid (-<z,x>_L = " + std::to_string(double(a)) + " < 1)");
  return std::max(a, S(1));
}

template <class S>
S sphere_cos_dist(const Vec<S>& z, const Vec<S>& x) {
  const S a = z.dot(x);
  if (a > S(1) + kBoundarySlack<S> || a < -S(1) - kBoundarySlack<S>)
    throw DomainError("points are not on the unit sphere (<z,x> = " + std::to_string(double(a)) + ")");
  return std::clamp(a, -S(1), S(1));
}

template <class S>
void require_same_size(const Vec<S>& a, const Vec<S>& b, Index n, const char* what) {
  if (a.size() != n || b.size() != n)
    throw DimensionError(std::string(what) + ": expected ambient dimension " + std::to_string(n) + ", got " +
                         std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

template <class S>
void require_finite(const Vec<S>& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

template <class S>
Vec<S> factor_proj(ManifoldKind kind, const Vec<S>& z, const Vec<S>& u) {
  switch (kind) {
    case ManifoldKind::Lorentz: return u + lorentz_inner(z, u) * z;
    case ManifoldKind::Sphere: return u - z.dot(u) * z;
    default: return u;
  }
}

// Closed-form exponential map without renormalization.
template <class S>
Vec<S> factor_exp_closed_form(ManifoldKind kind, const Vec<S>& z, const Vec<S>& v) {
  switch (kind) {
    case ManifoldKind::Lorentz: {
      const S t = lorentz_norm(v);
      return std::cosh(t) * z + sinhc(t) * v;
    }
    case ManifoldKind::Sphere: {
      const S t = v.norm();
      return std::cos(t) * z + sinc(t) * v;
    }
    default: return z + v;
  }
}

template <class S>
Vec<S> factor_renormalize(ManifoldKind kind, Vec<S> y) {
  switch (kind) {
    case ManifoldKind::Lorentz: {
      const S r = -lorentz_inner(y, y);
      if (!(r > S(0)) || !(y(0) > S(0))) throw NumericError("exp_map left the hyperboloid");
      return y / std::sqrt(r);
    }
    case ManifoldKind::Sphere: {
      const S r = y.norm();
      if (!(r > S(0))) throw NumericError("exp_map collapsed to zero on the sphere");
      return y / r;
    }
    default: return y;
  }
}

template <class S>
Vec<S> factor_log(ManifoldKind kind, const Vec<S>& z, const Vec<S>& x) {
  switch (kind) {
    case ManifoldKind::Lorentz: {
      const S alpha = lorentz_inner(z, x);
      const S theta = std::acosh(lorentz_cosh_dist(z, x));
      return inv_sinhc(theta) * (x + alpha * z);
    }
    case ManifoldKind::Sphere: {
      const S alpha = sphere_cos_dist(z, x);
      if (alpha <= -S(1) + kBoundarySlack<S>) throw DomainError("log_map undefined for antipodal points");
      const S theta = std::acos(alpha);
      return inv_sinc(theta) * (x - z.dot(x) * z);
    }
    default: return x - z;
  }
}

template <class S>
S factor_distance(ManifoldKind kind, const Vec<S>& x, const Vec<S>& y) {
  switch (kind) {
    case ManifoldKind::Lorentz: return x == y ? S(0) : std::acosh(lorentz_cosh_dist(x, y));
    case ManifoldKind::Sphere: return x == y ? S(0) : std::acos(sphere_cos_dist(x, y));
    default: return (x - y).norm();
  }
}

template <class S>
Mat<S> factor_jac_exp_v(ManifoldKind kind, const Vec<S>& z, const Vec<S>& v) {
  const Index n = z.size();
  const Mat<S> eye = Mat<S>::Identity(n, n);
  switch (kind) {
    case ManifoldKind::Lorentz: {
      const S t = lorentz_norm(v);
      const Vec<S> vh = flip0(v);
      return lorentz_exp_coeff(t) * v * vh.transpose() + sinhc(t) * (eye + z * vh.transpose());
    }
    case ManifoldKind::Sphere: {
      const S t = v.norm();
      return sphere_exp_coeff(t) * v * v.transpose() + sinc(t) * (eye - z * v.transpose());
    }
    default: return eye;
  }
}

template <class S>
S factor_jac_exp_z_scale(ManifoldKind kind, const Vec<S>& v) {
  switch (kind) {
    case ManifoldKind::Lorentz: return std::cosh(lorentz_norm(v));
    case ManifoldKind::Sphere: return std::cos(v.norm());
    default: return S(1);
  }
}

template <class S>
Mat<S> factor_jac_log(ManifoldKind kind, const Vec<S>& z, const Vec<S>& x) {
  const Index n = z.size();
  const Mat<S> eye = Mat<S>::Identity(n, n);
  switch (kind) {
    case ManifoldKind::Lorentz: {
      const S alpha = lorentz_inner(z, x);
      const S theta = std::acosh(lorentz_cosh_dist(z, x));
      const Vec<S> zh = flip0(z);
      const Vec<S> u = x + alpha * z;
      return inv_sinhc(theta) * (eye + z * zh.transpose()) + lorentz_log_coeff(theta) * u * zh.transpose();
    }
    case ManifoldKind::Sphere: {
      const S alpha = sphere_cos_dist(z, x);
      if (alpha <= -S(1) + kBoundarySlack<S>) throw DomainError("log_map undefined for antipodal points");
      const S theta = std::acos(alpha);
      const Vec<S> u = x - z.dot(x) * z;
      return inv_sinc(theta) * (eye - z * z.transpose()) + sphere_log_coeff(theta) * u * z.transpose();
    }
    default: return eye;
  }
}

// Gradient of distance(x, y) w.r.t. x for one factor. Zero where the distance
// is zero (the distance itself is not differentiable there).
template <class S>
Vec<S> factor_distance_grad(ManifoldKind kind, const Vec<S>& x, const Vec<S>& y, S dist) {
  if (dist == S(0)) return Vec<S>::Zero(x.size());
  switch (kind) {
    case ManifoldKind::Lorentz: return -flip0(y) / std::sinh(dist);
    case ManifoldKind::Sphere: return -y / std::sin(dist);
    default: return (x - y) / dist;
  }
}

// Gradient of distance(x, y)^2 w.r.t. x for one factor; smooth at x = y.
template <class S>
Vec<S> factor_distance_sq_grad(ManifoldKind kind, const Vec<S>& x, const Vec<S>& y, S dist) {
  switch (kind) {
    case ManifoldKind::Lorentz: return -S(2) * inv_sinhc(dist) * flip0(y);
    case ManifoldKind::Sphere: return -S(2) * inv_sinc(dist) * y;
    default: return S(2) * (x - y);
  }
}

template <class S, class F>
Vec<S> map_factors2(const ManifoldSpec& spec, const Vec<S>& a, const Vec<S>& b, F&& f) {
  Vec<S> out(spec.ambient_dim());
  for (const auto& fac : spec.layout()) {
    const Vec<S> sa = a.segment(fac.offset, fac.size);
    const Vec<S> sb = b.segment(fac.offset, fac.size);
    out.segment(fac.offset, fac.size) = f(fac.kind, sa, sb);
  }
  return out;
}

template <class S, class F>
Mat<S> block_diag(const ManifoldSpec& spec, const Vec<S>& a, const Vec<S>& b, F&& f) {
  const Index n = spec.ambient_dim();
  Mat<S> out = Mat<S>::Zero(n, n);
  for (const auto& fac : spec.layout()) {
    const Vec<S> sa = a.segment(fac.offset, fac.size);
    const Vec<S> sb = b.segment(fac.offset, fac.size);
    out.block(fac.offset, fac.offset, fac.size, fac.size) = f(fac.kind, sa, sb);
  }
  return out;
}

}  // namespace detail

template <class S>
S minkowski_inner(const Vec<S>& u, const Vec<S>& v) {
  if (u.size() != v.size() || u.size() < 2)
    throw DimensionError("minkowski_inner: need equal lengths >= 2, got " + std::to_string(u.size()) + " and " +
                         std::to_string(v.size()));
  return detail::lorentz_inner(u, v);
}

template <class S = double>
Vec<S> origin(const ManifoldSpec& spec) {
  Vec<S> o = Vec<S>::Zero(spec.ambient_dim());
  for (const auto& f : spec.layout()) {
    if (f.kind == ManifoldKind::Lorentz) o(f.offset) = S(1);
    if (f.kind == ManifoldKind::Sphere) o(f.offset) = S(-1);  // south pole
  }
  return o;
}

template <class S>
Vec<S> proj_tangent(const ManifoldSpec& spec, const Vec<S>& z, const Vec<S>& u) {
  detail::require_same_size(z, u, spec.ambient_dim(), "proj_tangent");
  return detail::map_factors2(spec, z, u, [](ManifoldKind k, const Vec<S>& a, const Vec<S>& b) {
    return detail::factor_proj(k, a, b);
  });
}

// Closed-form exponential map with no drift correction; this is the function
// whose ambient Jacobians are returned below.
template <class S>
Vec<S> exp_map_closed_form(const ManifoldSpec& spec, const Vec<S>& z, const Vec<S>& v) {
  detail::require_same_size(z, v, spec.ambient_dim(), "exp_map");
  detail::require_finite(v, "exp_map");
  return detail::map_factors2(spec, z, v, [](ManifoldKind k, const Vec<S>& a, const Vec<S>& b) {
    return detail::factor_exp_closed_form(k, a, b);
  });
}

// Exponential map followed by renormalization onto the manifold. A zero step
// returns z untouched.
template <class S>
Vec<S> exp_map(const ManifoldSpec& spec, const Vec<S>& z, const Vec<S>& v) {
  detail::require_same_size(z, v, spec.ambient_dim(), "exp_map");
  detail::require_finite(v, "exp_map");
  return detail::map_factors2(spec, z, v, [](ManifoldKind k, const Vec<S>& a, const Vec<S>& b) -> Vec<S> {
    if ((b.array() == S(0)).all()) return a;
    return detail::factor_renormalize(k, detail::factor_exp_closed_form(k, a, b));
  });
}

template <class S>
Vec<S> log_map(const ManifoldSpec& spec, const Vec<S>& z, const Vec<S>& x) {
  detail::require_same_size(z, x, spec.ambient_dim(), "log_map");
  detail::require_finite(x, "log_map");
  return detail::map_factors2(spec, z, x, [](ManifoldKind k, const Vec<S>& a, const Vec<S>& b) {
    return detail::factor_log(k, a, b);
  });
}

// Geodesic distance; on products the sum of factor distances.
template <class S>
S distance(const ManifoldSpec& spec, const Vec<S>& x, const Vec<S>& y) {
  detail::require_same_size(x, y, spec.ambient_dim(), "distance");
  S total = S(0);
  for (const auto& f : spec.layout()) {
    const Vec<S> a = x.segment(f.offset, f.size);
    const Vec<S> b = y.segment(f.offset, f.size);
    total += detail::factor_distance(f.kind, a, b);
  }
  return total;
}

// Ambient gradient of distance(x, y)^2 with respect to x.
template <class S>
Vec<S> distance_sq_grad(const ManifoldSpec& spec, const Vec<S>& x, const Vec<S>& y) {
  detail::require_same_size(x, y, spec.ambient_dim(), "distance_sq_grad");
  const auto& layout = spec.layout();
  Vec<S> g(spec.ambient_dim());
  if (layout.size() == 1) {
    const S d = detail::factor_distance(layout[0].kind, x, y);
    return detail::factor_distance_sq_grad(layout[0].kind, x, y, d);
  }
  S total = S(0);
  std::vector<S> dists;
  for (const auto& f : layout) {
    const Vec<S> a = x.segment(f.offset, f.size);
    const Vec<S> b = y.segment(f.offset, f.size);
    dists.push_back(detail::factor_distance(f.kind, a, b));
    total += dists.back();
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& f = layout[i];
    const Vec<S> a = x.segment(f.offset, f.size);
    const Vec<S> b = y.segment(f.offset, f.size);
    g.segment(f.offset, f.size) = S(2) * total * detail::factor_distance_grad(f.kind, a, b, dists[i]);
  }
  return g;
}

// d/dv Exp_z(v) at v.
template <class S>
Mat<S> jacobian_exp_wrt_v(const ManifoldSpec& spec, const Vec<S>& z, const Vec<S>& v) {
  detail::require_same_size(z, v, spec.ambient_dim(), "jacobian_exp_wrt_v");
  return detail::block_diag(spec, z, v, [](ManifoldKind k, const Vec<S>& a, const Vec<S>& b) {
    return detail::factor_jac_exp_v(k, a, b);
  });
}

// d/dz Exp_z(v) with v held fixed: a per-factor multiple of the identity.
template <class S>
Mat<S> jacobian_exp_wrt_z(const ManifoldSpec& spec, const Vec<S>& z, const Vec<S>& v) {
  detail::require_same_size(z, v, spec.ambient_dim(), "jacobian_exp_wrt_z");
  return detail::block_diag(spec, z, v, [](ManifoldKind k, const Vec<S>& a, const Vec<S>& b) {
    const Index n = a.size();
    return Mat<S>(detail::factor_jac_exp_z_scale(k, b) * Mat<S>::Identity(n, n));
  });
}

// d/dx Log_z(x).
template <class S>
Mat<S> jacobian_log(const ManifoldSpec& spec, const Vec<S>& z, const Vec<S>& x) {
  detail::require_same_size(z, x, spec.ambient_dim(), "jacobian_log");
  return detail::block_diag(spec, z, x, [](ManifoldKind k, const Vec<S>& a, const Vec<S>& b) {
    return detail::factor_jac_log(k, a, b);
  });
}

// d/du Proj_z(u). Independent of u.
template <class S>
Mat<S> proj_jacobian_wrt_u(const ManifoldSpec& spec, const Vec<S>& z) {
  const Index n = spec.ambient_dim();
  if (z.size() != n) throw DimensionError("proj_jacobian_wrt_u: dimension mismatch");
  return detail::block_diag(spec, z, z, [](ManifoldKind k, const Vec<S>& a, const Vec<S>&) {
    const Index m = a.size();
    const Mat<S> eye = Mat<S>::Identity(m, m);
    switch (k) {
      case ManifoldKind::Lorentz: return Mat<S>(eye + a * detail::flip0(a).transpose());
      case ManifoldKind::Sphere: return Mat<S>(eye - a * a.transpose());
      default: return eye;
    }
  });
}

// d/dz Proj_z(u) with u held fixed.
template <class S>
Mat<S> proj_jacobian_wrt_z(const ManifoldSpec& spec, const Vec<S>& z, const Vec<S>& u) {
  detail::require_same_size(z, u, spec.ambient_dim(), "proj_jacobian_wrt_z");
  return detail::block_diag(spec, z, u, [](ManifoldKind k, const Vec<S>& a, const Vec<S>& b) {
    const Index m = a.size();
    const Mat<S> eye = Mat<S>::Identity(m, m);
    switch (k) {
      case ManifoldKind::Lorentz:
        return Mat<S>(detail::lorentz_inner(a, b) * eye + a * detail::flip0(b).transpose());
      case ManifoldKind::Sphere: return Mat<S>(-a.dot(b) * eye - a * b.transpose());
      default: return Mat<S>(Mat<S>::Zero(m, m));
    }
  });
}

// Largest violation of the point constraint over factors; +inf for a Lorentz
// factor on the lower sheet.
template <class S>
S point_violation(const ManifoldSpec& spec, const Vec<S>& z) {
  if (z.size() != spec.ambient_dim()) throw DimensionError("point_violation: dimension mismatch");
  S worst = S(0);
  for (const auto& f : spec.layout()) {
    const Vec<S> a = z.segment(f.offset, f.size);
    switch (f.kind) {
      case ManifoldKind::Lorentz:
        if (!(a(0) > S(0))) return std::numeric_limits<S>::infinity();
        worst = std::max(worst, std::abs(detail::lorentz_inner(a, a) + S(1)));
        break;
      case ManifoldKind::Sphere: worst = std::max(worst, std::abs(a.squaredNorm() - S(1))); break;
      default: break;
    }
  }
  return worst;
}

template <class S>
S tangent_violation(const ManifoldSpec& spec, const Vec<S>& z, const Vec<S>& v) {
  detail::require_same_size(z, v, spec.ambient_dim(), "tangent_violation");
  S worst = S(0);
  for (const auto& f : spec.layout()) {
    const Vec<S> a = z.segment(f.offset, f.size);
    const Vec<S> b = v.segment(f.offset, f.size);
    if (f.kind == ManifoldKind::Lorentz) worst = std::max(worst, std::abs(detail::lorentz_inner(a, b)));
    if (f.kind == ManifoldKind::Sphere) worst = std::max(worst, std::abs(a.dot(b)));
  }
  return worst;
}

inline constexpr double kPointTolerance = 1e-9;

template <class S>
void check_point(const ManifoldSpec& spec, const Vec<S>& z, S tol = S(kPointTolerance)) {
  const S err = point_violation(spec, z);
  if (!(err <= tol))
    throw DomainError("point is off " + spec.to_string() + " (violation " + std::to_string(double(err)) + ")");
}

}  // namespace msg
