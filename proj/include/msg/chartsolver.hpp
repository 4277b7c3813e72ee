#pragma once

// Dynamic chart solver for manifold ODEs dz/dt = u(z, t).
//
// Each step recenters a chart at the current point via Log_z, takes a first
// order step in that chart (where D Log_z at the center is the identity on the
// tangent space) and maps back with Exp_z:
//
//   z <- Exp_z(h * u(z, tau)),  h = t_end / K.
//
// One such step with a field that is constant over the step is exactly one
// manifold spiking layer update.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "msg/error.hpp"
#include "msg/geometry.hpp"

namespace msg {

using VectorField = std::function<Vector(const Vector& z, double t)>;

inline constexpr double kFieldTangentTolerance = 1e-9;
inline constexpr double kTrajectoryTolerance = 1e-8;

// Records every intermediate point when `trajectory` is non-null (K + 1 entries).
inline Vector dynamic_chart_solve(const ManifoldSpec& spec, const VectorField& field, const Vector& z0, double t_end,
                                  int num_charts, std::vector<Vector>* trajectory = nullptr) {
  if (num_charts < 1) throw ConfigError("dynamic_chart_solve: need at least one chart");
  if (!(t_end > 0.0)) throw ConfigError("dynamic_chart_solve: t_end must be positive");
  check_point(spec, z0);
  const double h = t_end / num_charts;
  Vector z = z0;
  if (trajectory) {
    trajectory->clear();
    trajectory->push_back(z);
  }
  for (int k = 0; k < num_charts; ++k) {
    const double tau = k * h;
    const Vector u = field(z, tau);
    if (u.size() != z.size()) throw ContractError("vector field returned the wrong dimension");
    const double scale = std::max(1.0, u.norm());
    if (tangent_violation(spec, z, u) > kFieldTangentTolerance * scale)
      throw ContractError("vector field returned a non-tangent vector at step " + std::to_string(k));
    const Vector step = h * u;
    z = exp_map(spec, z, step);
    if (point_violation(spec, z) > kTrajectoryTolerance)
      throw NumericError("chart solver drifted off the manifold at step " + std::to_string(k));
    if (trajectory) trajectory->push_back(z);
  }
  return z;
}

// Field u(z) = Proj_z(c) for a fixed ambient direction c.
inline VectorField projected_constant_field(const ManifoldSpec& spec, Vector c) {
  return [spec, c = std::move(c)](const Vector& z, double) { return proj_tangent(spec, z, c); };
}

struct ConvergenceStudy {
  std::vector<int> charts;
  std::vector<double> errors;  // endpoint distance to the reference solution
  double slope = 0.0;          // least-squares slope of log(error) vs log(K)
};

// Endpoint error against a fine reference for each K, plus the log-log slope.
inline ConvergenceStudy convergence_study(const ManifoldSpec& spec, const VectorField& field, const Vector& z0,
                                          double t_end, const std::vector<int>& charts, int reference_charts) {
  const Vector ref = dynamic_chart_solve(spec, field, z0, t_end, reference_charts);
  ConvergenceStudy s;
  s.charts = charts;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k : charts) {
    const Vector end = dynamic_chart_solve(spec, field, z0, t_end, k);
    const double err = (end - ref).norm();
    s.errors.push_back(err);
    const double x = std::log(static_cast<double>(k));
    const double y = std::log(err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(charts.size());
  s.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return s;
}

}  // namespace msg
