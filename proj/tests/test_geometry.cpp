#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "msg/geometry.hpp"
#include "oracles.hpp"

namespace msg {
namespace {

using test::fd_jacobian;
using test::max_rel_error;
using test::random_point;
using test::random_tangent;

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

TEST(ManifoldSpec, AmbientDimensions) {
  EXPECT_EQ(ManifoldSpec::lorentz(32).ambient_dim(), 33);
  EXPECT_EQ(ManifoldSpec::sphere(8).ambient_dim(), 9);
  EXPECT_EQ(ManifoldSpec::euclidean(4).ambient_dim(), 4);
  const auto p = ManifoldSpec::parse("product:lorentz:16+sphere:16");
  EXPECT_EQ(p.kind(), ManifoldKind::Product);
  EXPECT_EQ(p.factors().size(), 2u);
  EXPECT_EQ(p.ambient_dim(), 34);
  EXPECT_EQ(p.intrinsic_dim(), 32);
  EXPECT_EQ(p.layout()[1].offset, 17);
}

TEST(ManifoldSpec, ParseCanonicalRoundTrip) {
  for (const char* s : {"lorentz:32", "sphere:1", "euclidean:7", "product:lorentz:16+sphere:16",
                        "product:euclidean:2+lorentz:3+sphere:4"}) {
    EXPECT_EQ(ManifoldSpec::parse(s).to_string(), s);
  }
  EXPECT_EQ(ManifoldSpec::parse("  Lorentz:8 ").to_string(), "lorentz:8");
  EXPECT_EQ(ManifoldSpec::parse("PRODUCT:Sphere:2+Euclidean:3").to_string(), "product:sphere:2+euclidean:3");
}

TEST(ManifoldSpec, ParseRejectsMalformed) {
  for (const char* s : {"", "lorentz", "lorentz:", "lorentz:0", "lorentz:-3", "torus:3", "sphere:2x",
                        "product:", "product:lorentz:2+", "product:product:lorentz:2"}) {
    EXPECT_THROW(ManifoldSpec::parse(s), Error) << s;
  }
}

TEST(ManifoldSpec, Curvature) {
  EXPECT_EQ(ManifoldSpec::lorentz(2).curvature(), -1.0);
  EXPECT_EQ(ManifoldSpec::sphere(2).curvature(), 1.0);
  EXPECT_EQ(ManifoldSpec::euclidean(2).curvature(), 0.0);
}

TEST(MinkowskiInner, Examples) {
  EXPECT_EQ(minkowski_inner(vec({1, 0, 0}), vec({1, 0, 0})), -1.0);
  EXPECT_EQ(minkowski_inner(vec({2, 1}), vec({3, 2})), -4.0);
  CounterRng rng(11);
  for (int k = 0; k < 100; ++k) {
    const Vector u = test::gaussian(5, rng);
    EXPECT_NEAR(minkowski_inner(u, u), u.tail(4).squaredNorm() - u(0) * u(0), 1e-12);
  }
  EXPECT_THROW(minkowski_inner(vec({1, 2}), vec({1, 2, 3})), DimensionError);
  EXPECT_THROW(minkowski_inner(vec({1}), vec({1})), DimensionError);
}

TEST(Origin, Examples) {
  EXPECT_EQ(origin(ManifoldSpec::sphere(2)), vec({-1, 0, 0}));
  EXPECT_EQ(origin(ManifoldSpec::lorentz(2)), vec({1, 0, 0}));
  EXPECT_EQ(origin(ManifoldSpec::euclidean(3)), vec({0, 0, 0}));
  EXPECT_EQ(origin(ManifoldSpec::parse("product:lorentz:1+sphere:1")), vec({1, 0, -1, 0}));
}

TEST(ProjTangent, Examples) {
  const auto spec = ManifoldSpec::lorentz(1);
  EXPECT_EQ(proj_tangent(spec, vec({1, 0}), vec({5, 3})), vec({0, 3}));
  EXPECT_THROW(proj_tangent(spec, vec({1, 0}), vec({5, 3, 1})), DimensionError);
}

TEST(ProjTangent, TangencyAndIdempotence) {
  CounterRng rng(12);
  for (const auto& spec : test::simple_specs(6)) {
    for (int k = 0; k < 1000; ++k) {
      const Vector z = random_point(spec, rng);
      const Vector u = test::gaussian(spec.ambient_dim(), rng);
      const Vector v = proj_tangent(spec, z, u);
      EXPECT_LT(tangent_violation(spec, z, v), 1e-12 * std::max(1.0, z.squaredNorm() * u.norm()));
      EXPECT_LT((proj_tangent(spec, z, v) - v).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, v.norm() * z.squaredNorm()));
    }
  }
}

TEST(ExpMap, Examples) {
  const auto lor = ManifoldSpec::lorentz(1);
  const double t = 0.7;
  const Vector y = exp_map(lor, vec({1, 0}), vec({0, t}));
  EXPECT_NEAR(y(0), std::cosh(t), 1e-15);
  EXPECT_NEAR(y(1), std::sinh(t), 1e-15);

  const auto sph = ManifoldSpec::sphere(1);
  const Vector s = exp_map(sph, vec({-1, 0}), vec({0, std::numbers::pi / 2}));
  EXPECT_NEAR(s(0), 0.0, 1e-15);
  EXPECT_NEAR(s(1), 1.0, 1e-15);
  EXPECT_NEAR(s.squaredNorm(), 1.0, 1e-15);

  CounterRng rng(13);
  for (const auto& spec : test::simple_specs(4)) {
    const Vector z = random_point(spec, rng);
    EXPECT_EQ(exp_map(spec, z, Vector(Vector::Zero(spec.ambient_dim()))), z);
  }
}

TEST(ExpMap, RejectsNonFinite) {
  const auto spec = ManifoldSpec::lorentz(2);
  Vector v = Vector::Zero(3);
  v(1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(exp_map(spec, origin(spec), v), NumericError);
  v(1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(exp_map(spec, origin(spec), v), NumericError);
}

TEST(ExpMap, OutputOnManifold) {
  CounterRng rng(14);
  for (int d : {2, 8, 32}) {
    for (const auto& spec : test::simple_specs(d)) {
      for (int k = 0; k < 200; ++k) {
        const Vector z = random_point(spec, rng);
        const Vector v = random_tangent(spec, z, rng, 0.0, 5.0);
        EXPECT_LT(point_violation(spec, exp_map(spec, z, v)), 1e-9);
      }
    }
  }
}

TEST(LogMap, Examples) {
  const auto lor = ManifoldSpec::lorentz(1);
  const Vector z = vec({1, 0});
  const Vector lz = log_map(lor, z, z);
  EXPECT_EQ(lz.cwiseAbs().maxCoeff(), 0.0);
  const Vector l1 = log_map(lor, z, vec({std::cosh(1.0), std::sinh(1.0)}));
  EXPECT_NEAR(l1(0), 0.0, 1e-15);
  EXPECT_NEAR(l1(1), 1.0, 1e-14);
}

TEST(LogMap, DomainErrors) {
  const auto sph = ManifoldSpec::sphere(2);
  const Vector z = origin(sph);
  EXPECT_THROW(log_map(sph, z, Vector(-z)), DomainError);
  const auto lor = ManifoldSpec::lorentz(2);
  // <z, x>_L > -1: x is not on the hyperboloid.
  EXPECT_THROW(log_map(lor, origin(lor), vec({0.5, 0.1, 0})), DomainError);
}

TEST(LogMap, RoundTrip) {
  CounterRng rng(15);
  for (int d : {2, 8, 32}) {
    for (const auto& spec : test::simple_specs(d)) {
      double worst = 0.0;
      for (int k = 0; k < 1000; ++k) {
        const Vector z = random_point(spec, rng);
        const Vector v = random_tangent(spec, z, rng, 0.0, 5.0);
        worst = std::max(worst, (log_map(spec, z, exp_map(spec, z, v)) - v).cwiseAbs().maxCoeff());
      }
      EXPECT_LT(worst, 1e-6) << spec.to_string();
    }
  }
}

TEST(Distance, Examples) {
  const auto lor = ManifoldSpec::lorentz(1);
  const Vector x = vec({std::cosh(1.0), std::sinh(1.0)});
  EXPECT_EQ(distance(lor, x, x), 0.0);
  EXPECT_NEAR(distance(lor, vec({1, 0}), x), 1.0, 1e-12);

  const auto prod = ManifoldSpec::parse("product:lorentz:2+sphere:2");
  CounterRng rng(16);
  const Vector a = random_point(prod, rng), b = random_point(prod, rng);
  const double d1 = distance(ManifoldSpec::lorentz(2), Vector(a.head(3)), Vector(b.head(3)));
  const double d2 = distance(ManifoldSpec::sphere(2), Vector(a.tail(3)), Vector(b.tail(3)));
  EXPECT_EQ(distance(prod, a, b), d1 + d2);
}

TEST(Distance, MetricProperties) {
  CounterRng rng(17);
  for (const auto& spec : test::simple_specs(4)) {
    for (int k = 0; k < 300; ++k) {
      const Vector x = random_point(spec, rng), y = random_point(spec, rng), w = random_point(spec, rng);
      const double dxy = distance(spec, x, y);
      EXPECT_EQ(dxy, distance(spec, y, x));
      EXPECT_GT(dxy, 0.0);
      EXPECT_LE(dxy, distance(spec, x, w) + distance(spec, w, y) + 1e-9);
      EXPECT_EQ(distance(spec, x, x), 0.0);
    }
  }
}

TEST(Distance, EqualsTangentNormAlongGeodesic) {
  CounterRng rng(18);
  for (const auto& spec : {ManifoldSpec::lorentz(5), ManifoldSpec::sphere(5), ManifoldSpec::euclidean(5)}) {
    for (int k = 0; k < 300; ++k) {
      const Vector z = random_point(spec, rng);
      const Vector v = random_tangent(spec, z, rng, 1e-3, 3.0);
      const double norm = spec.kind() == ManifoldKind::Lorentz ? std::sqrt(minkowski_inner(v, v)) : v.norm();
      EXPECT_NEAR(distance(spec, z, exp_map(spec, z, v)), norm, 1e-7 * std::max(1.0, norm)) << spec.to_string();
    }
  }
}

TEST(Distance, OffManifoldRejected) {
  const auto lor = ManifoldSpec::lorentz(2);
  EXPECT_THROW(distance(lor, origin(lor), vec({0.2, 0, 0})), DomainError);
}

TEST(JacobianExpZ, Examples) {
  const auto lor = ManifoldSpec::lorentz(3);
  const Vector o = origin(lor);
  EXPECT_EQ(jacobian_exp_wrt_z(lor, o, Vector(Vector::Zero(4))), Matrix::Identity(4, 4));
  const Vector v = vec({0, 1, 0, 0});
  EXPECT_NEAR((jacobian_exp_wrt_z(lor, o, v) - 1.5430806348152437 * Matrix::Identity(4, 4)).norm(), 0.0, 1e-15);

  const auto sph = ManifoldSpec::sphere(2);
  const Vector s = vec({0, std::numbers::pi, 0});
  EXPECT_NEAR((jacobian_exp_wrt_z(sph, origin(sph), s) + Matrix::Identity(3, 3)).norm(), 0.0, 1e-15);
}

TEST(JacobianExpV, ZeroIsIdentity) {
  for (const auto& spec : test::simple_specs(4)) {
    CounterRng rng(19);
    const Vector z = random_point(spec, rng);
    EXPECT_LT((jacobian_exp_wrt_v(spec, z, Vector(Vector::Zero(spec.ambient_dim()))) -
               Matrix::Identity(spec.ambient_dim(), spec.ambient_dim()))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-15);
  }
}

TEST(JacobianExpV, OneDimensionalLorentz) {
  const auto lor = ManifoldSpec::lorentz(1);
  const Matrix j = jacobian_exp_wrt_v(lor, vec({1, 0}), vec({0, 1}));
  const Vector col = j.col(1);
  EXPECT_NEAR(col(0), std::sinh(1.0), 1e-14);
  EXPECT_NEAR(col(1), std::cosh(1.0), 1e-14);
}

TEST(JacobianExpV, SeriesBranchIsContinuous) {
  // Just above and below each series cutoff the two branches must agree.
  for (const auto& spec : {ManifoldSpec::lorentz(2), ManifoldSpec::sphere(2)}) {
    const Vector o = origin(spec);
    for (double cut : {1e-4, 0.05}) {
      const Matrix below = jacobian_exp_wrt_v(spec, o, vec({0, cut * (1 - 1e-9), 0}));
      const Matrix above = jacobian_exp_wrt_v(spec, o, vec({0, cut * (1 + 1e-9), 0}));
      EXPECT_LT((below - above).cwiseAbs().maxCoeff(), 1e-9) << spec.to_string() << " " << cut;
      const Vector x = exp_map(spec, o, vec({0, cut * (1 + 1e-9), 0}));
      const Vector xb = exp_map(spec, o, vec({0, cut * (1 - 1e-9), 0}));
      EXPECT_LT((jacobian_log(spec, o, x) - jacobian_log(spec, o, xb)).cwiseAbs().maxCoeff(), 1e-7);
    }
  }
}

// Finite-difference oracles over all ambient directions, d in {2, 8, 32}.
class JacobianFd : public ::testing::TestWithParam<int> {};

TEST_P(JacobianFd, ExpWrtVMatchesFiniteDifferences) {
  CounterRng rng(100 + GetParam());
  for (const auto& spec : test::simple_specs(GetParam())) {
    double worst = 0.0;
    for (int k = 0; k < 60; ++k) {
      const Vector z = random_point(spec, rng);
      const Vector v = random_tangent(spec, z, rng, 0.05, 3.0);
      const Matrix fd = fd_jacobian([&](const Vector& w) { return exp_map_closed_form(spec, z, w); }, v);
      worst = std::max(worst, max_rel_error(jacobian_exp_wrt_v(spec, z, v), fd));
    }
    EXPECT_LT(worst, 1e-4) << spec.to_string();
  }
}

TEST_P(JacobianFd, ExpWrtZMatchesFiniteDifferences) {
  CounterRng rng(200 + GetParam());
  for (const auto& spec : test::simple_specs(GetParam())) {
    double worst = 0.0;
    for (int k = 0; k < 60; ++k) {
      const Vector z = random_point(spec, rng);
      const Vector v = random_tangent(spec, z, rng, 0.0, 3.0);
      const Matrix fd = fd_jacobian([&](const Vector& p) { return exp_map_closed_form(spec, p, v); }, z);
      worst = std::max(worst, max_rel_error(jacobian_exp_wrt_z(spec, z, v), fd));
    }
    EXPECT_LT(worst, 1e-4) << spec.to_string();
  }
}

TEST_P(JacobianFd, LogMatchesFiniteDifferences) {
  CounterRng rng(300 + GetParam());
  for (const auto& spec : test::simple_specs(GetParam())) {
    double worst = 0.0;
    for (int k = 0; k < 60; ++k) {
      const Vector z = random_point(spec, rng);
      const Vector x = exp_map(spec, z, random_tangent(spec, z, rng, 0.1, 2.5));
      const Matrix fd = fd_jacobian([&](const Vector& p) { return log_map(spec, z, p); }, x);
      worst = std::max(worst, max_rel_error(jacobian_log(spec, z, x), fd));
    }
    EXPECT_LT(worst, 1e-4) << spec.to_string();
  }
}

INSTANTIATE_TEST_SUITE_P(Dims, JacobianFd, ::testing::Values(2, 8, 32));

TEST(JacobianLog, InverseOfExpNearBase) {
  CounterRng rng(20);
  for (const auto& spec : test::simple_specs(4)) {
    const Vector z = random_point(spec, rng);
    const Index n = spec.ambient_dim();
    const Matrix prod = jacobian_log(spec, z, z) * jacobian_exp_wrt_v(spec, z, Vector(Vector::Zero(n)));
    for (int k = 0; k < 20; ++k) {
      const Vector t = random_tangent(spec, z, rng, 0.1, 1.0);
      EXPECT_LT((prod * t - t).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, z.squaredNorm())) << spec.to_string();
    }
  }
}

TEST(JacobianLog, EuclideanIsIdentity) {
  const auto spec = ManifoldSpec::euclidean(3);
  CounterRng rng(21);
  EXPECT_EQ(jacobian_log(spec, random_point(spec, rng), random_point(spec, rng)), Matrix::Identity(3, 3));
}

TEST(ProjJacobians, MatchFiniteDifferences) {
  CounterRng rng(22);
  for (const auto& spec : test::simple_specs(5)) {
    const Vector z = random_point(spec, rng);
    const Vector u = test::gaussian(spec.ambient_dim(), rng);
    const Matrix fd_u = fd_jacobian([&](const Vector& w) { return proj_tangent(spec, z, w); }, u);
    const Matrix fd_z = fd_jacobian([&](const Vector& p) { return proj_tangent(spec, p, u); }, z);
    EXPECT_LT(max_rel_error(proj_jacobian_wrt_u(spec, z), fd_u), 1e-8);
    if (spec.kind() != ManifoldKind::Euclidean)
      EXPECT_LT(max_rel_error(proj_jacobian_wrt_z(spec, z, u), fd_z), 1e-8);
    else
      EXPECT_EQ(proj_jacobian_wrt_z(spec, z, u).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(DistanceSqGrad, MatchesFiniteDifferences) {
  CounterRng rng(23);
  for (const auto& spec : test::simple_specs(4)) {
    for (int k = 0; k < 30; ++k) {
      const Vector x = random_point(spec, rng), y = random_point(spec, rng);
      const Matrix fd = fd_jacobian(
          [&](const Vector& p) {
            const double d = distance(spec, p, y);
            return Vector(Vector::Constant(1, d * d));
          },
          x);
      EXPECT_LT(max_rel_error(distance_sq_grad(spec, x, y).transpose(), fd), 1e-6) << spec.to_string();
    }
  }
}

TEST(Product, FactorwiseConsistency) {
  const auto lor = ManifoldSpec::lorentz(3);
  const auto sph = ManifoldSpec::sphere(2);
  const auto prod = ManifoldSpec::product({lor, sph});
  CounterRng rng(24);
  for (int k = 0; k < 50; ++k) {
    const Vector a = random_point(lor, rng), b = random_point(sph, rng);
    const Vector va = random_tangent(lor, a, rng, 0.0, 2.0), vb = random_tangent(sph, b, rng, 0.0, 2.0);
    Vector z(7), v(7);
    z << a, b;
    v << va, vb;
    Vector expect(7);
    expect << exp_map(lor, a, va), exp_map(sph, b, vb);
    EXPECT_EQ(exp_map(prod, z, v), expect);
    Vector loge(7);
    const Vector x = exp_map(prod, z, v);
    loge << log_map(lor, a, Vector(x.head(4))), log_map(sph, b, Vector(x.tail(3)));
    EXPECT_EQ(log_map(prod, z, x), loge);
    Matrix jv = Matrix::Zero(7, 7);
    jv.topLeftCorner(4, 4) = jacobian_exp_wrt_v(lor, a, va);
    jv.bottomRightCorner(3, 3) = jacobian_exp_wrt_v(sph, b, vb);
    EXPECT_EQ(jacobian_exp_wrt_v(prod, z, v), jv);
    Vector pe(7);
    pe << proj_tangent(lor, a, Vector(v.head(4) * 2.0)), proj_tangent(sph, b, Vector(v.tail(3) * 2.0));
    EXPECT_EQ(proj_tangent(prod, z, Vector(v * 2.0)), pe);
  }
}

TEST(Renormalization, DeepStackStaysOnManifold) {
  CounterRng rng(25);
  for (const auto& spec : {ManifoldSpec::lorentz(8), ManifoldSpec::sphere(8)}) {
    Vector z = origin(spec);
    for (int k = 0; k < 1000; ++k) z = exp_map(spec, z, random_tangent(spec, z, rng, 0.0, 0.2));
    EXPECT_LT(point_violation(spec, z), 1e-9);
  }
}

}  // namespace
}  // namespace msg
