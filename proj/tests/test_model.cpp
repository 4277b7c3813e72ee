#include <gtest/gtest.h>

#include <cmath>

#include "msg/model.hpp"
#include "msg/synthetic.hpp"
#include "oracles.hpp"

namespace msg {
namespace {

ModelConfig config(const ManifoldSpec& spec, int layers, int t, double eps = 0.1) {
  ModelConfig c;
  c.spec = spec;
  c.num_layers = layers;
  c.time_steps = t;
  c.step_size = eps;
  return c;
}

Eigen::MatrixXd random_matrix(Index r, Index c, CounterRng& rng, double a) {
  Eigen::MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-a, a);
  return m;
}

TEST(MsNeuron, ZeroCurrentStaysPut) {
  const auto cfg = config(ManifoldSpec::lorentz(3), 1, 4);
  CounterRng rng(51);
  Eigen::MatrixXd z(3, 4);
  for (int i = 0; i < 3; ++i) z.row(i) = test::random_point(cfg.spec, rng).transpose();
  const auto out = ms_neuron(CurrentTrain::repeat(Eigen::MatrixXd::Zero(3, 4), 4), z, cfg);
  EXPECT_EQ(out.spikes.count(), 0);
  EXPECT_EQ(out.tangent, Eigen::MatrixXd::Zero(3, 4));
  EXPECT_EQ(out.z, z);
}

TEST(MsNeuron, RepeatedTangentAtOrigin) {
  for (const auto& spec : {ManifoldSpec::lorentz(3), ManifoldSpec::sphere(3)}) {
    const auto cfg = config(spec, 1, 5, 1.0);
    CounterRng rng(52);
    const Vector o = origin(spec);
    const Vector h = test::random_tangent(spec, o, rng, 0.2, 1.5);
    const auto out = ms_neuron(CurrentTrain::repeat(h.transpose(), 5), o.transpose(), cfg);
    EXPECT_LT((out.z.row(0).transpose() - exp_map(spec, o, h)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(MsNeuron, EuclideanIsAddition) {
  const auto cfg = config(ManifoldSpec::euclidean(4), 1, 3, 0.25);
  CounterRng rng(53);
  const Eigen::MatrixXd z = random_matrix(5, 4, rng, 2.0);
  CurrentTrain c;
  for (int t = 0; t < 3; ++t) c.steps.push_back(random_matrix(5, 4, rng, 1.0));
  const auto out = ms_neuron(c, z, cfg);
  EXPECT_EQ(out.z, Eigen::MatrixXd(z + 0.25 * avg_pool(c)));
}

TEST(MsNeuron, WidthMismatch) {
  const auto cfg = config(ManifoldSpec::lorentz(3), 1, 2);
  EXPECT_THROW(ms_neuron(CurrentTrain::repeat(Eigen::MatrixXd::Zero(2, 3), 2), origin_points(cfg.spec, 2), cfg),
               DimensionError);
}

TEST(InitModel, ZeroFeaturesGiveOrigins) {
  const auto cfg = config(ManifoldSpec::sphere(4), 1, 5);
  const auto data = GraphDataset::build(4, std::vector<Edge>{{0, 1}, {2, 3}}, Eigen::MatrixXd::Zero(4, 3));
  const auto step = init_model(data, Eigen::MatrixXd::Ones(3, 5), cfg);
  EXPECT_EQ(step.z, origin_points(cfg.spec, 4));
  EXPECT_EQ(step.spikes.count(), 0);
}

TEST(InitModel, BasisDirection) {
  // One isolated node with feature t along ambient coordinate 2 of a Lorentz
  // origin: the projected tangent is t e2, so Z0 = [cosh(eps t), 0, sinh(eps t), 0].
  const auto cfg = config(ManifoldSpec::lorentz(3), 1, 3);
  const double t = 1.7;
  Eigen::MatrixXd w0 = Eigen::MatrixXd::Zero(1, 4);
  w0(0, 2) = t;
  w0(0, 0) = 0.4;  // the time-like part is removed by the projection at the origin
  const auto data = GraphDataset::build(1, std::vector<Edge>{}, Eigen::MatrixXd::Ones(1, 1));
  const auto step = init_model(data, w0, cfg);
  EXPECT_NEAR(step.z(0, 0), std::cosh(0.1 * t), 1e-15);
  EXPECT_NEAR(step.z(0, 2), std::sinh(0.1 * t), 1e-15);
  EXPECT_EQ(step.z(0, 1), 0.0);
  EXPECT_LT(point_violation(cfg.spec, Vector(step.z.row(0).transpose())), 1e-12);
}

TEST(InitModel, TimeStepsDoNotChangePoints) {
  CounterRng rng(54);
  const auto data = random_graph(8, 0.4, 5, 2, rng.split(1));
  const Eigen::MatrixXd w0 = random_matrix(5, 5, rng, 1.0);
  const auto a = init_model(data, w0, config(ManifoldSpec::lorentz(4), 1, 1));
  const auto b = init_model(data, w0, config(ManifoldSpec::lorentz(4), 1, 5));
  EXPECT_EQ(a.z, b.z);
}

TEST(Forward, ZeroWeightsKeepOrigins) {
  CounterRng rng(55);
  const auto data = random_graph(6, 0.5, 3, 2, rng);
  const auto cfg = config(ManifoldSpec::lorentz(2), 1, 3);
  const Weights w{Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3)};
  EXPECT_EQ(forward(data, w, cfg).final_points(), origin_points(cfg.spec, 6));
}

TEST(Forward, DeterministicAndOnManifold) {
  CounterRng rng(56);
  const auto data = random_graph(10, 0.3, 6, 3, rng.split(1));
  for (const auto& spec : test::simple_specs(4)) {
    const auto cfg = config(spec, 2, 3);
    CounterRng wr = rng.split(2);
    Weights w = init_weights(6, cfg, wr);
    for (auto& m : w) m *= 3.0;
    const auto a = forward(data, w, cfg);
    const auto b = forward(data, w, cfg);
    for (int l = 0; l <= 2; ++l) {
      EXPECT_EQ(a.steps[l].z, b.steps[l].z);
      for (int t = 0; t < 3; ++t) EXPECT_EQ(a.steps[l].spikes.steps[t], b.steps[l].spikes.steps[t]);
      for (Index i = 0; i < 10; ++i) {
        const Vector z = a.steps[l].z.row(i).transpose();
        const Vector zp = a.steps[l].z_prev.row(i).transpose();
        const Vector v = a.steps[l].tangent.row(i).transpose();
        EXPECT_LT(point_violation(spec, z), 1e-9);
        EXPECT_LT(tangent_violation(spec, zp, v), 1e-9);
        // Geodesic step: each layer moves eps * |v| along the manifold.
        double norm = 0.0;
        for (const auto& f : spec.layout()) {
          const Vector vf = v.segment(f.offset, f.size);
          norm += f.kind == ManifoldKind::Lorentz ? std::sqrt(std::max(minkowski_inner(vf, vf), 0.0)) : vf.norm();
        }
        EXPECT_NEAR(distance(spec, zp, z), cfg.step_size * norm, 1e-6);
      }
    }
    EXPECT_GT(a.steps[1].spikes.count() + a.steps[0].spikes.count(), 0) << spec.to_string();
  }
}

TEST(Forward, LayerIndexInErrors) {
  CounterRng rng(57);
  const auto data = random_graph(4, 0.5, 3, 2, rng);
  const auto cfg = config(ManifoldSpec::lorentz(2), 2, 2);
  Weights w{Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3)};
  w[0](0, 1) = std::numeric_limits<double>::infinity();
  try {
    forward(data, w, cfg);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos) << e.what();
  }
  Weights bad{Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(3, 3)};
  EXPECT_THROW(forward(data, bad, cfg), DimensionError);
}

// Splitting one step into k sub-steps with the same pooled vector: the gap to
// the single step is zero in flat space and shrinks like eps^2 when curved.
double substep_gap(const ManifoldSpec& spec, const Vector& z0, const Vector& u, double eps, int k) {
  const Vector single = exp_map(spec, z0, Vector(eps * proj_tangent(spec, z0, u)));
  Vector z = z0;
  for (int s = 0; s < k; ++s) z = exp_map(spec, z, Vector((eps / k) * proj_tangent(spec, z, u)));
  return spec.kind() == ManifoldKind::Euclidean ? (z - single).norm() : distance(spec, z, single);
}

TEST(Forward, SubstepDeviationIsSecondOrder) {
  CounterRng rng(58);
  for (const auto& spec : {ManifoldSpec::lorentz(4), ManifoldSpec::sphere(4)}) {
    const Vector z0 = test::random_point(spec, rng);
    // A normal component in u makes the leading eps^2 coefficient non-zero.
    const Vector u = test::gaussian(spec.ambient_dim(), rng) + z0;
    const double g1 = substep_gap(spec, z0, u, 0.025, 64);
    const double g2 = substep_gap(spec, z0, u, 0.0125, 64);
    EXPECT_GT(g1 / g2, 3.5) << spec.to_string();
    EXPECT_LT(g1 / g2, 4.5) << spec.to_string();
  }
  const auto flat = ManifoldSpec::euclidean(4);
  EXPECT_LT(substep_gap(flat, test::random_point(flat, rng), test::gaussian(4, rng), 0.1, 64), 1e-14);
}

TEST(Forward, DeepStackStaysOnManifold) {
  CounterRng rng(59);
  for (const auto& spec : {ManifoldSpec::lorentz(8), ManifoldSpec::sphere(8)}) {
    const auto cfg = config(spec, 1, 5);
    Eigen::MatrixXd z = origin_points(spec, 20);
    double worst = 0.0;
    for (int layer = 0; layer < 100; ++layer) {
      CurrentTrain c;
      for (int t = 0; t < 5; ++t) c.steps.push_back(random_matrix(20, spec.ambient_dim(), rng, 0.15));
      const auto step = ms_neuron(c, z, cfg);
      EXPECT_EQ(step.spikes.count(), 0);
      z = step.z;
      for (Index i = 0; i < 20; ++i) worst = std::max(worst, point_violation(spec, Vector(z.row(i).transpose())));
    }
    EXPECT_LT(worst, 1e-6) << spec.to_string();
  }
}

TEST(InitWeights, GlorotBoundsAndSeeding) {
  CounterRng a(60), b(60);
  const auto cfg = config(ManifoldSpec::lorentz(4), 2, 3);
  const auto wa = init_weights(7, cfg, a);
  const auto wb = init_weights(7, cfg, b);
  ASSERT_EQ(wa.size(), 3u);
  EXPECT_EQ(wa[0].rows(), 7);
  EXPECT_EQ(wa[1].rows(), 5);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_EQ(wa[l], wb[l]);
    const double bound = std::sqrt(6.0 / double(wa[l].rows() + wa[l].cols()));
    EXPECT_LE(wa[l].cwiseAbs().maxCoeff(), bound);
  }
}

}  // namespace
}  // namespace msg
