#pragma once

// Manifold spiking layers and the full forward pass.
//
// Step 0 encodes features: H = A^ F W0, repeated over T steps, charges the
// neurons with the origin as base point. Each spiking layer l = 1..L then
// feeds the previous spikes through A^ S[t] W^l. Every step emits a spike
// train and moves each node along a geodesic:
//
//   pooled  = mean_t current[t]
//   tangent = Proj_{z_prev}(pooled)
//   z       = Exp_{z_prev}(eps * tangent)

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "msg/error.hpp"
#include "msg/geometry.hpp"
#include "msg/graph.hpp"
#include "msg/parallel.hpp"
#include "msg/random.hpp"
#include "msg/spiking.hpp"

namespace msg {

struct ModelConfig {
  ManifoldSpec spec = ManifoldSpec::lorentz(32);
  int num_layers = 2;
  int time_steps = 5;
  double step_size = 0.1;
  NeuronConfig neuron;

  // Hidden width equals the ambient dimension of the manifold.
  [[nodiscard]] Index width() const { return spec.ambient_dim(); }

  void validate() const {
    if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
    if (time_steps < 1) throw ConfigError("time_steps must be >= 1");
    if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
    neuron.validate();
  }
};

// W^0 (feature_dim x width) followed by L square (width x width) matrices.
using Weights = std::vector<Eigen::MatrixXd>;

// Artifacts of one step, kept for the backward pass.
struct LayerStep {
  SpikeTrain spikes;
  Eigen::MatrixXd pooled;   // nodes x ambient
  Eigen::MatrixXd tangent;  // Proj_{z_prev}(pooled), tangent at z_prev
  Eigen::MatrixXd z_prev;
  Eigen::MatrixXd z;
};

// steps[0] is the encoding step, steps[l] the l-th spiking layer.
struct LayerCache {
  std::vector<LayerStep> steps;

  [[nodiscard]] int num_layers() const { return static_cast<int>(steps.size()) - 1; }
  [[nodiscard]] const Eigen::MatrixXd& final_points() const { return steps.back().z; }

  // (T x (L+1)) spike counts, column 0 the encoding step.
  [[nodiscard]] Eigen::MatrixXd spike_counts() const {
    const int t_steps = steps.front().spikes.time_steps();
    Eigen::MatrixXd counts(t_steps, static_cast<Index>(steps.size()));
    for (std::size_t l = 0; l < steps.size(); ++l)
      for (int t = 0; t < t_steps; ++t) counts(t, static_cast<Index>(l)) = static_cast<double>(steps[l].spikes.count_at(t));
    return counts;
  }
};

inline Eigen::MatrixXd origin_points(const ManifoldSpec& spec, int num_nodes) {
  const Vector o = origin(spec);
  return o.transpose().replicate(num_nodes, 1);
}

// Spiking plus the geodesic step for every node.
inline LayerStep ms_neuron(const CurrentTrain& current, const Eigen::MatrixXd& z_prev, const ModelConfig& cfg) {
  const Index width = cfg.width();
  if (current.cols() != width || z_prev.cols() != width || current.rows() != z_prev.rows())
    throw DimensionError("ms_neuron: current is " + std::to_string(current.rows()) + "x" +
                         std::to_string(current.cols()) + ", points are " + std::to_string(z_prev.rows()) + "x" +
                         std::to_string(z_prev.cols()));
  LayerStep out;
  out.spikes = run_neuron(current, cfg.neuron);
  out.pooled = avg_pool(current);
  out.z_prev = z_prev;
  out.tangent.resize(z_prev.rows(), width);
  out.z.resize(z_prev.rows(), width);
  parallel_for(z_prev.rows(), [&](long i) {
    const Vector base = z_prev.row(i).transpose();
    const Vector pooled = out.pooled.row(i).transpose();
    const Vector v = proj_tangent(cfg.spec, base, pooled);
    const Vector step = cfg.step_size * v;
    out.tangent.row(i) = v.transpose();
    out.z.row(i) = exp_map(cfg.spec, base, step).transpose();
  });
  return out;
}

inline LayerStep init_model(const GraphDataset& data, const Eigen::MatrixXd& w0, const ModelConfig& cfg) {
  if (w0.rows() != data.feature_dim() || w0.cols() != cfg.width())
    throw DimensionError("W0 must be " + std::to_string(data.feature_dim()) + "x" + std::to_string(cfg.width()));
  const Eigen::MatrixXd h = gcn_forward(data.norm_adj, data.features, w0);
  return ms_neuron(CurrentTrain::repeat(h, cfg.time_steps), origin_points(cfg.spec, data.num_nodes), cfg);
}

namespace detail {

template <class Fn>
auto with_layer(int layer, Fn&& fn) -> decltype(fn()) {
  auto tag = [layer](const char* what) { return "layer " + std::to_string(layer) + ": " + what; };
  try {
    return fn();
  } catch (const DomainError& e) {
    throw DomainError(tag(e.what()));
  } catch (const NumericError& e) {
    throw NumericError(tag(e.what()));
  } catch (const DimensionError& e) {
    throw DimensionError(tag(e.what()));
  }
}

}  // namespace detail

inline void check_weights(const GraphDataset& data, const Weights& weights, const ModelConfig& cfg) {
  if (static_cast<int>(weights.size()) != cfg.num_layers + 1)
    throw DimensionError("expected " + std::to_string(cfg.num_layers + 1) + " weight matrices, got " +
                         std::to_string(weights.size()));
  for (int l = 1; l <= cfg.num_layers; ++l)
    if (weights[l].rows() != cfg.width() || weights[l].cols() != cfg.width())
      throw DimensionError("W" + std::to_string(l) + " must be square with the ambient width");
  if (weights[0].rows() != data.feature_dim() || weights[0].cols() != cfg.width())
    throw DimensionError("W0 shape does not match features and manifold width");
}

// Full forward pass. When `frozen` is given, each spiking layer consumes the
// spike trains recorded there instead of freshly generated ones; used by
// gradient checks that hold the discrete spikes fixed.
inline LayerCache forward(const GraphDataset& data, const Weights& weights, const ModelConfig& cfg,
                          const LayerCache* frozen = nullptr) {
  cfg.validate();
  check_weights(data, weights, cfg);
  if (frozen && frozen->num_layers() != cfg.num_layers) throw DimensionError("frozen cache has the wrong depth");
  LayerCache cache;
  cache.steps.reserve(static_cast<std::size_t>(cfg.num_layers) + 1);
  cache.steps.push_back(detail::with_layer(0, [&] { return init_model(data, weights[0], cfg); }));
  for (int l = 1; l <= cfg.num_layers; ++l) {
    const SpikeTrain& input = frozen ? frozen->steps[l - 1].spikes : cache.steps[l - 1].spikes;
    cache.steps.push_back(detail::with_layer(l, [&] {
      CurrentTrain current;
      current.steps.reserve(input.steps.size());
      for (const auto& s : input.steps) current.steps.push_back(gcn_forward(data.norm_adj, s, weights[l]));
      return ms_neuron(current, cache.steps[l - 1].z, cfg);
    }));
  }
  return cache;
}

// Uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
inline Eigen::MatrixXd glorot_uniform(Index rows, Index cols, CounterRng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd w(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) w(i, j) = rng.uniform(-a, a);
  return w;
}

inline Weights init_weights(Index feature_dim, const ModelConfig& cfg, CounterRng& rng) {
  Weights w;
  w.push_back(glorot_uniform(feature_dim, cfg.width(), rng));
  for (int l = 1; l <= cfg.num_layers; ++l) w.push_back(glorot_uniform(cfg.width(), cfg.width(), rng));
  return w;
}

}  // namespace msg
