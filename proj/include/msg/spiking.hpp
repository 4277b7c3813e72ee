#pragma once

// Integrate-and-fire neurons over discrete time steps.
//
// A train is a sequence of T matrices (rows = nodes, columns = features). The
// membrane state is the same shape as one step and starts at zero each run.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "msg/error.hpp"

namespace msg {

enum class ResetMode { Fixed, Subtract };

struct NeuronConfig {
  double v_threshold = 1.0;
  // Membrane value after a fixed reset.
  double v_rest = 0.0;
  // Multiplicative decay applied before integration; 1 gives IF, < 1 gives LIF.
  double leak = 1.0;
  ResetMode reset = ResetMode::Fixed;

  void validate() const {
    if (!(v_rest < v_threshold)) throw ConfigError("neuron: v_rest must be below v_threshold");
    if (!(leak > 0.0 && leak <= 1.0)) throw ConfigError("neuron: leak must lie in (0, 1]");
  }
};

using StepMatrix = Eigen::MatrixXd;

// Real-valued input current, one matrix per time step.
struct CurrentTrain {
  std::vector<StepMatrix> steps;

  [[nodiscard]] int time_steps() const { return static_cast<int>(steps.size()); }
  [[nodiscard]] Eigen::Index rows() const { return steps.empty() ? 0 : steps.front().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return steps.empty() ? 0 : steps.front().cols(); }

  static CurrentTrain repeat(const StepMatrix& m, int t) {
    if (t < 1) throw ConfigError("time steps must be >= 1");
    return CurrentTrain{std::vector<StepMatrix>(static_cast<std::size_t>(t), m)};
  }
};

// Binary spikes, one {0,1}-valued matrix per time step.
struct SpikeTrain {
  std::vector<StepMatrix> steps;

  [[nodiscard]] int time_steps() const { return static_cast<int>(steps.size()); }
  [[nodiscard]] Eigen::Index rows() const { return steps.empty() ? 0 : steps.front().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return steps.empty() ? 0 : steps.front().cols(); }

  [[nodiscard]] long long count() const {
    long long n = 0;
    for (const auto& s : steps) n += static_cast<long long>(s.sum());
    return n;
  }

  [[nodiscard]] long long count_at(int t) const { return static_cast<long long>(steps.at(t).sum()); }
};

// One integrate / fire / reset update. `v` is updated in place; returns the spikes.
inline StepMatrix neuron_step(StepMatrix& v, const StepMatrix& input, const NeuronConfig& cfg) {
  if (v.rows() != input.rows() || v.cols() != input.cols())
    throw DimensionError("neuron_step: membrane and current shapes differ");
  v = cfg.leak * v + input;
  StepMatrix spikes = (v.array() >= cfg.v_threshold).cast<double>();
  if (cfg.reset == ResetMode::Fixed) {
    v = ((1.0 - spikes.array()) * v.array() + spikes.array() * cfg.v_rest).matrix();
  } else {
    v -= cfg.v_threshold * spikes;
  }
  return spikes;
}

inline SpikeTrain run_neuron(const CurrentTrain& current, const NeuronConfig& cfg) {
  if (current.steps.empty()) throw ConfigError("run_neuron: need at least one time step");
  StepMatrix v = StepMatrix::Zero(current.rows(), current.cols());
  SpikeTrain out;
  out.steps.reserve(current.steps.size());
  for (const auto& in : current.steps) {
    if (!in.allFinite()) throw NumericError("run_neuron: non-finite current");
    out.steps.push_back(neuron_step(v, in, cfg));
  }
  return out;
}

// Mean of the current over time, as a running mean so that T identical
// steps pool to exactly that step.
inline StepMatrix avg_pool(const CurrentTrain& current) {
  if (current.steps.empty()) throw ConfigError("avg_pool: need at least one time step");
  StepMatrix mean = current.steps.front();
  for (std::size_t t = 1; t < current.steps.size(); ++t)
    mean += (current.steps[t] - mean) / static_cast<double>(t + 1);
  return mean;
}

inline std::string to_string(ResetMode m) { return m == ResetMode::Fixed ? "fixed" : "subtract"; }

}  // namespace msg
