#pragma once

// Theoretical energy accounting. SNN: encoding MACs plus one synaptic
// operation per emitted spike. ANN: feature transform plus aggregation MACs.
// All internal values are picojoules.

#include <Eigen/Dense>

#include <string>

#include "msg/error.hpp"

namespace msg {

inline constexpr double kEnergyPerMacPj = 4.6;
inline constexpr double kEnergyPerSopPj = 3.7;
inline constexpr double kPicojoulesPerMillijoule = 1e9;

// How the per-step encoding spike quantity S_t is read from the counts.
enum class EncodingCountMode {
  Count,     // number of spiking entries at the encoding step
  Fraction,  // spiking entries divided by nodes * width (firing rate)
};

struct EnergyReport {
  double e_encoding = 0.0;
  double e_spiking = 0.0;
  double total = 0.0;
  Eigen::MatrixXd spike_counts;  // T x (L+1), column 0 the encoding step

  [[nodiscard]] double total_mj() const { return total / kPicojoulesPerMillijoule; }
};

inline EnergyReport snn_energy(const Eigen::MatrixXd& spike_counts, long n_nodes, long feat_dim,
                               EncodingCountMode mode = EncodingCountMode::Count, long encoding_width = 0) {
  if (spike_counts.cols() < 1) throw DimensionError("snn_energy: need at least the encoding column");
  if ((spike_counts.array() < 0.0).any()) throw ConfigError("snn_energy: negative spike count");
  if (n_nodes < 0 || feat_dim < 0) throw ConfigError("snn_energy: negative dimension");
  if (mode == EncodingCountMode::Fraction && encoding_width <= 0)
    throw ConfigError("snn_energy: fraction mode needs the encoding width");

  EnergyReport r;
  r.spike_counts = spike_counts;
  const double nd = static_cast<double>(n_nodes) * static_cast<double>(feat_dim);
  double encoding_sum = 0.0;
  double spiking_sum = 0.0;
  for (Eigen::Index t = 0; t < spike_counts.rows(); ++t) {
    double s_t = spike_counts(t, 0);
    if (mode == EncodingCountMode::Fraction) s_t /= static_cast<double>(n_nodes) * static_cast<double>(encoding_width);
    encoding_sum += nd * s_t;
    for (Eigen::Index l = 1; l < spike_counts.cols(); ++l) spiking_sum += spike_counts(t, l);
  }
  r.e_encoding = kEnergyPerMacPj * encoding_sum;
  r.e_spiking = kEnergyPerSopPj * spiking_sum;
  r.total = r.e_encoding + r.e_spiking;
  return r;
}

inline double ann_energy(long n_nodes, long d_in, long d_out, long n_edges) {
  if (n_nodes < 0 || d_in < 0 || d_out < 0 || n_edges < 0) throw ConfigError("ann_energy: negative dimension");
  const double macs = static_cast<double>(n_nodes) * static_cast<double>(d_in) * static_cast<double>(d_out) +
                      static_cast<double>(n_edges) * static_cast<double>(d_out);
  return kEnergyPerMacPj * macs;
}

}  // namespace msg
