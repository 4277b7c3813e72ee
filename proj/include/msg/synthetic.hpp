#pragma once

// Seeded synthetic graphs for tests, benchmarks and the CLI.

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "msg/graph.hpp"
#include "msg/random.hpp"

namespace msg {

struct SbmConfig {
  int num_nodes = 100;
  int num_blocks = 2;
  double p_in = 0.3;
  double p_out = 0.02;
};

// Stochastic block model with contiguous equal-size blocks, labels = block id
// and one-hot identity features, column-standardized like loaded features.
inline GraphDataset stochastic_block_model(const SbmConfig& cfg, CounterRng rng) {
  if (cfg.num_nodes < 1 || cfg.num_blocks < 1 || cfg.num_blocks > cfg.num_nodes)
    throw ConfigError("sbm: need 1 <= blocks <= nodes");
  const int n = cfg.num_nodes;
  std::vector<int> block(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) block[i] = static_cast<int>(static_cast<long>(i) * cfg.num_blocks / n);
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (rng.bernoulli(block[u] == block[v] ? cfg.p_in : cfg.p_out)) edges.emplace_back(u, v);
  Eigen::MatrixXd feats = Eigen::MatrixXd::Identity(n, n);
  standardize_columns(feats);
  return GraphDataset::build(n, edges, std::move(feats), block);
}

// Erdos-Renyi graph with Gaussian features and uniform random labels.
inline GraphDataset random_graph(int num_nodes, double p, int feature_dim, int num_classes, CounterRng rng) {
  std::vector<Edge> edges;
  for (int u = 0; u < num_nodes; ++u)
    for (int v = u + 1; v < num_nodes; ++v)
      if (rng.bernoulli(p)) edges.emplace_back(u, v);
  Eigen::MatrixXd feats(num_nodes, feature_dim);
  for (int i = 0; i < num_nodes; ++i)
    for (int j = 0; j < feature_dim; ++j) feats(i, j) = rng.normal();
  std::vector<int> labels(static_cast<std::size_t>(num_nodes));
  for (auto& y : labels) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes)));
  return GraphDataset::build(num_nodes, edges, std::move(feats), std::move(labels));
}

}  // namespace msg
