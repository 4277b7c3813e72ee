#pragma once

// Graph container and the GCN transform that turns spikes into current.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msg/error.hpp"

namespace msg {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Edge = std::pair<int, int>;

// Sorted, de-duplicated undirected edge list with u < v. Self-loops are dropped
// since normalization adds its own.
inline std::vector<Edge> canonical_edges(int num_nodes, std::span<const Edge> edges) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw IngestError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range for " +
                        std::to_string(num_nodes) + " nodes");
    if (u == v) continue;
    out.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// D^{-1/2} (A + I) D^{-1/2}, D the degree matrix of A + I.
inline SparseMatrix normalize_adjacency(int num_nodes, std::span<const Edge> edges) {
  if (num_nodes < 0) throw IngestError("negative node count");
  const auto canon = canonical_edges(num_nodes, edges);
  std::vector<double> degree(static_cast<std::size_t>(num_nodes), 1.0);
  for (auto [u, v] : canon) {
    degree[u] += 1.0;
    degree[v] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * canon.size() + static_cast<std::size_t>(num_nodes));
  for (int i = 0; i < num_nodes; ++i) trips.emplace_back(i, i, 1.0 / degree[i]);
  for (auto [u, v] : canon) {
    const double w = 1.0 / std::sqrt(degree[u] * degree[v]);
    trips.emplace_back(u, v, w);
    trips.emplace_back(v, u, w);
  }
  SparseMatrix adj(num_nodes, num_nodes);
  adj.setFromTriplets(trips.begin(), trips.end());
  adj.makeCompressed();
  return adj;
}

struct GraphDataset {
  int num_nodes = 0;
  std::vector<Edge> edges;  // canonical
  Eigen::MatrixXd features;
  std::vector<int> labels;  // empty when unlabeled
  SparseMatrix norm_adj;
  std::vector<bool> train_mask, val_mask, test_mask;

  [[nodiscard]] int num_classes() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }
  [[nodiscard]] Eigen::Index feature_dim() const { return features.cols(); }

  // Builds the dataset with canonical edges and its normalized adjacency.
  static GraphDataset build(int num_nodes, std::span<const Edge> edges, Eigen::MatrixXd features,
                            std::vector<int> labels = {}) {
    if (features.rows() != num_nodes)
      throw IngestError("feature rows (" + std::to_string(features.rows()) + ") != node count (" +
                        std::to_string(num_nodes) + ")");
    if (!labels.empty() && static_cast<int>(labels.size()) != num_nodes)
      throw IngestError("label count (" + std::to_string(labels.size()) + ") != node count (" +
                        std::to_string(num_nodes) + ")");
    for (int y : labels)
      if (y < 0) throw IngestError("labels must be non-negative class indices");
    GraphDataset g;
    g.num_nodes = num_nodes;
    g.edges = canonical_edges(num_nodes, edges);
    g.features = std::move(features);
    g.labels = std::move(labels);
    g.norm_adj = normalize_adjacency(num_nodes, g.edges);
    const auto n = static_cast<std::size_t>(num_nodes);
    g.train_mask.assign(n, false);
    g.val_mask.assign(n, false);
    g.test_mask.assign(n, false);
    return g;
  }

  void validate_masks() const {
    const auto n = static_cast<std::size_t>(num_nodes);
    if (train_mask.size() != n || val_mask.size() != n || test_mask.size() != n)
      throw IngestError("mask length differs from node count");
    for (std::size_t i = 0; i < n; ++i)
      if (int(train_mask[i]) + int(val_mask[i]) + int(test_mask[i]) > 1)
        throw IngestError("masks overlap at node " + std::to_string(i));
  }
};

// A^ . S . W for one time step.
inline Eigen::MatrixXd gcn_forward(const SparseMatrix& adj, const Eigen::MatrixXd& input, const Eigen::MatrixXd& w) {
  if (adj.cols() != input.rows() || input.cols() != w.rows())
    throw DimensionError("gcn_forward: shape chain (" + std::to_string(adj.rows()) + "x" + std::to_string(adj.cols()) +
                         ") . (" + std::to_string(input.rows()) + "x" + std::to_string(input.cols()) + ") . (" +
                         std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + ") is inconsistent");
  const Eigen::MatrixXd agg = adj * input;
  return agg * w;
}

// Gradient of <upstream, mean_t(A^ S[t] W)> with respect to W:
// (1/T) sum_t (A^ S[t])^T upstream. Inputs are treated as constants.
inline Eigen::MatrixXd gcn_weight_grad(const SparseMatrix& adj, std::span<const Eigen::MatrixXd> inputs,
                                       const Eigen::MatrixXd& upstream) {
  if (inputs.empty()) throw DimensionError("gcn_weight_grad: empty input train");
  if (upstream.rows() != adj.rows() || adj.cols() != inputs.front().rows())
    throw DimensionError("gcn_weight_grad: upstream must have one row per node");
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(inputs.front().cols(), upstream.cols());
  for (const auto& s : inputs) {
    if (s.rows() != inputs.front().rows() || s.cols() != inputs.front().cols())
      throw DimensionError("gcn_weight_grad: ragged input train");
    const Eigen::MatrixXd agg = adj * s;
    grad.noalias() += agg.transpose() * upstream;
  }
  return grad / static_cast<double>(inputs.size());
}

// Zero mean, unit variance per column; constant columns become 0.
inline void standardize_columns(Eigen::MatrixXd& m) {
  if (m.rows() == 0) return;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double mean = m.col(j).mean();
    m.col(j).array() -= mean;
    const double sd = std::sqrt(m.col(j).squaredNorm() / static_cast<double>(m.rows()));
    if (sd > 0.0) m.col(j) /= sd;
    else m.col(j).setZero();
  }
}

}  // namespace msg
