#pragma once

// Task heads on the final manifold points and their gradients with respect to
// those points (ambient coordinates).

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "msg/error.hpp"
#include "msg/geometry.hpp"
#include "msg/graph.hpp"
#include "msg/parallel.hpp"

namespace msg {

// Softmax classifier over Log_o(z).
struct ClassifierHead {
  Eigen::MatrixXd w;  // ambient x classes
};

struct NcLoss {
  double loss = 0.0;
  Eigen::MatrixXd d_z;     // nodes x ambient, zero rows outside the mask
  Eigen::MatrixXd d_head;  // ambient x classes
  Eigen::MatrixXd logits;  // nodes x classes
};

inline Eigen::MatrixXd log_at_origin(const ManifoldSpec& spec, const Eigen::MatrixXd& z) {
  const Vector o = origin(spec);
  Eigen::MatrixXd out(z.rows(), z.cols());
  parallel_for(z.rows(), [&](long i) { out.row(i) = log_map(spec, o, Vector(z.row(i).transpose())).transpose(); });
  return out;
}

namespace detail {

inline Vector softmax(const Vector& logits) {
  const Vector shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
  return shifted / shifted.sum();
}

inline double log_sum_exp(const Vector& logits) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// Mean cross-entropy over masked nodes.
inline NcLoss nc_loss_and_grad(const ManifoldSpec& spec, const Eigen::MatrixXd& z, std::span<const int> labels,
                               const std::vector<bool>& mask, const ClassifierHead& head) {
  const Index n = z.rows();
  if (static_cast<Index>(labels.size()) != n || static_cast<Index>(mask.size()) != n)
    throw DimensionError("nc_loss_and_grad: labels/mask length differs from node count");
  if (head.w.rows() != spec.ambient_dim()) throw DimensionError("classifier head rows must equal ambient width");
  long count = 0;
  for (bool m : mask) count += m;
  if (count == 0) throw ConfigError("nc_loss_and_grad: empty mask");

  const Index classes = head.w.cols();
  const Vector o = origin(spec);
  const Eigen::MatrixXd feats = log_at_origin(spec, z);
  NcLoss out;
  out.logits = feats * head.w;
  out.d_z = Eigen::MatrixXd::Zero(n, z.cols());
  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(n, classes);
  const double inv = 1.0 / static_cast<double>(count);
  for (Index i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const int y = labels[i];
    if (y < 0 || y >= classes) throw DimensionError("label " + std::to_string(y) + " outside head classes");
    const Vector row = out.logits.row(i).transpose();
    out.loss += (detail::log_sum_exp(row) - row(y)) * inv;
    Vector d = detail::softmax(row);
    d(y) -= 1.0;
    d_logits.row(i) = (d * inv).transpose();
  }
  out.d_head = feats.transpose() * d_logits;
  parallel_for(n, [&](long i) {
    if (!mask[i]) return;
    const Vector zi = z.row(i).transpose();
    const Vector d_feat = head.w * d_logits.row(i).transpose();
    out.d_z.row(i) = (jacobian_log(spec, o, zi).transpose() * d_feat).transpose();
  });
  return out;
}

// Argmax per row; lowest index wins ties.
inline std::vector<int> predict_classes(const Eigen::MatrixXd& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

struct FermiDirac {
  double r = 2.0;
  double t = 1.0;

  void validate() const {
    if (!(t > 0.0)) throw ConfigError("Fermi-Dirac temperature must be positive");
  }
  // 1 / (exp((d^2 - r) / t) + 1)
  [[nodiscard]] double probability(double dist) const { return detail::sigmoid(-(dist * dist - r) / t); }
};

struct LpLoss {
  double loss = 0.0;
  Eigen::MatrixXd d_z;
  std::vector<double> pos_prob, neg_prob;
};

inline void check_pairs(std::span<const Edge> pairs, Index n) {
  for (auto [u, v] : pairs)
    if (u < 0 || v < 0 || u >= n || v >= n) throw IngestError("edge index out of range");
}

inline std::vector<double> lp_scores(const ManifoldSpec& spec, const Eigen::MatrixXd& z, std::span<const Edge> pairs,
                                     const FermiDirac& fd) {
  check_pairs(pairs, z.rows());
  std::vector<double> out;
  out.reserve(pairs.size());
  for (auto [u, v] : pairs)
    out.push_back(fd.probability(distance(spec, Vector(z.row(u).transpose()), Vector(z.row(v).transpose()))));
  return out;
}

// Binary cross-entropy of the Fermi-Dirac decoder, averaged over all pairs.
inline LpLoss lp_loss_and_grad(const ManifoldSpec& spec, const Eigen::MatrixXd& z, std::span<const Edge> pos,
                               std::span<const Edge> neg, const FermiDirac& fd) {
  fd.validate();
  check_pairs(pos, z.rows());
  check_pairs(neg, z.rows());
  const std::size_t total = pos.size() + neg.size();
  if (total == 0) throw ConfigError("lp_loss_and_grad: no pairs");
  LpLoss out;
  out.d_z = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  const double inv = 1.0 / static_cast<double>(total);
  auto accumulate = [&](std::span<const Edge> pairs, bool positive, std::vector<double>& probs) {
    for (auto [u, v] : pairs) {
      const Vector zu = z.row(u).transpose();
      const Vector zv = z.row(v).transpose();
      const double d = distance(spec, zu, zv);
      const double s = (d * d - fd.r) / fd.t;
      probs.push_back(detail::sigmoid(-s));
      // -log p = softplus(s); -log(1 - p) = softplus(-s)
      out.loss += (positive ? detail::softplus(s) : detail::softplus(-s)) * inv;
      const double d_s = (positive ? detail::sigmoid(s) : -detail::sigmoid(-s)) * inv;
      const double d_sq = d_s / fd.t;
      out.d_z.row(u) += (d_sq * distance_sq_grad(spec, zu, zv)).transpose();
      out.d_z.row(v) += (d_sq * distance_sq_grad(spec, zv, zu)).transpose();
    }
  };
  accumulate(pos, true, out.pos_prob);
  accumulate(neg, false, out.neg_prob);
  return out;
}

}  // namespace msg
