#pragma once

// Differentiation via the manifold path.
//
// Gradients never pass through the fire step. Each step z = Exp_{z_prev}(eps v),
// v = Proj_{z_prev}(pooled), pooled = mean_t A^ S[t] W, is differentiated in
// closed form, so the cost of a backward pass is one pair of exp Jacobians per
// node and step, independent of T outside the GCN weight gradient.
//
// With g the gradient arriving at z:
//   g_v      = eps * Dv Exp^T g
//   g_pooled = (dProj/du)^T g_v
//   dL/dW    = (1/T) sum_t (A^ S[t])^T g_pooled
//   g_prev   = Dz Exp^T g + (dProj/dz)^T g_v

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "msg/error.hpp"
#include "msg/geometry.hpp"
#include "msg/graph.hpp"
#include "msg/model.hpp"
#include "msg/parallel.hpp"

namespace msg {

struct GradientBundle {
  std::vector<Eigen::MatrixXd> d_z;  // d_z[l]: gradient at z^l, l = 0..L
  std::vector<Eigen::MatrixXd> d_w;  // d_w[l]: gradient of W^l
  Eigen::MatrixXd d_head;            // decoder parameters, filled by the task

  [[nodiscard]] double global_norm() const {
    double sq = d_head.squaredNorm();
    for (const auto& g : d_w) sq += g.squaredNorm();
    return std::sqrt(sq);
  }
};

struct BackwardOptions {
  // Include the dependence of the tangent projection on the base point in the
  // point-to-point pullback. Without it the chain keeps only cosh(|v|) I (or
  // cos(|v|) I), which is exact only when the pooled current is already tangent.
  bool projection_terms = true;
};

// Per-node Jacobian evaluations performed by one backward call.
struct BackwardStats {
  long long exp_v_evals = 0;
  long long exp_z_evals = 0;
};

inline GradientBundle backward(const GraphDataset& data, const LayerCache& cache, const Weights& weights,
                               const ModelConfig& cfg, const Eigen::MatrixXd& d_zL, BackwardStats* stats = nullptr,
                               BackwardOptions opts = {}) {
  const int L = cache.num_layers();
  const Index n = data.num_nodes;
  const Index width = cfg.width();
  if (L != cfg.num_layers || static_cast<int>(weights.size()) != L + 1)
    throw DimensionError("backward: cache, weights and config disagree on depth");
  if (d_zL.rows() != n || d_zL.cols() != width)
    throw DimensionError("backward: d_zL must be " + std::to_string(n) + "x" + std::to_string(width));

  GradientBundle out;
  out.d_z.assign(static_cast<std::size_t>(L) + 1, Eigen::MatrixXd());
  out.d_w.assign(static_cast<std::size_t>(L) + 1, Eigen::MatrixXd());
  out.d_z[L] = d_zL;

  std::atomic<long long> v_evals{0}, z_evals{0};
  const double eps = cfg.step_size;
  for (int l = L; l >= 0; --l) {
    const LayerStep& step = cache.steps[l];
    const Eigen::MatrixXd& g = out.d_z[l];
    Eigen::MatrixXd g_pooled(n, width);
    Eigen::MatrixXd g_prev;
    if (l > 0) g_prev.resize(n, width);
    parallel_for(n, [&](long i) {
      const Vector z_prev = step.z_prev.row(i).transpose();
      const Vector pooled = step.pooled.row(i).transpose();
      const Vector v = eps * Vector(step.tangent.row(i).transpose());
      const Vector gi = g.row(i).transpose();
      const Vector g_v = eps * (jacobian_exp_wrt_v(cfg.spec, z_prev, v).transpose() * gi);
      v_evals.fetch_add(1, std::memory_order_relaxed);
      g_pooled.row(i) = (proj_jacobian_wrt_u(cfg.spec, z_prev).transpose() * g_v).transpose();
      if (l > 0) {
        Vector gp = jacobian_exp_wrt_z(cfg.spec, z_prev, v).transpose() * gi;
        z_evals.fetch_add(1, std::memory_order_relaxed);
        if (opts.projection_terms) gp += proj_jacobian_wrt_z(cfg.spec, z_prev, pooled).transpose() * g_v;
        g_prev.row(i) = gp.transpose();
      }
    });
    if (l == 0) {
      const std::vector<Eigen::MatrixXd> features{data.features};
      out.d_w[0] = gcn_weight_grad(data.norm_adj, features, g_pooled);
    } else {
      out.d_w[l] = gcn_weight_grad(data.norm_adj, cache.steps[l - 1].spikes.steps, g_pooled);
      out.d_z[l - 1] = std::move(g_prev);
    }
    if (!out.d_w[l].allFinite() || (l > 0 && !out.d_z[l - 1].allFinite()))
      throw NumericError("backward: non-finite gradient at layer " + std::to_string(l));
  }
  if (stats) {
    stats->exp_v_evals += v_evals.load();
    stats->exp_z_evals += z_evals.load();
  }
  return out;
}

// Rescales all parameter gradients so their joint norm is at most max_norm.
inline void clip_global_norm(GradientBundle& grads, double max_norm) {
  const double norm = grads.global_norm();
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (auto& g : grads.d_w) g *= scale;
  grads.d_head *= scale;
}

// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void update(std::span<Eigen::MatrixXd* const> params, std::span<const Eigen::MatrixXd* const> grads) {
    if (params.size() != grads.size()) throw DimensionError("Adam: parameter and gradient counts differ");
    if (m_.empty()) {
      for (const auto* p : params) {
        m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      }
    }
    if (m_.size() != params.size()) throw DimensionError("Adam: parameter count changed between steps");
    ++step_;
    const double c1 = 1.0 - std::pow(beta1_, step_);
    const double c2 = 1.0 - std::pow(beta2_, step_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& g = *grads[k];
      if (g.rows() != m_[k].rows() || g.cols() != m_[k].cols() || params[k]->rows() != g.rows() ||
          params[k]->cols() != g.cols())
        throw DimensionError("Adam: shape mismatch for parameter " + std::to_string(k));
      m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
      v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
      const Eigen::ArrayXXd m_hat = m_[k].array() / c1;
      const Eigen::ArrayXXd v_hat = v_[k].array() / c2;
      params[k]->array() -= lr_ * m_hat / (v_hat.sqrt() + eps_);
    }
  }

  [[nodiscard]] long step() const { return step_; }
  [[nodiscard]] double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<Eigen::MatrixXd> m_, v_;
  long step_ = 0;
};

}  // namespace msg
