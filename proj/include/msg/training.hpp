#pragma once

// Data splits and the training loops for node classification and link
// prediction. One 64-bit seed drives weight init, splits and negative sampling
// through separate counter-RNG streams.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "msg/backprop.hpp"
#include "msg/decoders.hpp"
#include "msg/metrics.hpp"
#include "msg/model.hpp"
#include "msg/random.hpp"

namespace msg {

enum class Task { NodeClassification, LinkPrediction };

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  double lp_val = 0.05;
  double lp_test = 0.10;
};

struct TrainConfig {
  ModelConfig model;
  int epochs = 200;
  double lr = 0.01;
  std::uint64_t seed = 0;
  int patience = 0;        // 0 disables early stopping
  double clip_norm = 0.0;  // 0 disables clipping
  FermiDirac fermi_dirac;
  SplitFractions split;
  BackwardOptions backward;

  void validate() const {
    model.validate();
    fermi_dirac.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (lr < 0.0) throw ConfigError("learning rate must be non-negative");
    if (clip_norm < 0.0) throw ConfigError("clip norm must be non-negative");
  }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double train_metric = 0.0;
  double val_metric = 0.0;
  double test_metric = 0.0;
  std::vector<double> grad_z;  // per step l = 0..L
  std::vector<double> grad_w;
};

struct TrainResult {
  Weights weights;
  ClassifierHead head;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val = 0.0;
  double test_at_best = 0.0;
  double final_test = 0.0;
};

inline std::vector<int> shuffled_indices(int n, CounterRng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  return idx;
}

// Random disjoint train/val/test node masks.
inline void split_nodes(GraphDataset& data, const SplitFractions& f, CounterRng rng) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || f.train + f.val + f.test > 1.0 + 1e-12)
    throw ConfigError("node split fractions must be non-negative and sum to at most 1");
  const int n = data.num_nodes;
  const auto idx = shuffled_indices(n, rng);
  const int n_train = static_cast<int>(std::lround(f.train * n));
  const int n_val = static_cast<int>(std::lround(f.val * n));
  const int n_test = std::min(n - n_train - n_val, static_cast<int>(std::lround(f.test * n)));
  data.train_mask.assign(static_cast<std::size_t>(n), false);
  data.val_mask.assign(static_cast<std::size_t>(n), false);
  data.test_mask.assign(static_cast<std::size_t>(n), false);
  for (int k = 0; k < n; ++k) {
    if (k < n_train) data.train_mask[idx[k]] = true;
    else if (k < n_train + n_val) data.val_mask[idx[k]] = true;
    else if (k < n_train + n_val + n_test) data.test_mask[idx[k]] = true;
  }
}

inline bool any_set(const std::vector<bool>& mask) { return std::find(mask.begin(), mask.end(), true) != mask.end(); }

// Uniform node pairs u < v that are not edges and not already drawn.
inline std::vector<Edge> sample_non_edges(int num_nodes, const std::set<Edge>& excluded, std::size_t count,
                                          CounterRng& rng) {
  const long long pairs = static_cast<long long>(num_nodes) * (num_nodes - 1) / 2;
  if (static_cast<long long>(count + excluded.size()) > pairs) throw ConfigError("not enough non-edges to sample");
  std::set<Edge> seen;
  std::vector<Edge> out;
  out.reserve(count);
  while (out.size() < count) {
    int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_nodes)));
    int v = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_nodes)));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    const Edge e{u, v};
    if (excluded.count(e) || !seen.insert(e).second) continue;
    out.push_back(e);
  }
  return out;
}

struct EdgeSplit {
  std::vector<Edge> train, val_pos, val_neg, test_pos, test_neg;
};

inline EdgeSplit split_edges(const GraphDataset& data, const SplitFractions& f, CounterRng rng) {
  const int m = static_cast<int>(data.edges.size());
  const auto idx = shuffled_indices(m, rng);
  const int n_test = static_cast<int>(std::lround(f.lp_test * m));
  const int n_val = static_cast<int>(std::lround(f.lp_val * m));
  if (n_test + n_val >= m) throw ConfigError("link split leaves no training edges");
  EdgeSplit s;
  for (int k = 0; k < m; ++k) {
    const Edge e = data.edges[idx[k]];
    if (k < n_test) s.test_pos.push_back(e);
    else if (k < n_test + n_val) s.val_pos.push_back(e);
    else s.train.push_back(e);
  }
  std::sort(s.train.begin(), s.train.end());
  std::set<Edge> excluded(data.edges.begin(), data.edges.end());
  s.test_neg = sample_non_edges(data.num_nodes, excluded, s.test_pos.size(), rng);
  excluded.insert(s.test_neg.begin(), s.test_neg.end());
  s.val_neg = sample_non_edges(data.num_nodes, excluded, s.val_pos.size(), rng);
  return s;
}

namespace detail {

inline double auc_of(const ManifoldSpec& spec, const Eigen::MatrixXd& z, const std::vector<Edge>& pos,
                     const std::vector<Edge>& neg, const FermiDirac& fd, double* ap = nullptr) {
  if (pos.empty() || neg.empty()) return 0.0;
  std::vector<double> scores = lp_scores(spec, z, pos, fd);
  const auto neg_scores = lp_scores(spec, z, neg, fd);
  scores.insert(scores.end(), neg_scores.begin(), neg_scores.end());
  std::vector<int> labels(pos.size(), 1);
  labels.resize(pos.size() + neg.size(), 0);
  const auto r = metric_auc_ap(scores, labels);
  if (ap) *ap = r.ap;
  return r.auc;
}

inline void record_grad_norms(EpochRecord& rec, const GradientBundle& g) {
  for (const auto& m : g.d_z) rec.grad_z.push_back(m.norm());
  for (const auto& m : g.d_w) rec.grad_w.push_back(m.norm());
}

inline bool update_best(TrainResult& res, const EpochRecord& rec) {
  if (res.history.empty() || rec.val_metric > res.best_val) {
    res.best_epoch = rec.epoch;
    res.best_val = rec.val_metric;
    res.test_at_best = rec.test_metric;
    return true;
  }
  return false;
}

inline void apply_update(Adam& opt, Weights& weights, ClassifierHead* head, GradientBundle& grads, double clip) {
  if (clip > 0.0) clip_global_norm(grads, clip);
  std::vector<Eigen::MatrixXd*> params;
  std::vector<const Eigen::MatrixXd*> gs;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    params.push_back(&weights[l]);
    gs.push_back(&grads.d_w[l]);
  }
  if (head) {
    params.push_back(&head->w);
    gs.push_back(&grads.d_head);
  }
  opt.update(params, gs);
}

}  // namespace detail

// Full-graph node classification. Masks are drawn from the seed when the
// dataset carries none. Metrics are recorded before each epoch's update.
inline TrainResult train_node_classification(GraphDataset data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.labels.empty()) throw ConfigError("node classification needs labels");
  const CounterRng root(cfg.seed);
  if (!any_set(data.train_mask)) split_nodes(data, cfg.split, root.split(streams::kSplits));
  data.validate_masks();

  CounterRng wrng = root.split(streams::kWeights);
  TrainResult res;
  res.weights = init_weights(data.feature_dim(), cfg.model, wrng);
  res.head.w = glorot_uniform(cfg.model.width(), data.num_classes(), wrng);
  Adam opt(cfg.lr);
  const ManifoldSpec& spec = cfg.model.spec;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const LayerCache cache = forward(data, res.weights, cfg.model);
    const NcLoss nc = nc_loss_and_grad(spec, cache.final_points(), data.labels, data.train_mask, res.head);
    GradientBundle grads = backward(data, cache, res.weights, cfg.model, nc.d_z, nullptr, cfg.backward);
    grads.d_head = nc.d_head;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = nc.loss;
    const auto pred = predict_classes(nc.logits);
    rec.train_metric = metric_accuracy(pred, data.labels, data.train_mask);
    rec.val_metric = any_set(data.val_mask) ? metric_accuracy(pred, data.labels, data.val_mask) : 0.0;
    rec.test_metric = any_set(data.test_mask) ? metric_accuracy(pred, data.labels, data.test_mask) : 0.0;
    detail::record_grad_norms(rec, grads);
    detail::update_best(res, rec);
    res.final_test = rec.test_metric;
    res.history.push_back(std::move(rec));
    if (cfg.patience > 0 && epoch - res.best_epoch > cfg.patience) break;
    detail::apply_update(opt, res.weights, &res.head, grads, cfg.clip_norm);
  }
  return res;
}

// Link prediction with the Fermi-Dirac decoder. Messages pass over training
// edges only; negatives are redrawn every epoch, as many as positives.
inline TrainResult train_link_prediction(const GraphDataset& full, const TrainConfig& cfg) {
  cfg.validate();
  const CounterRng root(cfg.seed);
  const EdgeSplit split = split_edges(full, cfg.split, root.split(streams::kSplits));
  const GraphDataset data = GraphDataset::build(full.num_nodes, split.train, full.features, full.labels);
  const std::set<Edge> all_edges(full.edges.begin(), full.edges.end());

  CounterRng wrng = root.split(streams::kWeights);
  TrainResult res;
  res.weights = init_weights(data.feature_dim(), cfg.model, wrng);
  Adam opt(cfg.lr);
  const ManifoldSpec& spec = cfg.model.spec;
  const CounterRng neg_root = root.split(streams::kNegatives);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    CounterRng nrng = neg_root.split(static_cast<std::uint64_t>(epoch));
    const auto neg = sample_non_edges(full.num_nodes, all_edges, split.train.size(), nrng);
    const LayerCache cache = forward(data, res.weights, cfg.model);
    const Eigen::MatrixXd& z = cache.final_points();
    const LpLoss lp = lp_loss_and_grad(spec, z, split.train, neg, cfg.fermi_dirac);
    GradientBundle grads = backward(data, cache, res.weights, cfg.model, lp.d_z, nullptr, cfg.backward);
    grads.d_head = Eigen::MatrixXd();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = lp.loss;
    rec.train_metric = detail::auc_of(spec, z, split.train, neg, cfg.fermi_dirac);
    rec.val_metric = detail::auc_of(spec, z, split.val_pos, split.val_neg, cfg.fermi_dirac);
    rec.test_metric = detail::auc_of(spec, z, split.test_pos, split.test_neg, cfg.fermi_dirac);
    detail::record_grad_norms(rec, grads);
    detail::update_best(res, rec);
    res.final_test = rec.test_metric;
    res.history.push_back(std::move(rec));
    if (cfg.patience > 0 && epoch - res.best_epoch > cfg.patience) break;
    detail::apply_update(opt, res.weights, nullptr, grads, cfg.clip_norm);
  }
  return res;
}

inline TrainResult train(const GraphDataset& data, const TrainConfig& cfg, Task task) {
  return task == Task::NodeClassification ? train_node_classification(data, cfg) : train_link_prediction(data, cfg);
}

}  // namespace msg
