#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "msg/msg.hpp"

namespace msg::cli {
namespace {

namespace fs = std::filesystem;

struct RunOptions {
  std::string manifold = "lorentz:32";
  int layers = 2;
  int time_steps = 5;
  double step_size = 0.1;
  double v_th = 1.0;
  double v_rest = 0.0;
  double leak = 1.0;
  std::string reset = "fixed";

  int epochs = 200;
  double lr = 0.01;
  std::uint64_t seed = 0;
  int patience = 0;
  double clip = 0.0;
  double fd_r = 2.0;
  double fd_t = 1.0;
  double train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
  double lp_val = 0.05, lp_test = 0.10;

  std::string edges, features, labels;
  int nodes = 100;
  int blocks = 2;
  double p_in = 0.3;
  double p_out = 0.02;

  std::string out_dir = ".";
  std::string weights_in;
  bool grad_audit = false;
  std::string count_mode = "count";
};

void add_model_flags(CLI::App& app, RunOptions& o) {
  app.add_option("--manifold", o.manifold, "lorentz:d, sphere:d, euclidean:d or product:a:n+b:m")
      ->capture_default_str();
  app.add_option("--layers", o.layers, "number of spiking layers L")->capture_default_str();
  app.add_option("--time-steps", o.time_steps, "spike train length T")->capture_default_str();
  app.add_option("--step-size", o.step_size, "geodesic step size epsilon")->capture_default_str();
  app.add_option("--v-th", o.v_th, "firing threshold")->capture_default_str();
  app.add_option("--v-rest", o.v_rest, "reset potential")->capture_default_str();
  app.add_option("--leak", o.leak, "membrane decay in (0, 1]; 1 is plain IF")->capture_default_str();
  app.add_option("--reset", o.reset, "reset rule")->check(CLI::IsMember({"fixed", "subtract"}))->capture_default_str();
  app.add_option("--seed", o.seed, "64-bit seed for weights, splits and negatives")->capture_default_str();
}

void add_data_flags(CLI::App& app, RunOptions& o) {
  app.add_option("--edges", o.edges, "edge list, two 0-based ids per line");
  app.add_option("--features", o.features, "CSV feature matrix (identity when omitted)");
  app.add_option("--labels", o.labels, "one integer label per line");
  app.add_option("--nodes", o.nodes, "synthetic SBM node count when no edge list is given")->capture_default_str();
  app.add_option("--blocks", o.blocks, "synthetic SBM block count")->capture_default_str();
  app.add_option("--p-in", o.p_in, "synthetic SBM in-block edge probability")->capture_default_str();
  app.add_option("--p-out", o.p_out, "synthetic SBM cross-block edge probability")->capture_default_str();
  app.add_option("--train-frac", o.train_frac, "node split: train fraction")->capture_default_str();
  app.add_option("--val-frac", o.val_frac, "node split: validation fraction")->capture_default_str();
  app.add_option("--test-frac", o.test_frac, "node split: test fraction")->capture_default_str();
  app.add_option("--lp-val", o.lp_val, "edge split: validation fraction")->capture_default_str();
  app.add_option("--lp-test", o.lp_test, "edge split: test fraction")->capture_default_str();
}

void add_train_flags(CLI::App& app, RunOptions& o) {
  app.add_option("--epochs", o.epochs)->capture_default_str();
  app.add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  app.add_option("--patience", o.patience, "early-stopping patience, 0 disables")->capture_default_str();
  app.add_option("--clip", o.clip, "global gradient-norm clip, 0 disables")->capture_default_str();
  app.add_option("--fd-r", o.fd_r, "Fermi-Dirac radius r")->capture_default_str();
  app.add_option("--fd-t", o.fd_t, "Fermi-Dirac temperature t")->capture_default_str();
  app.add_flag("--grad-audit", o.grad_audit, "write per-layer gradient norms to grads.csv");
}

void add_out_flag(CLI::App& app, RunOptions& o) {
  app.add_option("--out", o.out_dir, "output directory")->capture_default_str();
}

ModelConfig model_config(const RunOptions& o) {
  ModelConfig m;
  m.spec = ManifoldSpec::parse(o.manifold);
  m.num_layers = o.layers;
  m.time_steps = o.time_steps;
  m.step_size = o.step_size;
  m.neuron.v_threshold = o.v_th;
  m.neuron.v_rest = o.v_rest;
  m.neuron.leak = o.leak;
  m.neuron.reset = o.reset == "subtract" ? ResetMode::Subtract : ResetMode::Fixed;
  m.validate();
  return m;
}

SplitFractions split_config(const RunOptions& o) {
  SplitFractions s;
  s.train = o.train_frac;
  s.val = o.val_frac;
  s.test = o.test_frac;
  s.lp_val = o.lp_val;
  s.lp_test = o.lp_test;
  return s;
}

TrainConfig train_config(const RunOptions& o) {
  TrainConfig c;
  c.model = model_config(o);
  c.epochs = o.epochs;
  c.lr = o.lr;
  c.seed = o.seed;
  c.patience = o.patience;
  c.clip_norm = o.clip;
  c.fermi_dirac.r = o.fd_r;
  c.fermi_dirac.t = o.fd_t;
  c.split = split_config(o);
  c.validate();
  return c;
}

GraphDataset dataset(const RunOptions& o) {
  if (!o.edges.empty()) return load_dataset({o.edges, o.features, o.labels}, split_config(o), o.seed);
  if (!o.features.empty() || !o.labels.empty()) throw ConfigError("--features and --labels need --edges");
  SbmConfig sbm;
  sbm.num_nodes = o.nodes;
  sbm.num_blocks = o.blocks;
  sbm.p_in = o.p_in;
  sbm.p_out = o.p_out;
  GraphDataset data = stochastic_block_model(sbm, CounterRng(o.seed).split(streams::kGraph));
  split_nodes(data, split_config(o), CounterRng(o.seed).split(streams::kSplits));
  return data;
}

fs::path out_path(const RunOptions& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  return fs::path(o.out_dir) / name;
}

std::ofstream open_output(const fs::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IngestError("cannot write '" + p.string() + "'");
  return out;
}

Weights load_weights(const RunOptions& o, const GraphDataset& data, const ModelConfig& m) {
  if (o.weights_in.empty()) {
    CounterRng rng = CounterRng(o.seed).split(streams::kWeights);
    return init_weights(data.feature_dim(), m, rng);
  }
  std::ifstream in(o.weights_in, std::ios::binary);
  if (!in) throw IngestError("cannot open '" + o.weights_in + "'");
  const WeightFile file = read_weights(in);
  if (ManifoldSpec::parse(file.manifold) != m.spec)
    throw ConfigError("weights were trained on " + file.manifold + ", not " + m.spec.to_string());
  Weights w;
  for (int l = 0; l <= m.num_layers; ++l) {
    const std::string name = "W" + std::to_string(l);
    const auto it = std::find_if(file.tensors.begin(), file.tensors.end(),
                                 [&](const NamedTensor& t) { return t.name == name; });
    if (it == file.tensors.end()) throw ConfigError("weight file has no tensor " + name);
    w.push_back(it->values);
  }
  check_weights(data, w, m);
  return w;
}

void save_run(const RunOptions& o, const TrainConfig& cfg, const TrainResult& res, bool with_head) {
  {
    auto out = open_output(out_path(o, "history.csv"));
    write_history_csv(out, res.history);
  }
  if (o.grad_audit) {
    auto out = open_output(out_path(o, "grads.csv"));
    write_grad_audit_csv(out, res.history);
  }
  WeightFile file;
  file.manifold = cfg.model.spec.to_string();
  for (std::size_t l = 0; l < res.weights.size(); ++l) file.tensors.push_back({"W" + std::to_string(l), res.weights[l]});
  if (with_head) file.tensors.push_back({"head", res.head.w});
  auto out = open_output(out_path(o, "weights.msg1"), true);
  write_weights(out, file);
}

int run_train(const RunOptions& o, Task task) {
  const TrainConfig cfg = train_config(o);
  const GraphDataset data = dataset(o);
  const TrainResult res = train(data, cfg, task);
  save_run(o, cfg, res, task == Task::NodeClassification);
  const char* metric = task == Task::NodeClassification ? "accuracy" : "auc";
  std::cout << "epochs " << res.history.size() << "\n"
            << "best_epoch " << res.best_epoch << "\n"
            << "best_val_" << metric << ' ' << format_double(res.best_val) << "\n"
            << "test_" << metric << "_at_best " << format_double(res.test_at_best) << "\n"
            << "final_test_" << metric << ' ' << format_double(res.final_test) << "\n";
  return kExitOk;
}

// Loss and analytic gradients for the frozen-spike audit.
struct AuditLoss {
  std::function<double(const Weights&, const Eigen::MatrixXd&)> value;
  std::function<GradientBundle(const Weights&, const Eigen::MatrixXd&)> grad;
};

double rel_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  if (analytic.size() == 0) return 0.0;
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

int run_gradcheck(const RunOptions& o, const std::string& task, double h, double tolerance) {
  const ModelConfig m = model_config(o);
  const GraphDataset data = dataset(o);
  CounterRng wrng = CounterRng(o.seed).split(streams::kWeights);
  const Weights w = init_weights(data.feature_dim(), m, wrng);
  const ClassifierHead head0{glorot_uniform(m.width(), std::max(data.num_classes(), 2), wrng)};
  const LayerCache base = forward(data, w, m);
  const FermiDirac fd{o.fd_r, o.fd_t};

  CounterRng nrng = CounterRng(o.seed).split(streams::kNegatives);
  const std::set<Edge> all(data.edges.begin(), data.edges.end());
  const auto neg = sample_non_edges(data.num_nodes, all, data.edges.size(), nrng);

  auto run = [&](const std::string& name, bool nc) {
    auto loss = [&](const Weights& ws, const Eigen::MatrixXd& hw) {
      const LayerCache c = forward(data, ws, m, &base);
      if (nc) return nc_loss_and_grad(m.spec, c.final_points(), data.labels, data.train_mask, {hw}).loss;
      return lp_loss_and_grad(m.spec, c.final_points(), data.edges, neg, fd).loss;
    };
    const LayerCache c = forward(data, w, m, &base);
    GradientBundle g;
    if (nc) {
      const NcLoss l = nc_loss_and_grad(m.spec, c.final_points(), data.labels, data.train_mask, head0);
      g = backward(data, c, w, m, l.d_z);
      g.d_head = l.d_head;
    } else {
      g = backward(data, c, w, m, lp_loss_and_grad(m.spec, c.final_points(), data.edges, neg, fd).d_z);
    }
    double worst = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) {
      Eigen::MatrixXd num(w[l].rows(), w[l].cols());
      for (Index i = 0; i < w[l].rows(); ++i)
        for (Index j = 0; j < w[l].cols(); ++j) {
          Weights wp = w, wm = w;
          wp[l](i, j) += h;
          wm[l](i, j) -= h;
          num(i, j) = (loss(wp, head0.w) - loss(wm, head0.w)) / (2.0 * h);
        }
      const double e = rel_error(g.d_w[l], num);
      std::cout << name << " W" << l << " rel_err " << format_double(e) << "\n";
      worst = std::max(worst, e);
    }
    if (nc) {
      Eigen::MatrixXd num(head0.w.rows(), head0.w.cols());
      for (Index i = 0; i < num.rows(); ++i)
        for (Index j = 0; j < num.cols(); ++j) {
          Eigen::MatrixXd hp = head0.w, hm = head0.w;
          hp(i, j) += h;
          hm(i, j) -= h;
          num(i, j) = (loss(w, hp) - loss(w, hm)) / (2.0 * h);
        }
      const double e = rel_error(g.d_head, num);
      std::cout << name << " head rel_err " << format_double(e) << "\n";
      worst = std::max(worst, e);
    }
    return worst;
  };

  double worst = 0.0;
  if (task == "nc" || task == "both") {
    if (data.labels.empty()) throw ConfigError("gradcheck --task nc needs labels");
    worst = std::max(worst, run("nc", true));
  }
  if (task == "lp" || task == "both") worst = std::max(worst, run("lp", false));
  std::cout << "max_rel_err " << format_double(worst) << "\n";
  if (!(worst <= tolerance)) {
    std::cerr << "gradcheck: relative error " << format_double(worst) << " exceeds " << format_double(tolerance)
              << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

int run_energy(const RunOptions& o) {
  const ModelConfig m = model_config(o);
  const GraphDataset data = dataset(o);
  const Weights w = load_weights(o, data, m);
  const LayerCache cache = forward(data, w, m);
  const EncodingCountMode mode = o.count_mode == "fraction" ? EncodingCountMode::Fraction : EncodingCountMode::Count;
  const EnergyReport snn = snn_energy(cache.spike_counts(), data.num_nodes, data.feature_dim(), mode, m.width());
  const double ann = ann_energy(data.num_nodes, data.feature_dim(), m.width(),
                                2 * static_cast<long>(data.edges.size()));
  const nlohmann::json j = energy_json(snn, ann, mode);
  auto out = open_output(out_path(o, "energy.json"));
  out << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int run_trajectory(const RunOptions& o) {
  const ModelConfig m = model_config(o);
  const GraphDataset data = dataset(o);
  const Weights w = load_weights(o, data, m);
  const LayerCache cache = forward(data, w, m);
  auto out = open_output(out_path(o, "trajectory.csv"));
  write_trajectory_csv(out, cache);
  std::cout << "nodes " << data.num_nodes << "\nlayers " << cache.num_layers() << "\n";
  return kExitOk;
}

int run_chart_converge(const RunOptions& o, double t_end, std::vector<int> charts, int reference, double lo,
                       double hi) {
  const ManifoldSpec spec = ManifoldSpec::parse(o.manifold);
  Vector c = Vector::Zero(spec.ambient_dim());
  // Spatial direction of every factor so the field is non-trivial everywhere.
  for (const auto& f : spec.layout()) c(f.offset + (f.kind == ManifoldKind::Euclidean ? 0 : 1)) = 1.0;
  const auto study = convergence_study(spec, projected_constant_field(spec, c), origin(spec), t_end, charts, reference);
  std::cout << "charts,error\n";
  for (std::size_t k = 0; k < study.charts.size(); ++k)
    std::cout << study.charts[k] << ',' << format_double(study.errors[k]) << "\n";
  std::cout << "slope " << format_double(study.slope) << "\n";
  if (!(study.slope >= lo && study.slope <= hi)) {
    std::cerr << "chart-converge: slope " << format_double(study.slope) << " outside [" << format_double(lo) << ", "
              << format_double(hi) << "]\n";
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Manifold-valued spiking graph networks"};
  app.require_subcommand(1);
  RunOptions o;

  auto* nc = app.add_subcommand("train-nc", "train node classification");
  auto* lp = app.add_subcommand("train-lp", "train link prediction");
  for (auto* sub : {nc, lp}) {
    add_model_flags(*sub, o);
    add_data_flags(*sub, o);
    add_train_flags(*sub, o);
    add_out_flag(*sub, o);
  }

  auto* gc = app.add_subcommand("gradcheck", "frozen-spike finite-difference audit of the backward pass");
  add_model_flags(*gc, o);
  add_data_flags(*gc, o);
  std::string gc_task = "both";
  double gc_h = 1e-4, gc_tol = 1e-3;
  gc->add_option("--task", gc_task)->check(CLI::IsMember({"nc", "lp", "both"}))->capture_default_str();
  gc->add_option("--fd-step", gc_h, "central difference step")->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "largest accepted relative error")->capture_default_str();
  gc->add_option("--fd-r", o.fd_r)->capture_default_str();
  gc->add_option("--fd-t", o.fd_t)->capture_default_str();

  auto* en = app.add_subcommand("energy-report", "theoretical SNN and ANN energy of one forward pass");
  add_model_flags(*en, o);
  add_data_flags(*en, o);
  add_out_flag(*en, o);
  en->add_option("--weights", o.weights_in, "MSG1 weight file (fresh init when omitted)");
  en->add_option("--encoding-count-mode", o.count_mode, "how encoding spikes are counted")
      ->check(CLI::IsMember({"count", "fraction"}))
      ->capture_default_str();

  auto* tr = app.add_subcommand("trajectory", "per-layer manifold coordinates of every node");
  add_model_flags(*tr, o);
  add_data_flags(*tr, o);
  add_out_flag(*tr, o);
  tr->add_option("--weights", o.weights_in, "MSG1 weight file (fresh init when omitted)");

  auto* cc = app.add_subcommand("chart-converge", "dynamic chart solver convergence study");
  double t_end = 1.0, slope_lo = -1.3, slope_hi = -0.7;
  int reference = 4096;
  std::vector<int> charts{8, 16, 32, 64, 128, 256, 512, 1024};
  cc->add_option("--manifold", o.manifold)->capture_default_str();
  cc->add_option("--t-end", t_end)->capture_default_str();
  cc->add_option("--charts", charts, "chart counts K")->delimiter(',');
  cc->add_option("--reference", reference, "chart count of the reference solution")->capture_default_str();
  cc->add_option("--slope-min", slope_lo)->capture_default_str();
  cc->add_option("--slope-max", slope_hi)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (nc->parsed()) return run_train(o, Task::NodeClassification);
    if (lp->parsed()) return run_train(o, Task::LinkPrediction);
    if (gc->parsed()) return run_gradcheck(o, gc_task, gc_h, gc_tol);
    if (en->parsed()) return run_energy(o);
    if (tr->parsed()) return run_trajectory(o);
    if (cc->parsed()) return run_chart_converge(o, t_end, charts, reference, slope_lo, slope_hi);
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace msg::cli
