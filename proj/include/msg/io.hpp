#pragma once

// File formats: whitespace edge lists, headerless CSV matrices and labels,
// CSV reports, and the MSG1 weight container.
//
// MSG1 layout (little-endian):
//   "MSG1" | u32 manifest byte length | manifest JSON | float64 payload
// The manifest lists every tensor's name and shape; the payload stores the
// tensors back to back in row-major order.

#include <Eigen/Dense>
#include "json.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "msg/energy.hpp"
#include "msg/error.hpp"
#include "msg/graph.hpp"
#include "msg/model.hpp"
#include "msg/training.hpp"

namespace msg {

// Shortest decimal that round-trips the double exactly.
inline std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view tok, const std::string& where) {
  tok = trim(tok);
  T value{};
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError(where + ": cannot parse '" + std::string(tok) + "'");
  return value;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path + "'");
  return in;
}

}  // namespace detail

// Two 0-based node ids per line; '#' starts a comment; blank lines are skipped.
inline std::vector<Edge> read_edge_list(std::istream& in, const std::string& name = "edge list") {
  std::vector<Edge> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    std::istringstream fields{std::string(s)};
    std::vector<std::string> toks;
    for (std::string tok; fields >> tok;) toks.push_back(tok);
    if (toks.empty()) continue;
    const std::string where = name + " line " + std::to_string(lineno);
    if (toks.size() != 2) throw ParseError(where + ": expected two node ids");
    edges.emplace_back(detail::parse_number<int>(toks[0], where), detail::parse_number<int>(toks[1], where));
  }
  return edges;
}

inline Eigen::MatrixXd read_csv_matrix(std::istream& in, const std::string& name = "csv") {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const std::string where = name + " line " + std::to_string(lineno);
    std::vector<double> row;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(detail::parse_number<double>(rest.substr(0, comma), where));
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(where + ": expected " + std::to_string(rows.front().size()) + " columns");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

inline std::vector<int> read_labels(std::istream& in, const std::string& name = "labels") {
  std::vector<int> labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = detail::trim(line);
    if (s.empty()) continue;
    labels.push_back(detail::parse_number<int>(s, name + " line " + std::to_string(lineno)));
  }
  return labels;
}

struct DatasetPaths {
  std::string edges;
  std::string features;  // empty: one-hot identity features
  std::string labels;    // empty: unlabeled
};

inline GraphDataset load_dataset(const DatasetPaths& paths, const SplitFractions& split, std::uint64_t seed) {
  auto edge_in = detail::open_input(paths.edges);
  const auto edges = read_edge_list(edge_in, paths.edges);
  int max_id = -1;
  for (auto [u, v] : edges) max_id = std::max({max_id, u, v});

  Eigen::MatrixXd feats;
  int num_nodes = max_id + 1;
  if (!paths.features.empty()) {
    auto in = detail::open_input(paths.features);
    feats = read_csv_matrix(in, paths.features);
    if (feats.rows() < num_nodes)
      throw IngestError("edge list references node " + std::to_string(max_id) + " but features have only " +
                        std::to_string(feats.rows()) + " rows");
    num_nodes = static_cast<int>(feats.rows());
  } else {
    feats = Eigen::MatrixXd::Identity(num_nodes, num_nodes);
  }
  standardize_columns(feats);
  std::vector<int> labels;
  if (!paths.labels.empty()) {
    auto in = detail::open_input(paths.labels);
    labels = read_labels(in, paths.labels);
  }
  GraphDataset data = GraphDataset::build(num_nodes, edges, std::move(feats), std::move(labels));
  if (!data.labels.empty()) split_nodes(data, split, CounterRng(seed).split(streams::kSplits));
  return data;
}

// ---- reports ----

inline void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  const std::size_t steps = history.empty() ? 0 : history.front().grad_w.size();
  out << "epoch,loss,train_metric,val_metric,test_metric";
  for (std::size_t l = 0; l < steps; ++l) out << ",grad_z_" << l;
  for (std::size_t l = 0; l < steps; ++l) out << ",grad_w_" << l;
  out << '\n';
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.loss) << ',' << format_double(r.train_metric) << ','
        << format_double(r.val_metric) << ',' << format_double(r.test_metric);
    for (double g : r.grad_z) out << ',' << format_double(g);
    for (double g : r.grad_w) out << ',' << format_double(g);
    out << '\n';
  }
}

// One row per (epoch, step): the per-layer gradient norms.
inline void write_grad_audit_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,layer,norm_dz,norm_dw\n";
  for (const auto& r : history)
    for (std::size_t l = 0; l < r.grad_w.size(); ++l)
      out << r.epoch << ',' << l << ',' << format_double(r.grad_z[l]) << ',' << format_double(r.grad_w[l]) << '\n';
}

// node, layer, ambient coordinates; layer -1 is the origin base point.
inline void write_trajectory_csv(std::ostream& out, const LayerCache& cache) {
  const Index width = cache.steps.front().z.cols();
  out << "node,layer";
  for (Index c = 0; c < width; ++c) out << ",c" << c;
  out << '\n';
  const Index n = cache.steps.front().z.rows();
  for (Index i = 0; i < n; ++i) {
    auto row = [&](long layer, const Eigen::MatrixXd& z) {
      out << i << ',' << layer;
      for (Index c = 0; c < width; ++c) out << ',' << format_double(z(i, c));
      out << '\n';
    };
    row(-1, cache.steps.front().z_prev);
    for (std::size_t l = 0; l < cache.steps.size(); ++l) row(static_cast<long>(l), cache.steps[l].z);
  }
}

inline nlohmann::json energy_json(const EnergyReport& snn, double ann_pj, EncodingCountMode mode) {
  nlohmann::json j;
  j["e_mac_pj"] = kEnergyPerMacPj;
  j["e_sop_pj"] = kEnergyPerSopPj;
  j["encoding_count_mode"] = mode == EncodingCountMode::Count ? "count" : "fraction";
  j["snn"] = {{"e_encoding_pj", snn.e_encoding},
              {"e_spiking_pj", snn.e_spiking},
              {"total_pj", snn.total},
              {"total_mj", snn.total_mj()}};
  nlohmann::json counts = nlohmann::json::array();
  for (Index t = 0; t < snn.spike_counts.rows(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (Index l = 0; l < snn.spike_counts.cols(); ++l) row.push_back(static_cast<long long>(snn.spike_counts(t, l)));
    counts.push_back(row);
  }
  j["snn"]["spike_counts"] = counts;
  j["ann"] = {{"total_pj", ann_pj}, {"total_mj", ann_pj / kPicojoulesPerMillijoule}};
  return j;
}

// ---- MSG1 weights ----

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd values;
};

struct WeightFile {
  std::string manifold;
  std::vector<NamedTensor> tensors;
};

inline constexpr std::string_view kWeightMagic = "MSG1";

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw ParseError("MSG1: truncated header");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline void put_f64(std::ostream& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  std::array<char, 8> b{};
  for (int k = 0; k < 8; ++k) b[k] = char((bits >> (8 * k)) & 0xff);
  out.write(b.data(), 8);
}

inline double get_f64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw ParseError("MSG1: truncated payload");
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= std::uint64_t(b[k]) << (8 * k);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void write_weights(std::ostream& out, const WeightFile& file) {
  nlohmann::json manifest;
  manifest["format"] = std::string(kWeightMagic);
  manifest["version"] = 1;
  manifest["manifold"] = file.manifold;
  manifest["dtype"] = "float64";
  manifest["order"] = "row-major";
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& t : file.tensors)
    manifest["tensors"].push_back({{"name", t.name}, {"rows", t.values.rows()}, {"cols", t.values.cols()}});
  const std::string text = manifest.dump();
  out.write(kWeightMagic.data(), 4);
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : file.tensors)
    for (Index i = 0; i < t.values.rows(); ++i)
      for (Index j = 0; j < t.values.cols(); ++j) detail::put_f64(out, t.values(i, j));
}

inline WeightFile read_weights(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || std::string_view(magic.data(), 4) != kWeightMagic) throw ParseError("MSG1: bad magic");
  const std::uint32_t len = detail::get_u32(in);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw ParseError("MSG1: truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("MSG1: bad manifest: ") + e.what());
  }
  if (manifest.value("version", 0) != 1) throw ParseError("MSG1: unsupported version");
  WeightFile file;
  file.manifold = manifest.value("manifold", "");
  for (const auto& t : manifest.at("tensors")) {
    NamedTensor nt{t.at("name").get<std::string>(),
                   Eigen::MatrixXd(t.at("rows").get<Index>(), t.at("cols").get<Index>())};
    for (Index i = 0; i < nt.values.rows(); ++i)
      for (Index j = 0; j < nt.values.cols(); ++j) nt.values(i, j) = detail::get_f64(in);
    file.tensors.push_back(std::move(nt));
  }
  return file;
}

}  // namespace msg
