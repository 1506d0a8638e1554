#include "hagcn/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace hagcn {
namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw DatasetError(path.empty() ? "<root>" : path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw DatasetError(join(path, key), "missing field");
  return *it;
}

const json& array_field(const json& obj, const std::string& key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_array()) throw DatasetError(join(path, key), "expected an array");
  return v;
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw DatasetError(path, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw DatasetError(path, "integer out of range");
  }
  return static_cast<int>(x);
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw DatasetError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw DatasetError(path, "value is not finite");
  return x;
}

Graph parse_graph(const json& obj, const std::string& path) {
  const std::string n_path = join(path, "num_nodes");
  const int n = as_int(field(obj, "num_nodes", path), n_path);
  if (n < 0) throw DatasetError(n_path, "must be non-negative");
  const json& edges = array_field(obj, "edges", path);
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string e_path = index(join(path, "edges"), e);
    const json& pair = edges[e];
    if (!pair.is_array() || pair.size() != 2) throw DatasetError(e_path, "expected a pair [i, j]");
    const int i = as_int(pair[0], index(e_path, 0));
    const int j = as_int(pair[1], index(e_path, 1));
    if (i < 0 || i >= n || j < 0 || j >= n) {
      throw DatasetError(e_path, "edge " + std::to_string(e) + " (" + std::to_string(i) + ", " + std::to_string(j) +
                                     ") has an endpoint outside [0, " + std::to_string(n) + ")");
    }
    out.emplace_back(i, j);
  }
  return Graph(n, out);
}

Matrix parse_features(const json& obj, int n, const std::string& path) {
  const std::string f_path = join(path, "node_features");
  const json& rows = array_field(obj, "node_features", path);
  if (static_cast<int>(rows.size()) != n) {
    throw DatasetError(f_path, std::to_string(rows.size()) + " rows for " + std::to_string(n) + " nodes");
  }
  if (n == 0) return Matrix(0, 1);
  Matrix out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string r_path = index(f_path, r);
    if (!rows[r].is_array()) throw DatasetError(r_path, "expected an array");
    if (r == 0) {
      if (rows[0].empty()) throw DatasetError(r_path, "feature rows must be non-empty");
      out.resize(n, static_cast<Eigen::Index>(rows[0].size()));
    }
    if (static_cast<Eigen::Index>(rows[r].size()) != out.cols()) {
      throw DatasetError(r_path, "ragged row: " + std::to_string(rows[r].size()) + " values, expected " +
                                     std::to_string(out.cols()));
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as_number(rows[r][c], index(r_path, c));
    }
  }
  return out;
}

Mask parse_mask(const json& obj, const std::string& key, int n, const std::string& path) {
  const std::string m_path = join(path, key);
  const json& arr = array_field(obj, key, path);
  if (static_cast<int>(arr.size()) != n) {
    throw DatasetError(m_path, std::to_string(arr.size()) + " entries for " + std::to_string(n) + " nodes");
  }
  Mask out(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const int v = as_int(arr[i], index(m_path, i));
    if (v != 0 && v != 1) throw DatasetError(index(m_path, i), "mask entries must be 0 or 1");
    out[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

NodeDataset parse_node_dataset(const json& doc, std::uint64_t split_seed) {
  NodeDataset data;
  data.graph = parse_graph(doc, "");
  const int n = data.graph.num_nodes();
  data.features = parse_features(doc, n, "");
  const json& labels = array_field(doc, "node_labels", "");
  if (static_cast<int>(labels.size()) != n) {
    throw DatasetError("node_labels", std::to_string(labels.size()) + " labels for " + std::to_string(n) + " nodes");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = as_int(labels[i], index("node_labels", i));
    if (label < 0) throw DatasetError(index("node_labels", i), "labels must be non-negative");
    data.labels.push_back(label);
  }
  if (doc.contains("masks")) {
    const json& masks = doc.at("masks");
    data.masks = {parse_mask(masks, "train", n, "masks"), parse_mask(masks, "val", n, "masks"),
                  parse_mask(masks, "test", n, "masks")};
    for (int i = 0; i < n; ++i) {
      if (data.masks.train[i] + data.masks.val[i] + data.masks.test[i] > 1) {
        throw DatasetError("masks", "node " + std::to_string(i) + " is in more than one split");
      }
    }
  } else {
    data.masks = split_nodes(n, {}, split_seed);
  }
  return data;
}

GraphDatasetCollection parse_graph_collection(const json& doc) {
  const json& graphs = array_field(doc, "graphs", "");
  std::vector<GraphItem> items;
  items.reserve(graphs.size());
  int width = -1;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const std::string path = index("graphs", g);
    GraphItem item;
    item.graph = parse_graph(graphs[g], path);
    if (item.graph.num_nodes() < 1) throw DatasetError(join(path, "num_nodes"), "graphs need at least one node");
    item.features = parse_features(graphs[g], item.graph.num_nodes(), path);
    if (width < 0) width = static_cast<int>(item.features.cols());
    if (item.features.cols() != width) {
      throw DatasetError(join(path, "node_features"), "feature width " + std::to_string(item.features.cols()) +
                                                          " differs from graphs[0] width " + std::to_string(width));
    }
    item.target = as_number(field(graphs[g], "target", path), join(path, "target"));
    items.push_back(std::move(item));
  }
  std::optional<int> n_max;
  if (doc.contains("n_max")) n_max = as_int(doc.at("n_max"), "n_max");
  try {
    return GraphDatasetCollection(std::move(items), n_max);
  } catch (const ShapeError& e) {
    throw DatasetError("n_max", e.what());
  }
}

json edges_json(const Graph& g) {
  json edges = json::array();
  for (const auto& [i, j] : g.canonical_edges()) edges.push_back({i, j});
  return edges;
}

json features_json(const Matrix& x) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    rows.push_back(std::vector<double>(x.row(r).data(), x.row(r).data() + x.cols()));
  }
  return rows;
}

json mask_json(const Mask& m) { return std::vector<int>(m.begin(), m.end()); }

Graph random_graph(int n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (coin(rng)) edges.emplace_back(i, j);
    }
  }
  return Graph(n, edges);
}

json graph_item_json(const Graph& g, double target) {
  return {{"num_nodes", g.num_nodes()},
          {"edges", edges_json(g)},
          {"node_features", features_json(Matrix::Ones(g.num_nodes(), 1))},
          {"target", target}};
}

void check_params(const SyntheticParams& p) {
  if (p.clique < 2) throw std::invalid_argument("synthetic: clique size must be >= 2");
  if (p.count < 1) throw std::invalid_argument("synthetic: count must be >= 1");
  if (p.n_min < 1 || p.n_max < p.n_min) throw std::invalid_argument("synthetic: need 1 <= n_min <= n_max");
  for (double q : {p.p_in, p.p_out}) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("synthetic: probabilities must lie in [0, 1]");
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_row(std::ostream& out, std::string_view prefix, const auto& row) {
  out << prefix;
  for (Eigen::Index c = 0; c < row.size(); ++c) out << ',' << format_double(row(c));
  out << '\n';
}

std::string column_header(std::string_view prefix, Eigen::Index cols) {
  std::string h(prefix);
  for (Eigen::Index c = 0; c < cols; ++c) h += ",c" + std::to_string(c);
  return h;
}

}  // namespace

Dataset parse_dataset(const nlohmann::json& doc, std::uint64_t split_seed) {
  if (!doc.is_object()) throw DatasetError("<root>", "expected an object");
  if (doc.contains("graphs")) return parse_graph_collection(doc);
  if (doc.contains("num_nodes")) return parse_node_dataset(doc, split_seed);
  throw DatasetError("<root>", "expected either \"graphs\" or \"num_nodes\"");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path, std::uint64_t split_seed) {
  return parse_dataset(read_json(path), split_seed);
}

nlohmann::json dataset_to_json(const NodeDataset& data) {
  return {{"num_nodes", data.num_nodes()},
          {"edges", edges_json(data.graph)},
          {"node_features", features_json(data.features)},
          {"node_labels", data.labels},
          {"masks",
           {{"train", mask_json(data.masks.train)},
            {"val", mask_json(data.masks.val)},
            {"test", mask_json(data.masks.test)}}}};
}

nlohmann::json dataset_to_json(const GraphDatasetCollection& data) {
  json graphs = json::array();
  for (const GraphItem& item : data.items()) {
    graphs.push_back({{"num_nodes", item.graph.num_nodes()},
                      {"edges", edges_json(item.graph)},
                      {"node_features", features_json(item.features)},
                      {"target", item.target}});
  }
  return {{"n_max", data.n_max()}, {"graphs", std::move(graphs)}};
}

nlohmann::json graphs_to_json(const std::vector<Graph>& graphs) {
  json out = json::array();
  for (const Graph& g : graphs) out.push_back({{"num_nodes", g.num_nodes()}, {"edges", edges_json(g)}});
  return {{"graphs", std::move(out)}};
}

SyntheticKind parse_synthetic_kind(std::string_view text) {
  if (text == "two_clique") return SyntheticKind::two_clique;
  if (text == "edge_count") return SyntheticKind::edge_count;
  if (text == "communities") return SyntheticKind::communities;
  throw std::invalid_argument("unknown dataset kind '" + std::string(text) +
                              "' (expected two_clique, edge_count or communities)");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::two_clique: return "two_clique";
    case SyntheticKind::edge_count: return "edge_count";
    case SyntheticKind::communities: return "communities";
  }
  return "?";
}

nlohmann::json generate_synthetic(SyntheticKind kind, const SyntheticParams& params, std::uint64_t seed) {
  check_params(params);
  std::mt19937_64 rng(seed);
  if (kind == SyntheticKind::two_clique) {
    const int c = params.clique;
    std::vector<Edge> edges;
    for (int block = 0; block < 2; ++block) {
      for (int i = 0; i < c; ++i) {
        for (int j = i + 1; j < c; ++j) edges.emplace_back(block * c + i, block * c + j);
      }
    }
    edges.emplace_back(c - 1, c);
    NodeDataset data;
    data.graph = Graph(2 * c, edges);
    data.features = Matrix::Identity(2 * c, 2 * c);
    for (int i = 0; i < 2 * c; ++i) data.labels.push_back(i < c ? 0 : 1);
    data.masks = split_nodes(2 * c, {}, seed);
    return dataset_to_json(data);
  }

  std::uniform_int_distribution<int> size(params.n_min, params.n_max);
  std::uniform_real_distribution<double> density(0.1, 0.9);
  json graphs = json::array();
  for (int g = 0; g < params.count; ++g) {
    const int n = size(rng);
    Graph graph;
    if (kind == SyntheticKind::edge_count) {
      graph = random_graph(n, density(rng), rng);
    } else {
      const int half = n / 2;
      std::bernoulli_distribution inner(params.p_in), cross(params.p_out);
      std::vector<Edge> edges;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const bool same = (i < half) == (j < half);
          if (same ? inner(rng) : cross(rng)) edges.emplace_back(i, j);
        }
      }
      graph = Graph(n, edges);
    }
    graphs.push_back(graph_item_json(graph, static_cast<double>(graph.num_undirected_edges())));
  }
  return {{"n_max", params.n_max}, {"graphs", std::move(graphs)}};
}

void write_synthetic(SyntheticKind kind, const SyntheticParams& params, std::uint64_t seed,
                     const std::filesystem::path& path) {
  write_json(generate_synthetic(kind, params, seed), path);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << column_header("row", m.cols()) << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) write_row(out, std::to_string(r), m.row(r));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("row", 0) != 0) {
    throw std::runtime_error(path.string() + ": missing header line");
  }
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    Eigen::Index c = 0;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw std::runtime_error(path.string() + ": row " + std::to_string(rows) + " has a non-numeric cell");
      }
      values.push_back(v);
      ++c;
    }
    if (c != cols) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(rows) + " has " + std::to_string(c) +
                               " values, expected " + std::to_string(cols));
    }
    ++rows;
  }
  return Eigen::Map<const Matrix>(values.data(), rows, cols);
}

std::vector<std::filesystem::path> export_weights(std::span<const Parameter* const> params,
                                                  const std::filesystem::path& dir, const std::string& prefix) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const Parameter* p : params) {
    written.push_back(dir / (prefix + p->name + ".csv"));
    write_matrix_csv(p->value, written.back());
  }
  return written;
}

void write_metrics_csv(const MetricsHistory& history, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "epoch,train_metric,val_metric,test_metric\n";
  for (const MetricsRow& row : history) {
    out << row.epoch << ',' << format_double(row.train) << ',' << format_double(row.val) << ','
        << format_double(row.test) << '\n';
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void export_gate_values(Model& model, const Dataset& data, int center, const std::filesystem::path& dir) {
  if (!model.has_adaptive_layers()) {
    throw std::invalid_argument("export_gate_values: model '" + to_string(model.spec()) +
                                "' has no adaptive gconv layer (use adp_gcn_{...})");
  }
  if (center < 0 || center >= model.num_nodes()) {
    throw std::out_of_range("export_gate_values: center node " + std::to_string(center) + " outside [0, " +
                            std::to_string(model.num_nodes()) + ")");
  }
  std::filesystem::create_directories(dir);
  auto gates = open_for_write(dir / "gates.csv");
  auto centers = open_for_write(dir / "center_gates.csv");
  gates << column_header("graph,layer,order,row", model.num_nodes()) << '\n';
  centers << column_header("graph,layer,order,center", model.num_nodes()) << '\n';

  auto emit = [&](std::size_t graph) {
    return [&, graph](std::size_t layer, int order, const Matrix& gate) {
      const std::string key = std::to_string(graph) + ',' + std::to_string(layer) + ',' + std::to_string(order);
      for (Eigen::Index r = 0; r < gate.rows(); ++r) write_row(gates, key + ',' + std::to_string(r), gate.row(r));
      write_row(centers, key + ',' + std::to_string(center), gate.row(center));
    };
  };

  if (const auto* node = std::get_if<NodeDataset>(&data)) {
    if (node->num_nodes() != model.num_nodes() || node->features.cols() != model.input_width()) {
      throw ShapeError("export_gate_values: dataset does not match the model's node count or feature width");
    }
    const ClippedPowers powers(adjacency_from_graph(node->graph), model.orders());
    Tape tape;
    ForwardOptions opts;
    opts.gate_observer = emit(0);
    model.forward(tape, powers, tape.constant(node->features), opts);
  } else {
    const auto& graphs = std::get<GraphDatasetCollection>(data);
    if (graphs.n_max() != model.num_nodes() || graphs.feature_width() != model.input_width()) {
      throw ShapeError("export_gate_values: dataset does not match the model's node capacity or feature width");
    }
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      const ClippedPowers powers(graphs.padded(g).adjacency, model.orders());
      Tape tape;
      ForwardOptions opts;
      opts.gate_observer = emit(g);
      model.forward(tape, powers, tape.constant(graphs.padded(g).features), opts);
    }
  }
  if (!gates || !centers) throw std::runtime_error("cannot write gate files in " + dir.string());
}

nlohmann::json checkpoint_json(std::string_view task, const Model& model) {
  return {{"format", "hagcn-checkpoint"}, {"version", 1}, {"task", task}, {"model", model.to_json()}};
}

nlohmann::json checkpoint_json(const VaeModel& model) {
  return {{"format", "hagcn-checkpoint"}, {"version", 1}, {"task", "vae"}, {"vae", model.to_json()}};
}

Checkpoint parse_checkpoint(const nlohmann::json& doc) {
  if (field(doc, "format", "").get<std::string>() != "hagcn-checkpoint") {
    throw DatasetError("format", "not a checkpoint document");
  }
  if (as_int(field(doc, "version", ""), "version") != 1) throw DatasetError("version", "unsupported version");
  Checkpoint out;
  out.task = field(doc, "task", "").get<std::string>();
  try {
    if (out.task == "vae") {
      out.vae = VaeModel::from_json(field(doc, "vae", ""));
    } else if (out.task == "node" || out.task == "graph") {
      out.model = Model::from_json(field(doc, "model", ""));
    } else {
      throw DatasetError("task", "unknown task '" + out.task + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(out.task == "vae" ? "vae" : "model", e.what());
  }
  return out;
}

}  // namespace hagcn
