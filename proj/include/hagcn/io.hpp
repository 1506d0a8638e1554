#pragma once

#include "hagcn/pipelines.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace hagcn {

/// Schema violation in a dataset, config or checkpoint document. The message
/// starts with the offending field path.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

using Dataset = std::variant<NodeDataset, GraphDatasetCollection>;

/// Node files without "masks" are split 7:1.5:1.5 with split_seed.
Dataset parse_dataset(const nlohmann::json& doc, std::uint64_t split_seed = 0);
Dataset load_dataset(const std::filesystem::path& path, std::uint64_t split_seed = 0);

nlohmann::json dataset_to_json(const NodeDataset& data);
nlohmann::json dataset_to_json(const GraphDatasetCollection& data);
nlohmann::json graphs_to_json(const std::vector<Graph>& graphs);

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes doc with two-space indentation and a trailing newline.
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);

// Synthetic datasets

enum class SyntheticKind { two_clique, edge_count, communities };

SyntheticKind parse_synthetic_kind(std::string_view text);
std::string to_string(SyntheticKind kind);

struct SyntheticParams {
  /// Clique size for two_clique.
  int clique = 10;
  /// Graph count for edge_count and communities.
  int count = 200;
  int n_min = 3;
  int n_max = 8;
  double p_in = 0.8;
  double p_out = 0.05;
};

/// two_clique: two cliques joined by one edge, one-hot node-id features, clique labels.
/// edge_count: Erdős–Rényi graphs with a random density per graph, constant
/// features, target = edge count.
/// communities: two contiguous index blocks with dense inner and sparse
/// cross edges, constant features, target = edge count.
nlohmann::json generate_synthetic(SyntheticKind kind, const SyntheticParams& params, std::uint64_t seed);
void write_synthetic(SyntheticKind kind, const SyntheticParams& params, std::uint64_t seed,
                     const std::filesystem::path& path);

// CSV export

/// Formats with 17 significant digits so values parse back exactly.
std::string format_double(double v);

/// Header `row,c0,..,c{cols-1}`, then one line per matrix row.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// One `<prefix><name>.csv` per parameter; returns the written paths.
std::vector<std::filesystem::path> export_weights(std::span<const Parameter* const> params,
                                                  const std::filesystem::path& dir, const std::string& prefix = "");

/// `epoch,train_metric,val_metric,test_metric`.
void write_metrics_csv(const MetricsHistory& history, const std::filesystem::path& path);

/// Evaluation-mode gate matrices of every adaptive layer. Writes gates.csv
/// (`graph,layer,order,row,c0..`, one line per gate row) and center_gates.csv
/// (the row of `center` for each graph, layer and order).
void export_gate_values(Model& model, const Dataset& data, int center, const std::filesystem::path& dir);

// Checkpoints

nlohmann::json checkpoint_json(std::string_view task, const Model& model);
nlohmann::json checkpoint_json(const VaeModel& model);

struct Checkpoint {
  std::string task;
  std::optional<Model> model;
  std::optional<VaeModel> vae;
};

Checkpoint parse_checkpoint(const nlohmann::json& doc);

}  // namespace hagcn
