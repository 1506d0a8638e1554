#include "hagcn/cli.hpp"

#include "hagcn/gradient_suite.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <utility>

namespace hagcn {
namespace {

using nlohmann::json;

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "adam") return OptimizerKind::adam;
  if (text == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer '" + std::string(text) + "' (expected adam or sgd)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

template <typename T>
T config_value(const json& doc, const std::string& key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DatasetError(key, e.what());
  }
}

json row_json(const MetricsRow& row) {
  return {{"epoch", row.epoch},
          {"loss", row.loss},
          {"train_metric", row.train},
          {"val_metric", row.val},
          {"test_metric", row.test}};
}

json base_summary(const RunConfig& config, const char* metric, const MetricsHistory& history) {
  const TrainingConfig& t = config.training;
  return {{"task", to_string(config.task)},
          {"arch", config.arch},
          {"metric", metric},
          {"epochs", t.epochs},
          {"lr", t.learning_rate},
          {"dropout", t.dropout_rate},
          {"l2", t.l2_coefficient},
          {"seed", t.seed},
          {"optimizer", to_string(t.optimizer)},
          {"gate_variant", to_string(t.gate_variant)},
          {"final", row_json(history.back())}};
}

template <typename T>
const T& expect_dataset(const Dataset& data, const char* command, const char* kind) {
  const T* out = std::get_if<T>(&data);
  if (out == nullptr) throw std::runtime_error(std::string(command) + ": expected a " + kind + " dataset");
  return *out;
}

struct TrainFlags {
  std::string config;
  std::string arch;
  int epochs = 0;
  double lr = 0.0;
  double dropout = 0.0;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  std::string optimizer;
  std::string gate;
  int batch_size = 0;
  std::string data;
  std::string out;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* dropout_opt = nullptr;
  CLI::Option* l2_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
};

void add_train_flags(CLI::App& sub, TrainFlags& f) {
  sub.add_option("--config", f.config, "JSON run configuration; flags override its values")
      ->check(CLI::ExistingFile);
  sub.add_option("--arch", f.arch, "architecture string");
  f.epochs_opt = sub.add_option("--epochs", f.epochs, "training epochs")->check(CLI::PositiveNumber);
  f.lr_opt = sub.add_option("--lr", f.lr, "learning rate")->check(CLI::NonNegativeNumber);
  f.dropout_opt = sub.add_option("--dropout", f.dropout, "dropout rate in [0, 1)")->check(CLI::Range(0.0, 1.0));
  f.l2_opt = sub.add_option("--l2", f.l2, "L2 coefficient")->check(CLI::NonNegativeNumber);
  f.seed_opt = sub.add_option("--seed", f.seed, "run seed");
  sub.add_option("--optimizer", f.optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  sub.add_option("--gate-variant", f.gate, "gate form for adp_ layers")->check(CLI::IsMember({"prod", "lin"}));
  f.batch_opt = sub.add_option("--batch-size", f.batch_size, "graphs per step")->check(CLI::PositiveNumber);
  sub.add_option("--data", f.data, "dataset JSON");
  sub.add_option("--out", f.out, "output directory");
}

RunConfig resolve(Task task, const TrainFlags& f) {
  RunConfig config;
  config.task = task;
  config.arch = default_arch(task);
  if (!f.config.empty()) apply_config_json(read_json(f.config), config);
  if (!f.arch.empty()) {
    config.arch = f.arch;
    if (task == Task::vae) config.vae.encoder_arch = f.arch;
  }
  if (f.epochs_opt->count() != 0) config.training.epochs = f.epochs;
  if (f.lr_opt->count() != 0) config.training.learning_rate = f.lr;
  if (f.dropout_opt->count() != 0) config.training.dropout_rate = f.dropout;
  if (f.l2_opt->count() != 0) config.training.l2_coefficient = f.l2;
  if (f.seed_opt->count() != 0) config.training.seed = f.seed;
  if (!f.optimizer.empty()) config.training.optimizer = parse_optimizer(f.optimizer);
  if (!f.gate.empty()) config.training.gate_variant = parse_gate_variant(f.gate);
  if (f.batch_opt->count() != 0) config.training.batch_size = f.batch_size;
  if (!f.data.empty()) config.data = f.data;
  if (!f.out.empty()) config.out = f.out;
  if (config.data.empty()) throw CLI::RequiredError("--data");
  if (config.out.empty()) throw CLI::RequiredError("--out");
  return config;
}

void print_final(std::ostream& log, const json& summary) {
  const json& last = summary.at("final");
  auto show = [](const json& v) { return v.is_null() ? std::string("nan") : format_double(v.get<double>()); };
  log << summary.at("task").get<std::string>() << ": epoch " << last.at("epoch").get<int>() << ' '
      << summary.at("metric").get<std::string>() << " train=" << show(last.at("train_metric"))
      << " val=" << show(last.at("val_metric")) << " test=" << show(last.at("test_metric")) << '\n';
}

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::node: return "node";
    case Task::graph: return "graph";
    case Task::vae: return "vae";
  }
  return "?";
}

std::string default_arch(Task task) {
  switch (task) {
    case Task::node: return "gcn_{1,2}-fc128-gcn_{1,2}-fc1-softmax";
    case Task::graph: return "gcn_{1,2,3}-ReLU-fc64-ReLU-fc16-ReLU-fc1";
    case Task::vae: return VaeOptions{}.encoder_arch;
  }
  return {};
}

void apply_config_json(const nlohmann::json& doc, RunConfig& config) {
  if (!doc.is_object()) throw DatasetError("<config>", "expected an object");
  static const char* const kKeys[] = {"task",       "arch", "epochs",       "lr",           "dropout",
                                      "l2",         "seed", "optimizer",    "gate_variant", "batch_size",
                                      "data",       "out",  "encoder_arch", "decoder_arch", "latent_dim",
                                      "embed_dim"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw DatasetError(key, "unknown configuration key");
    }
  }
  if (doc.contains("task") && config_value<std::string>(doc, "task") != to_string(config.task)) {
    throw DatasetError("task", "config is for task '" + config_value<std::string>(doc, "task") + "', command runs '" +
                                   to_string(config.task) + "'");
  }
  if (doc.contains("arch")) {
    config.arch = config_value<std::string>(doc, "arch");
    if (config.task == Task::vae) config.vae.encoder_arch = config.arch;
  }
  TrainingConfig& t = config.training;
  if (doc.contains("epochs")) t.epochs = config_value<int>(doc, "epochs");
  if (doc.contains("lr")) t.learning_rate = config_value<double>(doc, "lr");
  if (doc.contains("dropout")) t.dropout_rate = config_value<double>(doc, "dropout");
  if (doc.contains("l2")) t.l2_coefficient = config_value<double>(doc, "l2");
  if (doc.contains("seed")) t.seed = config_value<std::uint64_t>(doc, "seed");
  if (doc.contains("optimizer")) t.optimizer = parse_optimizer(config_value<std::string>(doc, "optimizer"));
  if (doc.contains("gate_variant")) t.gate_variant = parse_gate_variant(config_value<std::string>(doc, "gate_variant"));
  if (doc.contains("batch_size")) t.batch_size = config_value<int>(doc, "batch_size");
  if (doc.contains("data")) config.data = config_value<std::string>(doc, "data");
  if (doc.contains("out")) config.out = config_value<std::string>(doc, "out");
  if (doc.contains("encoder_arch")) config.vae.encoder_arch = config_value<std::string>(doc, "encoder_arch");
  if (doc.contains("decoder_arch")) config.vae.decoder_arch = config_value<std::string>(doc, "decoder_arch");
  if (doc.contains("latent_dim")) config.vae.latent_dim = config_value<int>(doc, "latent_dim");
  if (doc.contains("embed_dim")) config.vae.embed_dim = config_value<int>(doc, "embed_dim");
}

nlohmann::json run_training(const RunConfig& config, std::ostream& log) {
  config.training.validate();
  const Dataset data = load_dataset(config.data, config.training.seed);
  std::filesystem::create_directories(config.out);
  json summary;

  switch (config.task) {
    case Task::node: {
      const auto& nodes = expect_dataset<NodeDataset>(data, "train-node", "node-centric");
      NodeRun run = train_node_classifier(nodes, config.arch, config.training);
      write_metrics_csv(run.history, config.out / "metrics.csv");
      write_json(checkpoint_json("node", run.model), config.out / "checkpoint.json");
      summary = base_summary(config, "accuracy", run.history);
      summary["num_classes"] = nodes.num_classes();
      break;
    }
    case Task::graph: {
      const auto& graphs = expect_dataset<GraphDatasetCollection>(data, "train-graph", "graph-centric");
      GraphRun run = train_graph_regressor(graphs, config.arch, config.training);
      write_metrics_csv(run.history, config.out / "metrics.csv");
      write_json(checkpoint_json("graph", run.model), config.out / "checkpoint.json");
      summary = base_summary(config, "rmse", run.history);
      summary["baseline_rmse"] = run.baseline_rmse;
      break;
    }
    case Task::vae: {
      const auto& graphs = expect_dataset<GraphDatasetCollection>(data, "train-vae", "graph-centric");
      VaeRun run = train_vae(graphs, config.training, config.vae);
      write_metrics_csv(run.history, config.out / "metrics.csv");
      write_json(checkpoint_json(run.model), config.out / "checkpoint.json");
      summary = base_summary(config, "auc", run.history);
      summary["arch"] = config.vae.encoder_arch;
      summary["decoder_arch"] = config.vae.decoder_arch;
      summary["min_kl"] = *std::min_element(run.kl_per_step.begin(), run.kl_per_step.end());
      summary["final_kl"] = run.kl_per_step.back();
      break;
    }
  }
  write_json(summary, config.out / "summary.json");
  print_final(log, summary);
  return summary;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"High-order and adaptive graph convolution networks", "hagcn"};
  app.require_subcommand(1);

  TrainFlags node_flags, graph_flags, vae_flags;
  CLI::App* train_node = app.add_subcommand("train-node", "train a node classifier");
  add_train_flags(*train_node, node_flags);
  CLI::App* train_graph = app.add_subcommand("train-graph", "train a graph regressor");
  add_train_flags(*train_graph, graph_flags);
  CLI::App* train_vae_cmd = app.add_subcommand("train-vae", "train a graph variational auto-encoder");
  add_train_flags(*train_vae_cmd, vae_flags);

  std::uint64_t grad_seed = 0;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
  gradcheck->add_option("--seed", grad_seed, "seed for random inputs");

  std::string checkpoint, out_path, data_path;
  CLI::App* export_weights_cmd = app.add_subcommand("export-weights", "write every parameter of a checkpoint as CSV");
  export_weights_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  export_weights_cmd->add_option("--out", out_path, "output directory")->required();

  int count = 0;
  std::uint64_t sample_seed = 0;
  double threshold = 0.5;
  CLI::App* sample = app.add_subcommand("sample", "decode graphs from standard-normal latents");
  sample->add_option("--checkpoint", checkpoint, "VAE checkpoint")->required()->check(CLI::ExistingFile);
  sample->add_option("--count", count)->required()->check(CLI::NonNegativeNumber);
  sample->add_option("--seed", sample_seed);
  sample->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));
  sample->add_option("--out", out_path, "output graphs JSON")->required();

  std::string kind;
  SyntheticParams params;
  std::uint64_t data_seed = 0;
  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen->add_option("--kind", kind)->required()->check(CLI::IsMember({"two_clique", "edge_count", "communities"}));
  gen->add_option("--seed", data_seed);
  gen->add_option("--clique", params.clique, "clique size (two_clique)");
  gen->add_option("--count", params.count, "graph count");
  gen->add_option("--n-min", params.n_min);
  gen->add_option("--n-max", params.n_max);
  gen->add_option("--p-in", params.p_in, "edge probability inside a community");
  gen->add_option("--p-out", params.p_out, "edge probability across communities");
  gen->add_option("--out", out_path, "output dataset JSON")->required();

  int center = 0;
  CLI::App* gates = app.add_subcommand("export-gates", "write adaptive gate matrices as CSV");
  gates->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  gates->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
  gates->add_option("--center", center, "node whose gate row is written to center_gates.csv");
  gates->add_option("--out", out_path, "output directory")->required();

  RunConfig run;
  try {
    app.parse(argc, argv);
    if (train_node->parsed()) run = resolve(Task::node, node_flags);
    if (train_graph->parsed()) run = resolve(Task::graph, graph_flags);
    if (train_vae_cmd->parsed()) run = resolve(Task::vae, vae_flags);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const auto active = app.get_subcommands();
    err << "error: " << e.what() << "\n\n" << (active.empty() ? app.help() : active.front()->help());
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (train_node->parsed() || train_graph->parsed() || train_vae_cmd->parsed()) {
      run_training(run, out);
    } else if (gradcheck->parsed()) {
      bool all = true;
      for (const GradientCase& c : run_gradient_suite(grad_seed)) {
        all = all && c.report.passed;
        out << (c.report.passed ? "PASS " : "FAIL ") << c.name << " max_rel_err=" << format_double(c.report.max_relative_error)
            << " entries=" << c.report.entries_checked << '\n';
      }
      if (!all) {
        err << "gradcheck: at least one case exceeded the tolerance\n";
        return 2;
      }
    } else if (export_weights_cmd->parsed()) {
      Checkpoint cp = parse_checkpoint(read_json(checkpoint));
      std::vector<std::filesystem::path> written;
      if (cp.model) {
        const auto p = std::as_const(*cp.model).parameters();
        written = export_weights(p, out_path);
      } else {
        const auto enc = std::as_const(cp.vae->encoder()).parameters();
        const auto all = std::as_const(*cp.vae).parameters();
        const auto dec = std::as_const(cp.vae->decoder()).parameters();
        written = export_weights(enc, out_path, "encoder.");
        const std::vector<const Parameter*> heads(all.begin() + static_cast<std::ptrdiff_t>(enc.size()),
                                                  all.end() - static_cast<std::ptrdiff_t>(dec.size()));
        for (auto& p : export_weights(heads, out_path)) written.push_back(p);
        for (auto& p : export_weights(dec, out_path, "decoder.")) written.push_back(p);
      }
      out << "wrote " << written.size() << " parameter files to " << out_path << '\n';
    } else if (sample->parsed()) {
      Checkpoint cp = parse_checkpoint(read_json(checkpoint));
      if (!cp.vae) throw std::runtime_error("sample: checkpoint task is '" + cp.task + "', expected 'vae'");
      const auto graphs = sample_graphs(*cp.vae, count, sample_seed, threshold);
      write_json(graphs_to_json(graphs), out_path);
      out << "wrote " << graphs.size() << " graphs to " << out_path << '\n';
    } else if (gen->parsed()) {
      write_synthetic(parse_synthetic_kind(kind), params, data_seed, out_path);
      out << "wrote " << kind << " dataset to " << out_path << '\n';
    } else if (gates->parsed()) {
      Checkpoint cp = parse_checkpoint(read_json(checkpoint));
      if (!cp.model) throw std::runtime_error("export-gates: checkpoint task is '" + cp.task + "', expected node or graph");
      export_gate_values(*cp.model, load_dataset(data_path), center, out_path);
      out << "wrote gates.csv and center_gates.csv to " << out_path << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace hagcn
