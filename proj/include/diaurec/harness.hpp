#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diaurec/data_core.hpp"
#include "diaurec/diagnostics.hpp"
#include "diaurec/evaluator.hpp"
#include "diaurec/trainer.hpp"

namespace diaurec {

// Root for relative output directories; DIAUREC_OUT_ROOT or "runs".
std::filesystem::path default_output_root();

struct SyntheticOptions {
  std::size_t users = 300;
  std::size_t items = 200;
  std::size_t clusters = 5;
  std::size_t per_user = 30;
  double purity = 0.9;
  std::size_t semantic_dim = 64;
  double semantic_noise = 0.1;
};

struct PrepareOptions {
  std::optional<std::filesystem::path> raw;  // interactions TSV; synthetic when absent
  std::optional<double> min_rating;
  std::size_t k = 5;
  std::uint64_t seed = 2024;
  SyntheticOptions synthetic;
  std::filesystem::path out_dir;
};

struct PrepareResult {
  DatasetStats stats;
  DatasetSplit split;
};

// Writes train/valid/test.tsv, dataset_stats.json, split.json and, for
// synthetic data, user/item semantic matrices.
PrepareResult run_prepare(const PrepareOptions& options);

struct ExperimentSpec {
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> user_semantic, item_semantic;
  TrainConfig config;  // defaults, then config file
  std::string variant = "full";
  std::map<std::string, std::string> overrides;  // command-line keys, applied after the variant
  std::vector<std::uint64_t> seeds{2024};
  std::filesystem::path out_dir;
};

// config → variant preset → overrides, validated.
TrainConfig effective_config(const ExperimentSpec& spec);

// Loads the prepared split plus semantic vectors: explicit paths first,
// then the dataset directory, then a synthetic fallback from `config`.
TrainingData load_training_data(const ExperimentSpec& spec);

struct SeedOutcome {
  std::uint64_t seed = 0;
  TrainReport report;
  MetricsReport test;
};

struct TrainOutcome {
  std::vector<SeedOutcome> seeds;
  std::vector<CutoffMetrics> mean;
};

// Applies the variant to the config, fits each seed and writes metrics.json,
// sparsity_groups.json, train_log.jsonl, train_report.json, config.txt and
// one checkpoint per seed into spec.out_dir.
TrainOutcome run_train(const ExperimentSpec& spec);

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::uint64_t seed);

// Ranks the test split with a saved model; `config` supplies the encoder
// settings the model was trained with.
MetricsReport run_evaluate(const std::filesystem::path& checkpoint, const ExperimentSpec& spec);

struct AblationRow {
  std::string variant;
  bool ok = false;
  std::string error;
  std::vector<double> recall, ndcg;  // per seed, @20
  double recall_mean = 0.0, recall_std = 0.0, ndcg_mean = 0.0, ndcg_std = 0.0;
};

// Runs each variant into out_dir/<variant>; a failing variant becomes an
// "error" row. Writes ablation.tsv, ablation.json and significance.json.
std::vector<AblationRow> run_ablation_matrix(const ExperimentSpec& base, const std::vector<std::string>& variants);

void write_ablation_table(const std::filesystem::path& path, const std::vector<AblationRow>& rows);
std::vector<AblationRow> read_ablation_table(const std::filesystem::path& path);

struct DiagnosticsOptions {
  std::filesystem::path checkpoint;
  std::optional<ExperimentSpec> data;  // enables alignment and ranking-mode geometry
  std::filesystem::path out_dir;
  std::size_t sample_size = 256;
  std::size_t instances = 20;
  std::uint64_t seed = 2024;
  KernelConvention convention;
};

struct DiagnosticsResult {
  GeometryReport geometry;
  GradientCheckReport gradients;
};

// Writes geometry.json, gradient_check.json and gradient_norms.tsv.
DiagnosticsResult run_diagnostics(const DiagnosticsOptions& options);

}  // namespace diaurec
