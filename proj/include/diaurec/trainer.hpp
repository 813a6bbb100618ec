#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diaurec/data_core.hpp"
#include "diaurec/evaluator.hpp"
#include "diaurec/intent.hpp"
#include "diaurec/losses.hpp"
#include "diaurec/rng.hpp"
#include "diaurec/semantic.hpp"

namespace diaurec {

struct TrainConfig {
  std::size_t dim = 32;
  std::size_t batch = 4096;
  double lr = 1e-4;
  double tau = 0.2;
  double eta = 1.0;
  std::size_t intents = 128;
  double omega = 1.0;
  double lambda1 = 0.2;
  double lambda2 = 0.2;
  double weight_decay = 1e-6;
  std::size_t layers = 2;
  double kappa = 10.0;
  std::size_t epochs_max = 100;
  std::size_t patience = 5;
  std::uint64_t seed = 2024;
  LossToggles toggles;
  CoarseAnchor anchor = CoarseAnchor::Semantic;
  bool neighbor_scaling = false;
  std::size_t hidden = 0;  // 0 means 4 * dim
  double init_std = 0.1;
  std::size_t valid_cutoff = 20;
  // Assert unit norms / softmax row sums on every step.
  bool checked = false;
  // Used when the dataset ships no semantic vectors.
  std::size_t semantic_dim = 64;
  std::size_t semantic_clusters = 5;
  double semantic_noise = 0.1;

  std::size_t hidden_dim() const noexcept { return hidden ? hidden : 4 * dim; }
  LossWeights weights() const { return {omega, lambda1, lambda2, weight_decay}; }
  EncoderOptions encoder() const { return {layers, toggles.use_dual_intent, neighbor_scaling}; }

  // Throws InvalidArgument for an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  void validate() const;
};

// Flat "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);
void write_config_file(const std::filesystem::path& path, const TrainConfig& config);

// Named presets for the ablation, objective and depth variants.
const std::vector<std::string>& variant_names();
void apply_variant(TrainConfig& config, const std::string& variant);

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> first, second;
};

// Bias-corrected Adam over named tensors; Numeric error naming the tensor
// on a non-finite gradient.
void adam_step(const std::vector<std::pair<std::string, Matrix*>>& params, const std::vector<Matrix>& grads,
               AdamState& state, double lr);

struct Batch {
  std::vector<std::size_t> users;
  std::vector<std::size_t> items;
  std::vector<std::size_t> negatives;  // only for the BPR objective
  std::size_t negative_fallbacks = 0;  // negatives accepted after 100 rejected draws
};

// Uniform with replacement over train edges; BPR negatives are rejection
// sampled against the user's train items.
Batch sample_batch(const EdgeList& train, const std::vector<std::vector<std::size_t>>& train_items, std::size_t batch,
                   Objective objective, Rng& rng);

struct TrainingData {
  DatasetSplit split;
  InteractionGraph graph;
  SemanticStore semantics;
  std::vector<std::vector<std::size_t>> train_items;

  static TrainingData assemble(DatasetSplit split, SemanticStore semantics);
};

// Stochastic inputs of one batch: ε for the reconstruction and vMF
// directions h. Sampled from the batch's collaborative base rows and then
// treated as constants by the gradient.
struct BatchNoise {
  Matrix eps_user, eps_item, h_user, h_item;
};
using NoiseSource = std::function<BatchNoise(const Matrix& base_user, const Matrix& base_item)>;

NoiseSource random_noise(double kappa, Rng& vmf_rng, Rng& eps_rng);

struct InvariantStats {
  std::size_t unit_norm_checks = 0;
  std::size_t softmax_row_checks = 0;
  double max_norm_error = 0.0;
  double max_row_sum_error = 0.0;
};

struct StepResult {
  LossBreakdown losses;
  std::vector<Matrix> grads;  // aligned with ModelState::trainable()
};

// Builds the full objective for one batch on a tape and returns every
// component plus gradients w.r.t. all trainable tensors. When `checks` is
// given, unit norms and softmax row sums are verified (Numeric on failure).
StepResult loss_and_gradients(const ModelState& state, const TrainingData& data, const Batch& batch,
                              const NoiseSource& noise, const TrainConfig& config, InvariantStats* checks = nullptr);

struct TrainStreams {
  Rng batch, vmf, epsilon;
  explicit TrainStreams(std::uint64_t seed);
};

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossBreakdown losses;
  std::size_t negative_fallbacks = 0;
};
using StepLogger = std::function<void(const StepRecord&)>;

// One pass of ⌈|train|/batch⌉ batches; returns the mean breakdown.
LossBreakdown train_epoch(ModelState& state, const TrainingData& data, const TrainConfig& config, AdamState& adam,
                          TrainStreams& streams, std::size_t epoch, const StepLogger& log = {},
                          InvariantStats* checks = nullptr);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown losses;
  double valid_recall = 0.0;
  double seconds = 0.0;
};

enum class Termination { Patience, MaxEpochs };

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_valid_recall = 0.0;
  Termination termination = Termination::MaxEpochs;
  InvariantStats invariants;
};

// Validation Recall@valid_cutoff with ranking-mode representations.
double validation_recall(const ModelState& state, const TrainingData& data, const TrainConfig& config);

// Epoch loop with early stopping on validation recall; `state` ends as the
// best epoch's parameters.
TrainReport fit(ModelState& state, const TrainingData& data, const TrainConfig& config, const StepLogger& log = {},
                const std::function<double(const ModelState&)>& validator = {});

ModelState init_model(const TrainingData& data, const TrainConfig& config);

std::string to_string(Termination t);

}  // namespace diaurec
