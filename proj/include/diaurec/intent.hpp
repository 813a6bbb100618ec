#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "diaurec/data_core.hpp"
#include "diaurec/matrix.hpp"
#include "diaurec/rng.hpp"
#include "diaurec/semantic.hpp"

namespace diaurec {

struct IntentBank {
  Matrix proto_bank;  // K × d prototype intents
  Matrix dist_bank;   // K × d distribution intents
  Matrix dist_proj;   // K × d affinity projection
  double eta = 1.0;   // assignment temperature
  double kappa = 10.0;  // vMF concentration

  std::size_t intent_count() const noexcept { return proto_bank.rows(); }
};

struct ModelState {
  Matrix user_mu;  // M × d
  Matrix item_mu;  // N × d
  IntentBank bank;
  ProjectorParams projector;
  Matrix coarse_map;  // d × d

  std::size_t dim() const noexcept { return user_mu.cols(); }

  struct InitOptions {
    std::size_t users = 0, items = 0, dim = 32, intents = 128, source_dim = 64, hidden = 128;
    double eta = 1.0, kappa = 10.0, init_std = 0.1;
  };
  static ModelState init(const InitOptions& options, Rng& rng);

  // Trainable tensors in a fixed order; names double as checkpoint keys.
  std::vector<std::pair<std::string, Matrix*>> trainable();
  std::vector<std::pair<std::string, const Matrix*>> trainable() const;

  // Throws Numeric naming the first tensor holding a NaN/inf.
  void check_finite() const;
};

enum class EpsilonMode { TrainGaussian, EvalOnes, Zero };

EpsilonMode parse_epsilon_mode(const std::string& name);

// Softmax over prototype affinities s·c_k / eta.
Matrix prototype_assign(const Matrix& s, const Matrix& proto_bank, double eta);

// One vMF(direction(mean row), kappa) draw per row via Wood's rejection
// sampler for the cosine to the mean and a uniform tangent direction.
Matrix vmf_sample(const Matrix& mean, double kappa, Rng& rng);

// Softmax over affinities h·W^Dis_k / eta.
Matrix distribution_assign(const Matrix& h, const Matrix& dist_proj, double eta);

// Convex combination probs·bank; rows of probs must sum to 1.
Matrix mix_intents(const Matrix& probs, const Matrix& bank);

Matrix layer_mean(const std::vector<Matrix>& layers);

// layer_mean + (c_pro + c_dis) ⊙ ε, before normalization.
Matrix reconstruct_raw(const std::vector<Matrix>& layers, const Matrix& c_pro, const Matrix& c_dis, EpsilonMode mode,
                       Rng& rng);
// reconstruct_raw with unit-normalized rows.
Matrix reconstruct(const std::vector<Matrix>& layers, const Matrix& c_pro, const Matrix& c_dis, EpsilonMode mode,
                   Rng& rng);

double score(std::span<const double> z_user, std::span<const double> z_item);
double logistic(double x);
inline double score_prob(std::span<const double> z_user, std::span<const double> z_item) {
  return logistic(score(z_user, z_item));
}

// Σ_k σ((z_u + c_k)·(z_v + c_k)) p_pro[k] p_dis[k], c_k = (c^Pro_k + c^Dis_k)/2.
double intent_marginal_prob(std::span<const double> z_user, std::span<const double> z_item,
                            std::span<const double> probs_pro, std::span<const double> probs_dis,
                            const IntentBank& bank);

struct EncoderOptions {
  std::size_t layers = 2;
  bool use_dual_intent = true;
  // Extra 1/deg(x) factor on the layer mean (literal reading of the
  // reconstruction prefactor); off by default.
  bool neighbor_scaling = false;
};

struct Representations {
  Matrix user;  // M × d, unit rows
  Matrix item;  // N × d, unit rows
};

// Deterministic full-population encoding used for ranking: ε = 1 and the
// vMF draw replaced by its mode (the mean direction).
Representations encode_for_ranking(const ModelState& state, const InteractionGraph& graph,
                                   const SemanticStore& semantics, const EncoderOptions& options);

// Rounds every stored tensor to the float32 precision of checkpoints.
void round_to_checkpoint_precision(ModelState& state);

void save_checkpoint(const std::filesystem::path& path, const ModelState& state);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace diaurec
