#pragma once

#include <cstdint>
#include <filesystem>

#include "diaurec/autodiff.hpp"
#include "diaurec/data_core.hpp"
#include "diaurec/matrix.hpp"
#include "diaurec/rng.hpp"

namespace diaurec {

// Raw high-dimensional semantic vectors, one row per user / item.
struct SemanticStore {
  Matrix raw_user;
  Matrix raw_item;

  std::size_t source_dim() const noexcept { return raw_user.cols(); }
};

enum class Activation { Tanh, Identity };

// Two-layer projector D_s -> hidden -> d with an elementwise activation
// (tanh unless overridden). Weights are stored output-major (out × in),
// applied as x·Wᵀ + b.
struct ProjectorParams {
  Matrix w1;  // hidden × D_s
  Matrix b1;  // 1 × hidden
  Matrix w2;  // d × hidden
  Matrix b2;  // 1 × d
  Activation activation = Activation::Tanh;

  std::size_t input_dim() const noexcept { return w1.cols(); }
  std::size_t hidden_dim() const noexcept { return w1.rows(); }
  std::size_t output_dim() const noexcept { return w2.rows(); }

  // Glorot-uniform weights, zero biases.
  static ProjectorParams init(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, Rng& rng);
};

struct ProjectedSemantics {
  Matrix user;  // M × d, unit rows
  Matrix item;  // N × d, unit rows
};

// Binary layout: u64 LE rows, u64 LE cols, then row-major float32.
// Paths ending in .tsv / .txt use tab-separated decimal rows instead; both
// are held at float32 precision.
void write_semantic_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_semantic_matrix(const std::filesystem::path& path);

SemanticStore load_semantic_vectors(const std::filesystem::path& user_path, const std::filesystem::path& item_path,
                                    std::size_t expected_users, std::size_t expected_items);

SemanticStore synth_semantic_vectors(const InteractionGraph& graph, std::size_t source_dim, std::size_t cluster_count,
                                     double noise_scale, std::uint64_t seed);

// Projector forward on raw rows; rows are unit-normalized.
Matrix project_rows(const Matrix& raw, const ProjectorParams& params);
ProjectedSemantics project_semantic(const SemanticStore& store, const ProjectorParams& params);

struct ProjectorVars {
  ad::Var w1, b1, w2, b2;
};

// Same map recorded on a tape; returns unit-normalized rows.
ad::Var project_rows(ad::Tape& tape, ad::Var raw, const ProjectorVars& params,
                     Activation activation = Activation::Tanh);

}  // namespace diaurec
