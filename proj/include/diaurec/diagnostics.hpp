#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "diaurec/data_core.hpp"
#include "diaurec/matrix.hpp"

namespace diaurec {

// Two kernel conventions for the pairwise uniformity term:
//   default: log mean exp(−2‖z_m − z_n‖²), gradient −8 Σ_n π_mn (z_m − z_n)
//   unit_kernel: log mean exp(−‖z_m − z_n‖²), gradient −4 Σ_n π_mn (z_m − z_n)
// π_mn are the ordered-pair kernel weights normalized by their global sum.
struct KernelConvention {
  bool unit_kernel = false;

  double kernel_scale() const noexcept { return unit_kernel ? 1.0 : 2.0; }
  double gradient_coefficient() const noexcept { return 4.0 * kernel_scale(); }
  std::string describe() const;
};

double uniform_value(const Matrix& z, KernelConvention conv = {});

// Normalized pair weights π (B×B, zero diagonal, entries sum to 1).
Matrix pair_weights(const Matrix& z, KernelConvention conv = {});

Matrix uniform_grad_closed_form(const Matrix& z, KernelConvention conv = {});

struct LaplacianForm {
  Matrix gradient;  // −c · L · Z
  Matrix weights;   // W = π
  Matrix laplacian; // D − W
};

// Throws Numeric if −c·L·Z drifts from the per-row closed form by > 1e-10.
LaplacianForm laplacian_form(const Matrix& z, KernelConvention conv = {});

// tr(ZᵀLZ); throws Numeric if it drifts from ½ Σ w_mn ‖z_m − z_n‖² by > 1e-10.
double laplacian_energy(const Matrix& z, KernelConvention conv = {});

// Per-row projection of g onto the tangent space of the unit rows of z.
Matrix tangent_project(const Matrix& g, const Matrix& z);

// Central finite differences of uniform_value.
Matrix uniform_grad_numeric(const Matrix& z, double step, KernelConvention conv = {});

inline constexpr std::size_t kHistogramBins = 16;

struct GeometryReport {
  std::size_t user_sample = 0, item_sample = 0, pair_sample = 0;
  double alignment = 0.0;
  double uniformity_user = 0.0, uniformity_item = 0.0;
  double energy_user = 0.0, energy_item = 0.0;
  std::vector<double> grad_norm_user, grad_norm_item;  // ambient uniformity gradient norms
  // Cosine of each sampled item to its nearest sampled neighbour, binned
  // uniformly over [−1, 1].
  std::array<std::size_t, kHistogramBins> nn_cosine_histogram{};
};

// Samples up to `sample_size` rows of each population and of `pairs`
// (all rows, in order, when the population is small enough).
GeometryReport measure_geometry(const Matrix& user_z, const Matrix& item_z, const EdgeList& pairs,
                                std::size_t sample_size, std::uint64_t seed);

struct GradientCheckReport {
  std::string convention;
  std::size_t instances = 0;
  double fd_step = 1e-5;
  double max_fd_error = 0.0;          // closed form vs finite differences
  double max_closed_form_gap = 0.0;   // closed form vs Laplacian form
  double max_row_sum = 0.0;           // ‖Σ_m grad_m‖
  double max_energy_gap = 0.0;        // trace vs pairwise energy
  double max_rotation_gap = 0.0;      // energy before/after a random rotation
  double max_tangent_error = 0.0;     // tangent projection vs normalized FD
  bool passed = false;
  std::vector<std::string> failures;
};

// Runs the agreement suite on `instances` random point sets and on each
// matrix in `extra` (e.g. rows of a trained model).
GradientCheckReport run_gradient_suite(std::size_t instances, std::uint64_t seed, KernelConvention conv = {},
                                       const std::vector<Matrix>& extra = {});

}  // namespace diaurec
