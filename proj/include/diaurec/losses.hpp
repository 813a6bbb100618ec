#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "diaurec/autodiff.hpp"
#include "diaurec/matrix.hpp"

namespace diaurec {

// Every loss returns its value together with the gradient w.r.t. each
// matrix argument, in argument order.
using LossGrad = ad::ScalarResult;

enum class UniformityTarget { UserOnly, UserAndItem, ItemOnly };
enum class Objective { AU, BPR };
enum class CoarseAnchor { Semantic, Prototype };

struct LossToggles {
  bool use_fine = true;
  bool use_coarse = true;
  bool use_intra = true;
  bool use_inter = true;
  bool use_dual_intent = true;
  UniformityTarget uniformity_target = UniformityTarget::UserOnly;
  Objective objective = Objective::AU;

  friend bool operator==(const LossToggles&, const LossToggles&) = default;
};

struct LossWeights {
  double omega = 1.0;
  double lambda1 = 0.2;
  double lambda2 = 0.2;
  double weight_decay = 1e-6;
};

// Unweighted component values plus the weighted total. Components that do
// not take part in the objective are exactly 0.
struct LossBreakdown {
  double align = 0.0;
  double uniform_user = 0.0;
  double uniform_item = 0.0;
  double bpr = 0.0;
  double coarse = 0.0;
  double fine = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double l2_reg = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown& operator*=(double s);
};

std::string to_string(UniformityTarget target);
std::string to_string(Objective objective);
UniformityTarget parse_uniformity_target(const std::string& s);
Objective parse_objective(const std::string& s);

// mean_b ‖a_b − b_b‖²
LossGrad align_loss(const Matrix& z_user, const Matrix& z_item);

// log of the mean over ordered pairs b≠b' of exp(−2‖z_b − z_b'‖²).
LossGrad uniform_loss(const Matrix& z);

// align + omega · uniformity over the configured population(s).
LossGrad au_loss(const Matrix& z_user, const Matrix& z_item, double omega, UniformityTarget target);

// mean_b (1 − cos(z_b, W·anchor_b)) + ‖WᵀW − I‖²_F
// Gradients: z, anchors, coarse_map.
LossGrad coarse_loss(const Matrix& z, const Matrix& anchors, const Matrix& coarse_map);

// Index of the most cosine-similar other row; ties go to the lowest index.
std::vector<std::size_t> mine_neighbors(const Matrix& z);

// Negated matching bound:
//   −[ mean_b cos(z_b, c_{j*_b}) − log mean_{(b, j≠j*_b)} exp(cos(z_b, c_j)) ]
// Gradients: z, c_pro (neighbors are constants).
LossGrad fine_loss(const Matrix& z, const Matrix& c_pro, const std::vector<std::size_t>& neighbors);

// mean_i −log softmax_j(a_i·b_j / tau)[i]
LossGrad infonce(const Matrix& a, const Matrix& b, double tau);

// infonce(z_u, mu_u) + infonce(z_v, mu_v). Gradients: z_u, z_v, mu_u, mu_v.
LossGrad intra_loss(const Matrix& z_user, const Matrix& z_item, const Matrix& mu_user, const Matrix& mu_item, double tau);

// infonce(z_u, z_v) + infonce(mu_u, mu_v). Gradients: z_u, z_v, mu_u, mu_v.
LossGrad inter_loss(const Matrix& z_user, const Matrix& z_item, const Matrix& mu_user, const Matrix& mu_item, double tau);

// mean_b −log σ(z_u·z_pos − z_u·z_neg). Gradients: z_u, z_pos, z_neg.
LossGrad bpr_loss(const Matrix& z_user, const Matrix& z_pos, const Matrix& z_neg);

// Σ of squares of every tensor.
double l2_norm_squared(const std::vector<const Matrix*>& tensors);

// Combines enabled components:
//   total = AU (or BPR) + λ1 (coarse + fine) + λ2 (intra + inter) + wd · l2
// Disabled components are zeroed in the returned breakdown.
LossBreakdown total_loss(LossBreakdown parts, const LossWeights& weights, const LossToggles& toggles);

}  // namespace diaurec
