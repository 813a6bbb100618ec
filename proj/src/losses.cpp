#include "diaurec/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diaurec/error.hpp"

namespace diaurec {

namespace {

void require_rows(const Matrix& z, std::size_t min_rows, const char* what) {
  if (z.rows() < min_rows) {
    fail(ErrorKind::InvalidArgument, std::string(what) + ": needs at least " + std::to_string(min_rows) +
                                         " rows, got " + std::to_string(z.rows()));
  }
}

// Unit rows and norms of a matrix; Degenerate on a zero row.
struct UnitRows {
  Matrix unit;
  std::vector<double> norms;
};

UnitRows unit_rows(const Matrix& m, const char* what) {
  UnitRows out{m, std::vector<double>(m.rows())};
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = out.unit.row(i);
    out.norms[i] = norm(r);
    if (!(out.norms[i] > 0.0)) fail(ErrorKind::Degenerate, std::string(what) + ": zero-norm row " + std::to_string(i));
    for (double& x : r) x /= out.norms[i];
  }
  return out;
}

// Backpropagate G = dL/dcos (rows of a × rows of b) through
// cos_ij = â_i·b̂_j into gradients for a and b.
void cosine_backward(const UnitRows& a, const UnitRows& b, const Matrix& cos, const Matrix& g, Matrix& grad_a,
                     Matrix& grad_b) {
  grad_a = matmul(g, b.unit);
  for (std::size_t i = 0; i < a.unit.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < b.unit.rows(); ++j) s += g(i, j) * cos(i, j);
    auto r = grad_a.row(i);
    const auto ai = a.unit.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = (r[c] - s * ai[c]) / a.norms[i];
  }
  grad_b = matmul_tn(g, a.unit);
  std::vector<double> col(b.unit.rows(), 0.0);
  for (std::size_t i = 0; i < a.unit.rows(); ++i)
    for (std::size_t j = 0; j < b.unit.rows(); ++j) col[j] += g(i, j) * cos(i, j);
  for (std::size_t j = 0; j < b.unit.rows(); ++j) {
    const double s = col[j];
    auto r = grad_b.row(j);
    const auto bj = b.unit.row(j);
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = (r[c] - s * bj[c]) / b.norms[j];
  }
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  align += o.align;
  uniform_user += o.uniform_user;
  uniform_item += o.uniform_item;
  bpr += o.bpr;
  coarse += o.coarse;
  fine += o.fine;
  intra += o.intra;
  inter += o.inter;
  l2_reg += o.l2_reg;
  total += o.total;
  return *this;
}

LossBreakdown& LossBreakdown::operator*=(double s) {
  for (double* f : {&align, &uniform_user, &uniform_item, &bpr, &coarse, &fine, &intra, &inter, &l2_reg, &total}) *f *= s;
  return *this;
}

std::string to_string(UniformityTarget target) {
  switch (target) {
    case UniformityTarget::UserOnly: return "user_only";
    case UniformityTarget::UserAndItem: return "user_and_item";
    case UniformityTarget::ItemOnly: return "item_only";
  }
  return "?";
}

std::string to_string(Objective objective) { return objective == Objective::AU ? "AU" : "BPR"; }

UniformityTarget parse_uniformity_target(const std::string& s) {
  if (s == "user_only") return UniformityTarget::UserOnly;
  if (s == "user_and_item") return UniformityTarget::UserAndItem;
  if (s == "item_only") return UniformityTarget::ItemOnly;
  fail(ErrorKind::InvalidArgument, "unknown uniformity target '" + s + "'");
}

Objective parse_objective(const std::string& s) {
  if (s == "AU" || s == "au") return Objective::AU;
  if (s == "BPR" || s == "bpr") return Objective::BPR;
  fail(ErrorKind::InvalidArgument, "unknown objective '" + s + "'");
}

LossGrad align_loss(const Matrix& z_user, const Matrix& z_item) {
  require_same_shape(z_user, z_item, "align_loss");
  require_rows(z_user, 1, "align_loss");
  const double inv_b = 1.0 / static_cast<double>(z_user.rows());
  LossGrad out{0.0, {Matrix(z_user.rows(), z_user.cols()), Matrix(z_user.rows(), z_user.cols())}};
  for (std::size_t b = 0; b < z_user.rows(); ++b) {
    out.value += squared_distance(z_user.row(b), z_item.row(b));
    for (std::size_t c = 0; c < z_user.cols(); ++c) {
      const double g = 2.0 * (z_user(b, c) - z_item(b, c)) * inv_b;
      out.grads[0](b, c) = g;
      out.grads[1](b, c) = -g;
    }
  }
  out.value *= inv_b;
  return out;
}

LossGrad uniform_loss(const Matrix& z) {
  require_rows(z, 2, "uniform_loss");
  const std::size_t n = z.rows();
  // −2‖z_i − z_j‖² from the Gram matrix.
  Matrix w = matmul_nt(z, z);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = w(i, i);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    auto r = w.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = i == j ? 0.0 : -2.0 * std::max(0.0, sq[i] + sq[j] - 2.0 * r[j]);
      if (i != j) mx = std::max(mx, r[j]);
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = w.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = i == j ? 0.0 : std::exp(r[j] - mx);
      sum += r[j];
    }
  }

  LossGrad out{mx + std::log(sum) - std::log(static_cast<double>(n * (n - 1))), {}};
  // ∂/∂z_m = −8 Σ_n π_mn (z_m − z_n), π_mn = exp(−2d²_mn)/S over ordered pairs.
  w *= 1.0 / sum;
  Matrix g = matmul(w, z);
  for (std::size_t m = 0; m < n; ++m) {
    double degree = 0.0;
    for (double x : w.row(m)) degree += x;
    auto gm = g.row(m);
    const auto zm = z.row(m);
    for (std::size_t c = 0; c < gm.size(); ++c) gm[c] = -8.0 * (degree * zm[c] - gm[c]);
  }
  out.grads.push_back(std::move(g));
  return out;
}

LossGrad au_loss(const Matrix& z_user, const Matrix& z_item, double omega, UniformityTarget target) {
  if (!(omega >= 0.0)) fail(ErrorKind::InvalidArgument, "au_loss: omega must be >= 0");
  LossGrad out = align_loss(z_user, z_item);
  if (omega == 0.0) return out;
  if (target != UniformityTarget::ItemOnly) {
    const LossGrad u = uniform_loss(z_user);
    out.value += omega * u.value;
    out.grads[0] += u.grads[0] * omega;
  }
  if (target != UniformityTarget::UserOnly) {
    const LossGrad v = uniform_loss(z_item);
    out.value += omega * v.value;
    out.grads[1] += v.grads[0] * omega;
  }
  return out;
}

LossGrad coarse_loss(const Matrix& z, const Matrix& anchors, const Matrix& coarse_map) {
  require_same_shape(z, anchors, "coarse_loss anchors");
  require_shape(coarse_map, z.cols(), z.cols(), "coarse_loss map");
  require_rows(z, 1, "coarse_loss");
  const std::size_t n = z.rows();
  const Matrix projected = matmul_nt(anchors, coarse_map);  // rows (W·γ_b)ᵀ
  const UnitRows zu = unit_rows(z, "coarse_loss z");
  const UnitRows pu = unit_rows(projected, "coarse_loss projected anchor");

  LossGrad out{0.0, {Matrix(n, z.cols()), Matrix(n, z.cols()), Matrix(z.cols(), z.cols())}};
  Matrix grad_projected(n, z.cols());
  const double inv_b = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    const auto zh = zu.unit.row(b);
    const auto ph = pu.unit.row(b);
    const double cos = dot(zh, ph);
    out.value += (1.0 - cos) * inv_b;
    auto gz = out.grads[0].row(b);
    auto gp = grad_projected.row(b);
    for (std::size_t c = 0; c < gz.size(); ++c) {
      gz[c] = -inv_b * (ph[c] - cos * zh[c]) / zu.norms[b];
      gp[c] = -inv_b * (zh[c] - cos * ph[c]) / pu.norms[b];
    }
  }
  // projected = anchors·Wᵀ
  out.grads[1] = matmul(grad_projected, coarse_map);
  out.grads[2] = matmul_tn(grad_projected, anchors);

  Matrix gram = matmul_tn(coarse_map, coarse_map);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) -= 1.0;
  out.value += frobenius_squared(gram);
  out.grads[2] += matmul(coarse_map, gram) * 4.0;
  return out;
}

std::vector<std::size_t> mine_neighbors(const Matrix& z) {
  require_rows(z, 2, "mine_neighbors");
  const UnitRows zu = unit_rows(z, "mine_neighbors");
  const Matrix cos = matmul_nt(zu.unit, zu.unit);
  std::vector<std::size_t> out(z.rows());
  for (std::size_t b = 0; b < z.rows(); ++b) {
    std::size_t best = b == 0 ? 1 : 0;
    for (std::size_t j = 0; j < z.rows(); ++j)
      if (j != b && cos(b, j) > cos(b, best)) best = j;
    out[b] = best;
  }
  return out;
}

LossGrad fine_loss(const Matrix& z, const Matrix& c_pro, const std::vector<std::size_t>& neighbors) {
  require_same_shape(z, c_pro, "fine_loss");
  require_rows(z, 2, "fine_loss");
  const std::size_t n = z.rows();
  if (neighbors.size() != n) fail(ErrorKind::Shape, "fine_loss: neighbor count mismatch");
  const UnitRows zu = unit_rows(z, "fine_loss z");
  const UnitRows cu = unit_rows(c_pro, "fine_loss prototypes");
  const Matrix cos = matmul_nt(zu.unit, cu.unit);

  double positive = 0.0;
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    positive += cos(i, neighbors[i]);
    for (std::size_t j = 0; j < n; ++j)
      if (j != neighbors[i]) mx = std::max(mx, cos(i, j));
  }
  positive /= static_cast<double>(n);
  Matrix g(n, n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != neighbors[i]) sum += g(i, j) = std::exp(cos(i, j) - mx);
  const double negative = mx + std::log(sum) - std::log(static_cast<double>(n * (n - 1)));

  g *= 1.0 / sum;
  for (std::size_t i = 0; i < n; ++i) g(i, neighbors[i]) = -1.0 / static_cast<double>(n);
  LossGrad out{negative - positive, {Matrix{}, Matrix{}}};
  cosine_backward(zu, cu, cos, g, out.grads[0], out.grads[1]);
  return out;
}

LossGrad infonce(const Matrix& a, const Matrix& b, double tau) {
  if (!(tau > 0.0)) fail(ErrorKind::InvalidArgument, "infonce: tau must be positive");
  require_same_shape(a, b, "infonce");
  require_rows(a, 1, "infonce");
  const std::size_t n = a.rows();
  Matrix p = matmul_nt(a, b) * (1.0 / tau);
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = p.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double x : r) sum += std::exp(x - mx);
    value += mx + std::log(sum) - r[i];
    for (double& x : r) x = std::exp(x - mx) / sum;
  }
  // dL/dlogits = (P − I)/n, logits = a·bᵀ/τ.
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    p(i, i) -= 1.0;
    for (double& x : p.row(i)) x *= inv / tau;
  }
  return LossGrad{value * inv, {matmul(p, b), matmul_tn(p, a)}};
}

LossGrad intra_loss(const Matrix& z_user, const Matrix& z_item, const Matrix& mu_user, const Matrix& mu_item,
                    double tau) {
  const LossGrad u = infonce(z_user, mu_user, tau);
  const LossGrad v = infonce(z_item, mu_item, tau);
  return LossGrad{u.value + v.value, {u.grads[0], v.grads[0], u.grads[1], v.grads[1]}};
}

LossGrad inter_loss(const Matrix& z_user, const Matrix& z_item, const Matrix& mu_user, const Matrix& mu_item,
                    double tau) {
  const LossGrad z = infonce(z_user, z_item, tau);
  const LossGrad mu = infonce(mu_user, mu_item, tau);
  return LossGrad{z.value + mu.value, {z.grads[0], z.grads[1], mu.grads[0], mu.grads[1]}};
}

LossGrad bpr_loss(const Matrix& z_user, const Matrix& z_pos, const Matrix& z_neg) {
  require_same_shape(z_user, z_pos, "bpr_loss positives");
  require_same_shape(z_user, z_neg, "bpr_loss negatives");
  require_rows(z_user, 1, "bpr_loss");
  const std::size_t n = z_user.rows();
  const double inv = 1.0 / static_cast<double>(n);
  LossGrad out{0.0, {Matrix(n, z_user.cols()), Matrix(n, z_user.cols()), Matrix(n, z_user.cols())}};
  for (std::size_t b = 0; b < n; ++b) {
    const double x = dot(z_user.row(b), z_pos.row(b)) - dot(z_user.row(b), z_neg.row(b));
    out.value += softplus(-x) * inv;
    const double gx = -sigmoid(-x) * inv;
    for (std::size_t c = 0; c < z_user.cols(); ++c) {
      out.grads[0](b, c) = gx * (z_pos(b, c) - z_neg(b, c));
      out.grads[1](b, c) = gx * z_user(b, c);
      out.grads[2](b, c) = -gx * z_user(b, c);
    }
  }
  return out;
}

double l2_norm_squared(const std::vector<const Matrix*>& tensors) {
  double s = 0.0;
  for (const Matrix* m : tensors) s += frobenius_squared(*m);
  return s;
}

LossBreakdown total_loss(LossBreakdown parts, const LossWeights& w, const LossToggles& t) {
  if (w.lambda1 < 0.0 || w.lambda2 < 0.0 || w.omega < 0.0 || w.weight_decay < 0.0) {
    fail(ErrorKind::InvalidArgument, "total_loss: weights must be non-negative");
  }
  if (t.objective == Objective::AU) {
    parts.bpr = 0.0;
    if (t.uniformity_target == UniformityTarget::UserOnly) parts.uniform_item = 0.0;
    if (t.uniformity_target == UniformityTarget::ItemOnly) parts.uniform_user = 0.0;
  } else {
    parts.align = parts.uniform_user = parts.uniform_item = 0.0;
  }
  if (!t.use_coarse) parts.coarse = 0.0;
  if (!t.use_fine) parts.fine = 0.0;
  if (!t.use_intra) parts.intra = 0.0;
  if (!t.use_inter) parts.inter = 0.0;
  const double main = t.objective == Objective::AU ? parts.align + w.omega * (parts.uniform_user + parts.uniform_item)
                                                   : parts.bpr;
  parts.total = main + w.lambda1 * (parts.coarse + parts.fine) + w.lambda2 * (parts.intra + parts.inter) +
                w.weight_decay * parts.l2_reg;
  return parts;
}

}  // namespace diaurec
