#include "diaurec/intent.hpp"

#include <cmath>
#include <random>

#include "diaurec/error.hpp"

namespace diaurec {

ModelState ModelState::init(const InitOptions& o, Rng& rng) {
  ModelState s;
  s.user_mu = gaussian_matrix(o.users, o.dim, o.init_std, rng);
  s.item_mu = gaussian_matrix(o.items, o.dim, o.init_std, rng);
  s.bank.proto_bank = gaussian_matrix(o.intents, o.dim, o.init_std, rng);
  s.bank.dist_bank = gaussian_matrix(o.intents, o.dim, o.init_std, rng);
  s.bank.dist_proj = gaussian_matrix(o.intents, o.dim, o.init_std, rng);
  s.bank.eta = o.eta;
  s.bank.kappa = o.kappa;
  s.projector = ProjectorParams::init(o.source_dim, o.hidden, o.dim, rng);
  s.coarse_map = Matrix::identity(o.dim);
  return s;
}

std::vector<std::pair<std::string, Matrix*>> ModelState::trainable() {
  return {{"user_mu", &user_mu},
          {"item_mu", &item_mu},
          {"proto_bank", &bank.proto_bank},
          {"dist_bank", &bank.dist_bank},
          {"dist_proj", &bank.dist_proj},
          {"projector.w1", &projector.w1},
          {"projector.b1", &projector.b1},
          {"projector.w2", &projector.w2},
          {"projector.b2", &projector.b2},
          {"coarse_map", &coarse_map}};
}

std::vector<std::pair<std::string, const Matrix*>> ModelState::trainable() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : const_cast<ModelState*>(this)->trainable()) out.emplace_back(name, m);
  return out;
}

void ModelState::check_finite() const {
  for (const auto& [name, m] : trainable())
    if (!all_finite(*m)) fail(ErrorKind::Numeric, "non-finite values in tensor '" + name + "'");
}

EpsilonMode parse_epsilon_mode(const std::string& name) {
  if (name == "train_gaussian") return EpsilonMode::TrainGaussian;
  if (name == "eval_ones") return EpsilonMode::EvalOnes;
  if (name == "zero") return EpsilonMode::Zero;
  fail(ErrorKind::InvalidArgument, "unknown epsilon mode '" + name + "'");
}

Matrix prototype_assign(const Matrix& s, const Matrix& proto_bank, double eta) {
  if (!(eta > 0.0)) fail(ErrorKind::InvalidArgument, "prototype_assign: eta must be positive");
  return softmax_rows(matmul_nt(s, proto_bank), eta);
}

Matrix distribution_assign(const Matrix& h, const Matrix& dist_proj, double eta) {
  if (!(eta > 0.0)) fail(ErrorKind::InvalidArgument, "distribution_assign: eta must be positive");
  return softmax_rows(matmul_nt(h, dist_proj), eta);
}

Matrix vmf_sample(const Matrix& mean, double kappa, Rng& rng) {
  if (!(kappa >= 0.0)) fail(ErrorKind::InvalidArgument, "vmf_sample: kappa must be >= 0");
  const std::size_t d = mean.cols();
  if (d < 2) fail(ErrorKind::Shape, "vmf_sample: dimension must be >= 2");

  const double dm1 = static_cast<double>(d - 1);
  // Stable form of b = (-2κ + sqrt(4κ² + (d-1)²)) / (d-1).
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + dm1 * std::log1p(-x0 * x0);

  std::gamma_distribution<double> gamma(dm1 / 2.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix out(mean.rows(), d);
  std::vector<double> mu(d), tangent(d);
  for (std::size_t i = 0; i < mean.rows(); ++i) {
    const auto src = mean.row(i);
    const double n = norm(src);
    if (n > 0.0) {
      for (std::size_t j = 0; j < d; ++j) mu[j] = src[j] / n;
    } else if (kappa == 0.0) {
      std::fill(mu.begin(), mu.end(), 0.0);
      mu[0] = 1.0;
    } else {
      fail(ErrorKind::Degenerate, "vmf_sample: zero-norm mean in row " + std::to_string(i));
    }

    double w = 0.0;
    while (true) {
      const double ga = gamma(rng), gb = gamma(rng);
      const double z = ga / (ga + gb);
      w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
      const double u = unif(rng);
      if (kappa * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) break;
    }

    double tn = 0.0;
    do {
      for (double& x : tangent) x = gauss(rng);
      const double along = dot(tangent, mu);
      for (std::size_t j = 0; j < d; ++j) tangent[j] -= along * mu[j];
      tn = norm(tangent);
    } while (tn < 1e-12);

    const double radial = std::sqrt(std::max(0.0, 1.0 - w * w));
    auto dst = out.row(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] = w * mu[j] + radial * tangent[j] / tn;
    const double on = norm(dst);
    for (double& x : dst) x /= on;
  }
  return out;
}

Matrix mix_intents(const Matrix& probs, const Matrix& bank) {
  if (probs.cols() != bank.rows()) fail(ErrorKind::Shape, "mix_intents: probability width does not match bank size");
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    double s = 0.0;
    for (double p : probs.row(i)) s += p;
    if (std::abs(s - 1.0) > 1e-6) {
      fail(ErrorKind::InvalidArgument, "mix_intents: probability row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
  return matmul(probs, bank);
}

Matrix layer_mean(const std::vector<Matrix>& layers) {
  if (layers.empty()) fail(ErrorKind::InvalidArgument, "layer_mean: no layers");
  Matrix out = layers.front();
  for (std::size_t l = 1; l < layers.size(); ++l) out += layers[l];
  out *= 1.0 / static_cast<double>(layers.size());
  return out;
}

Matrix reconstruct_raw(const std::vector<Matrix>& layers, const Matrix& c_pro, const Matrix& c_dis, EpsilonMode mode,
                       Rng& rng) {
  Matrix z = layer_mean(layers);
  if (mode == EpsilonMode::Zero) return z;
  require_same_shape(z, c_pro, "reconstruct prototype intents");
  require_same_shape(z, c_dis, "reconstruct distribution intents");
  Matrix intent = c_pro + c_dis;
  if (mode == EpsilonMode::TrainGaussian) intent = hadamard(intent, gaussian_matrix(z.rows(), z.cols(), 1.0, rng));
  return z += intent;
}

Matrix reconstruct(const std::vector<Matrix>& layers, const Matrix& c_pro, const Matrix& c_dis, EpsilonMode mode,
                   Rng& rng) {
  return normalize_rows(reconstruct_raw(layers, c_pro, c_dis, mode, rng));
}

double score(std::span<const double> z_user, std::span<const double> z_item) {
  if (z_user.size() != z_item.size()) fail(ErrorKind::Shape, "score: dimension mismatch");
  return dot(z_user, z_item);
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double intent_marginal_prob(std::span<const double> z_user, std::span<const double> z_item,
                            std::span<const double> probs_pro, std::span<const double> probs_dis,
                            const IntentBank& bank) {
  const std::size_t k_count = bank.intent_count();
  const std::size_t d = bank.proto_bank.cols();
  if (probs_pro.size() != k_count || probs_dis.size() != k_count || z_user.size() != d || z_item.size() != d) {
    fail(ErrorKind::Shape, "intent_marginal_prob: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double ck = 0.5 * (bank.proto_bank(k, j) + bank.dist_bank(k, j));
      s += (z_user[j] + ck) * (z_item[j] + ck);
    }
    total += logistic(s) * probs_pro[k] * probs_dis[k];
  }
  return total;
}

namespace {

Matrix scale_rows_by_inverse_degree(Matrix m, const std::vector<std::size_t>& degrees) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double& x : m.row(i)) x /= static_cast<double>(degrees[i]);
  return m;
}

}  // namespace

Representations encode_for_ranking(const ModelState& state, const InteractionGraph& graph,
                                   const SemanticStore& semantics, const EncoderOptions& options) {
  const auto seq = propagate(graph, state.user_mu, state.item_mu, options.layers);
  Matrix base_user = layer_mean(seq.users);
  Matrix base_item = layer_mean(seq.items);
  if (options.neighbor_scaling) {
    base_user = scale_rows_by_inverse_degree(std::move(base_user), graph.user_degrees());
    base_item = scale_rows_by_inverse_degree(std::move(base_item), graph.item_degrees());
  }
  if (!options.use_dual_intent) return {normalize_rows(base_user), normalize_rows(base_item)};

  const auto& bank = state.bank;
  auto intents = [&](const Matrix& raw, const Matrix& base) {
    const Matrix s = project_rows(raw, state.projector);
    const Matrix c_pro = mix_intents(prototype_assign(s, bank.proto_bank, bank.eta), bank.proto_bank);
    const Matrix h = normalize_rows(base);
    const Matrix c_dis = mix_intents(distribution_assign(h, bank.dist_proj, bank.eta), bank.dist_bank);
    return normalize_rows(base + c_pro + c_dis);
  };
  return {intents(semantics.raw_user, base_user), intents(semantics.raw_item, base_item)};
}

}  // namespace diaurec
