#include "diaurec/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "diaurec/autodiff.hpp"
#include "diaurec/error.hpp"

namespace diaurec {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  fail(ErrorKind::InvalidArgument, "config: bad value '" + value + "' for key '" + key + "'");
}

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size() || x < 0) bad_value(key, v);
    return static_cast<std::size_t>(x);
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v);
    return x;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v);
}

// Shortest text that parses back to the same double.
std::string fmt_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "dim") dim = to_size(key, v);
  else if (key == "batch") batch = to_size(key, v);
  else if (key == "lr") lr = to_double(key, v);
  else if (key == "tau") tau = to_double(key, v);
  else if (key == "eta") eta = to_double(key, v);
  else if (key == "intents") intents = to_size(key, v);
  else if (key == "omega") omega = to_double(key, v);
  else if (key == "lambda1") lambda1 = to_double(key, v);
  else if (key == "lambda2") lambda2 = to_double(key, v);
  else if (key == "weight_decay") weight_decay = to_double(key, v);
  else if (key == "layers") layers = to_size(key, v);
  else if (key == "kappa") kappa = to_double(key, v);
  else if (key == "epochs_max") epochs_max = to_size(key, v);
  else if (key == "patience") patience = to_size(key, v);
  else if (key == "seed") seed = to_size(key, v);
  else if (key == "use_fine") toggles.use_fine = to_bool(key, v);
  else if (key == "use_coarse") toggles.use_coarse = to_bool(key, v);
  else if (key == "use_intra") toggles.use_intra = to_bool(key, v);
  else if (key == "use_inter") toggles.use_inter = to_bool(key, v);
  else if (key == "use_dual_intent") toggles.use_dual_intent = to_bool(key, v);
  else if (key == "uniformity_target") toggles.uniformity_target = parse_uniformity_target(v);
  else if (key == "objective") toggles.objective = parse_objective(v);
  else if (key == "anchor") {
    if (v == "semantic") anchor = CoarseAnchor::Semantic;
    else if (v == "prototype") anchor = CoarseAnchor::Prototype;
    else bad_value(key, v);
  } else if (key == "neighbor_scaling") neighbor_scaling = to_bool(key, v);
  else if (key == "hidden") hidden = to_size(key, v);
  else if (key == "init_std") init_std = to_double(key, v);
  else if (key == "valid_cutoff") valid_cutoff = to_size(key, v);
  else if (key == "checked") checked = to_bool(key, v);
  else if (key == "semantic_dim") semantic_dim = to_size(key, v);
  else if (key == "semantic_clusters") semantic_clusters = to_size(key, v);
  else if (key == "semantic_noise") semantic_noise = to_double(key, v);
  else fail(ErrorKind::InvalidArgument, "config: unknown key '" + key + "'");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  const auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"dim", std::to_string(dim)},
      {"batch", std::to_string(batch)},
      {"lr", fmt_double(lr)},
      {"tau", fmt_double(tau)},
      {"eta", fmt_double(eta)},
      {"intents", std::to_string(intents)},
      {"omega", fmt_double(omega)},
      {"lambda1", fmt_double(lambda1)},
      {"lambda2", fmt_double(lambda2)},
      {"weight_decay", fmt_double(weight_decay)},
      {"layers", std::to_string(layers)},
      {"kappa", fmt_double(kappa)},
      {"epochs_max", std::to_string(epochs_max)},
      {"patience", std::to_string(patience)},
      {"seed", std::to_string(seed)},
      {"use_fine", b(toggles.use_fine)},
      {"use_coarse", b(toggles.use_coarse)},
      {"use_intra", b(toggles.use_intra)},
      {"use_inter", b(toggles.use_inter)},
      {"use_dual_intent", b(toggles.use_dual_intent)},
      {"uniformity_target", to_string(toggles.uniformity_target)},
      {"objective", to_string(toggles.objective)},
      {"anchor", anchor == CoarseAnchor::Semantic ? "semantic" : "prototype"},
      {"neighbor_scaling", b(neighbor_scaling)},
      {"hidden", std::to_string(hidden)},
      {"init_std", fmt_double(init_std)},
      {"valid_cutoff", std::to_string(valid_cutoff)},
      {"checked", b(checked)},
      {"semantic_dim", std::to_string(semantic_dim)},
      {"semantic_clusters", std::to_string(semantic_clusters)},
      {"semantic_noise", fmt_double(semantic_noise)},
  };
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::InvalidArgument, std::string("config: ") + what);
  };
  require(dim >= 2, "dim must be >= 2");
  require(batch >= 2, "batch must be >= 2");
  require(lr >= 0.0, "lr must be >= 0");
  require(tau > 0.0, "tau must be positive");
  require(eta > 0.0, "eta must be positive");
  require(intents >= 1, "intents must be >= 1");
  require(omega >= 0.0 && lambda1 >= 0.0 && lambda2 >= 0.0 && weight_decay >= 0.0, "loss weights must be >= 0");
  require(kappa >= 0.0, "kappa must be >= 0");
  require(epochs_max >= 1, "epochs_max must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(valid_cutoff >= 1, "valid_cutoff must be >= 1");
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void write_config_file(const std::filesystem::path& path, const TrainConfig& config) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& [k, v] : config.to_map()) out << k << " = " << v << '\n';
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {
      "full",  "wo_fm", "wo_cm",        "wo_bothm", "wo_diir",  "wo_ir",    "wo_bothr",
      "bpr",   "au_user_item", "au_item", "layers_0", "layers_1", "layers_2", "layers_3", "layers_4"};
  return names;
}

void apply_variant(TrainConfig& c, const std::string& variant) {
  auto& t = c.toggles;
  if (variant == "full") return;
  if (variant == "wo_fm") t.use_fine = false;
  else if (variant == "wo_cm") t.use_coarse = false;
  else if (variant == "wo_bothm") t.use_fine = t.use_coarse = false;
  else if (variant == "wo_diir") t.use_dual_intent = t.use_intra = false;
  else if (variant == "wo_ir") t.use_inter = false;
  else if (variant == "wo_bothr") t.use_intra = t.use_inter = false;
  else if (variant == "bpr") t.objective = Objective::BPR;
  else if (variant == "au_user_item") t.uniformity_target = UniformityTarget::UserAndItem;
  else if (variant == "au_item") t.uniformity_target = UniformityTarget::ItemOnly;
  else if (variant.rfind("layers_", 0) == 0 && variant.size() == 8 && variant[7] >= '0' && variant[7] <= '4')
    c.layers = static_cast<std::size_t>(variant[7] - '0');
  else fail(ErrorKind::InvalidArgument, "unknown variant '" + variant + "'");
}

void adam_step(const std::vector<std::pair<std::string, Matrix*>>& params, const std::vector<Matrix>& grads,
               AdamState& s, double lr) {
  if (params.size() != grads.size()) fail(ErrorKind::Shape, "adam_step: parameter/gradient count mismatch");
  if (s.first.empty()) {
    for (const auto& [name, p] : params) {
      s.first.emplace_back(p->rows(), p->cols());
      s.second.emplace_back(p->rows(), p->cols());
    }
  }
  if (s.first.size() != params.size()) fail(ErrorKind::Shape, "adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(*params[i].second, grads[i], "adam_step gradient");
    if (!all_finite(grads[i])) fail(ErrorKind::Numeric, "non-finite gradient for tensor '" + params[i].first + "'");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].second->data();
    auto& m = s.first[i].data();
    auto& v = s.second[i].data();
    const auto& g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g[j];
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + s.eps);
    }
  }
}

Batch sample_batch(const EdgeList& train, const std::vector<std::vector<std::size_t>>& train_items, std::size_t batch,
                   Objective objective, Rng& rng) {
  if (train.empty()) fail(ErrorKind::EmptyDataset, "sample_batch: empty train set");
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  std::uniform_int_distribution<std::size_t> any_item(0, train.item_count - 1);
  Batch b;
  b.users.reserve(batch);
  b.items.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto& e = train.pairs[pick(rng)];
    b.users.push_back(e.user);
    b.items.push_back(e.item);
  }
  if (objective == Objective::BPR) {
    for (std::size_t u : b.users) {
      const auto& seen = train_items[u];
      std::size_t v = 0;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        v = any_item(rng);
        ok = !std::binary_search(seen.begin(), seen.end(), v);
      }
      if (!ok) ++b.negative_fallbacks;
      b.negatives.push_back(v);
    }
  }
  return b;
}

TrainingData TrainingData::assemble(DatasetSplit split, SemanticStore semantics) {
  TrainingData d;
  d.graph = build_graph(split.train);
  if (semantics.raw_user.rows() != d.graph.user_count() || semantics.raw_item.rows() != d.graph.item_count()) {
    fail(ErrorKind::Alignment, "semantic vectors do not match the dataset's user/item counts");
  }
  d.train_items = items_by_user(split.train);
  d.split = std::move(split);
  d.semantics = std::move(semantics);
  return d;
}

NoiseSource random_noise(double kappa, Rng& vmf_rng, Rng& eps_rng) {
  return [kappa, &vmf_rng, &eps_rng](const Matrix& base_user, const Matrix& base_item) {
    BatchNoise n;
    n.h_user = vmf_sample(base_user, kappa, vmf_rng);
    n.h_item = vmf_sample(base_item, kappa, vmf_rng);
    n.eps_user = gaussian_matrix(base_user.rows(), base_user.cols(), 1.0, eps_rng);
    n.eps_item = gaussian_matrix(base_item.rows(), base_item.cols(), 1.0, eps_rng);
    return n;
  };
}

namespace {

void check_unit_rows(const Matrix& m, const char* what, InvariantStats& stats) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double err = std::abs(norm(m.row(i)) - 1.0);
    stats.max_norm_error = std::max(stats.max_norm_error, err);
    if (err > 1e-6) fail(ErrorKind::Numeric, std::string("invariant: ") + what + " row " + std::to_string(i) + " is not unit-norm");
  }
  stats.unit_norm_checks += m.rows();
}

void check_prob_rows(const Matrix& m, const char* what, InvariantStats& stats) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double p : m.row(i)) {
      if (p < 0.0 || p > 1.0) fail(ErrorKind::Numeric, std::string("invariant: ") + what + " has an entry outside [0,1]");
      s += p;
    }
    const double err = std::abs(s - 1.0);
    stats.max_row_sum_error = std::max(stats.max_row_sum_error, err);
    if (err > 1e-6) fail(ErrorKind::Numeric, std::string("invariant: ") + what + " row " + std::to_string(i) + " does not sum to 1");
  }
  stats.softmax_row_checks += m.rows();
}

Matrix inverse_degree_mask(const InteractionGraph& g, std::size_t dim) {
  Matrix m(g.user_count() + g.item_count(), dim);
  for (std::size_t u = 0; u < g.user_count(); ++u)
    for (double& x : m.row(u)) x = 1.0 / static_cast<double>(g.user_degrees()[u]);
  for (std::size_t v = 0; v < g.item_count(); ++v)
    for (double& x : m.row(g.user_count() + v)) x = 1.0 / static_cast<double>(g.item_degrees()[v]);
  return m;
}

}  // namespace

StepResult loss_and_gradients(const ModelState& state, const TrainingData& data, const Batch& batch,
                              const NoiseSource& noise, const TrainConfig& config, InvariantStats* checks) {
  const auto& t = config.toggles;
  const bool bpr = t.objective == Objective::BPR;
  if (batch.users.size() != batch.items.size() || batch.users.empty()) fail(ErrorKind::Shape, "batch: mismatched pairs");
  if (bpr && batch.negatives.size() != batch.users.size()) fail(ErrorKind::Shape, "batch: BPR needs one negative per pair");

  ad::Tape tape;
  std::vector<ad::Var> params;
  for (const auto& [name, m] : state.trainable()) params.push_back(tape.leaf(*m));
  const ad::Var user_mu = params[0], item_mu = params[1], proto = params[2], dist_bank = params[3],
                dist_proj = params[4], coarse_map = params[9];
  const ProjectorVars projector{params[5], params[6], params[7], params[8]};

  const std::size_t m_users = data.graph.user_count();
  const std::size_t n = batch.users.size();

  // Collaborative base: mean over propagation layers 0..L.
  ad::Var layer = tape.vstack(user_mu, item_mu);
  ad::Var sum = layer;
  for (std::size_t l = 0; l < config.layers; ++l) {
    layer = tape.graph_step(data.graph, layer);
    sum = tape.add(sum, layer);
  }
  ad::Var mean = tape.scale(sum, 1.0 / static_cast<double>(config.layers + 1));
  if (config.neighbor_scaling) mean = tape.mul_const(mean, inverse_degree_mask(data.graph, state.dim()));

  std::vector<std::size_t> item_rows = batch.items;
  if (bpr) item_rows.insert(item_rows.end(), batch.negatives.begin(), batch.negatives.end());
  std::vector<std::size_t> item_stacked_rows(item_rows.size());
  for (std::size_t i = 0; i < item_rows.size(); ++i) item_stacked_rows[i] = m_users + item_rows[i];
  const ad::Var base_user = tape.gather_rows(mean, batch.users);
  const ad::Var base_item = tape.gather_rows(mean, item_stacked_rows);

  const bool need_semantics = t.use_dual_intent || t.use_fine || t.use_coarse;
  std::optional<ad::Var> sem_user, sem_item, pro_user, pro_item;
  if (need_semantics) {
    sem_user = project_rows(tape, tape.constant(gather_rows(data.semantics.raw_user, batch.users)), projector,
                            state.projector.activation);
    sem_item = project_rows(tape, tape.constant(gather_rows(data.semantics.raw_item, item_rows)), projector,
                            state.projector.activation);
    const ad::Var pp_user = tape.softmax_rows(tape.matmul_nt(*sem_user, proto), state.bank.eta);
    const ad::Var pp_item = tape.softmax_rows(tape.matmul_nt(*sem_item, proto), state.bank.eta);
    if (checks) {
      check_prob_rows(pp_user.value(), "prototype assignment", *checks);
      check_prob_rows(pp_item.value(), "prototype assignment", *checks);
    }
    pro_user = tape.matmul(pp_user, proto);
    pro_item = tape.matmul(pp_item, proto);
  }

  ad::Var recon_user = base_user, recon_item = base_item;
  if (t.use_dual_intent) {
    const BatchNoise nz = noise(base_user.value(), base_item.value());
    require_same_shape(nz.h_user, base_user.value(), "noise h_user");
    require_same_shape(nz.h_item, base_item.value(), "noise h_item");
    const ad::Var pd_user = tape.softmax_rows(tape.matmul_nt(tape.constant(nz.h_user), dist_proj), state.bank.eta);
    const ad::Var pd_item = tape.softmax_rows(tape.matmul_nt(tape.constant(nz.h_item), dist_proj), state.bank.eta);
    if (checks) {
      check_prob_rows(pd_user.value(), "distribution assignment", *checks);
      check_prob_rows(pd_item.value(), "distribution assignment", *checks);
    }
    const ad::Var dis_user = tape.matmul(pd_user, dist_bank);
    const ad::Var dis_item = tape.matmul(pd_item, dist_bank);
    recon_user = tape.add(base_user, tape.mul_const(tape.add(*pro_user, dis_user), nz.eps_user));
    recon_item = tape.add(base_item, tape.mul_const(tape.add(*pro_item, dis_item), nz.eps_item));
  }
  const ad::Var z_user = tape.normalize_rows(recon_user);
  const ad::Var z_item_all = tape.normalize_rows(recon_item);
  const ad::Var mu_user = tape.normalize_rows(base_user);
  const ad::Var mu_item_all = tape.normalize_rows(base_item);

  std::vector<std::size_t> pos_rows(n), neg_rows(bpr ? n : 0);
  for (std::size_t i = 0; i < n; ++i) pos_rows[i] = i;
  for (std::size_t i = 0; i < neg_rows.size(); ++i) neg_rows[i] = n + i;
  const ad::Var z_item = bpr ? tape.gather_rows(z_item_all, pos_rows) : z_item_all;
  const ad::Var mu_item = bpr ? tape.gather_rows(mu_item_all, pos_rows) : mu_item_all;

  if (checks) {
    check_unit_rows(z_user.value(), "user representation", *checks);
    check_unit_rows(z_item_all.value(), "item representation", *checks);
    check_unit_rows(mu_user.value(), "user base representation", *checks);
    check_unit_rows(mu_item_all.value(), "item base representation", *checks);
  }

  LossBreakdown parts;
  const LossWeights w = config.weights();
  std::vector<ad::Var> terms;  // already weighted
  auto add_term = [&](std::initializer_list<ad::Var> inputs, LossGrad result, double weight, double& field) {
    field = result.value;
    const std::vector<ad::Var> in(inputs);
    terms.push_back(tape.scale(tape.scalar(in, std::move(result)), weight));
  };

  if (bpr) {
    const ad::Var z_neg = tape.gather_rows(z_item_all, neg_rows);
    add_term({z_user, z_item, z_neg}, bpr_loss(z_user.value(), z_item.value(), z_neg.value()), 1.0, parts.bpr);
  } else {
    add_term({z_user, z_item}, align_loss(z_user.value(), z_item.value()), 1.0, parts.align);
    if (t.uniformity_target != UniformityTarget::ItemOnly)
      add_term({z_user}, uniform_loss(z_user.value()), w.omega, parts.uniform_user);
    if (t.uniformity_target != UniformityTarget::UserOnly)
      add_term({z_item}, uniform_loss(z_item.value()), w.omega, parts.uniform_item);
  }

  if (t.use_coarse || t.use_fine) {
    const ad::Var z_all = tape.vstack(z_user, z_item);
    const ad::Var sem_all = tape.vstack(*sem_user, bpr ? tape.gather_rows(*sem_item, pos_rows) : *sem_item);
    const ad::Var pro_all = tape.vstack(*pro_user, bpr ? tape.gather_rows(*pro_item, pos_rows) : *pro_item);
    if (t.use_coarse) {
      const ad::Var anchors = config.anchor == CoarseAnchor::Semantic ? sem_all : tape.normalize_rows(pro_all);
      add_term({z_all, anchors, coarse_map}, coarse_loss(z_all.value(), anchors.value(), coarse_map.value()),
               w.lambda1, parts.coarse);
    }
    if (t.use_fine) {
      const auto neighbors = mine_neighbors(z_all.value());
      add_term({z_all, pro_all}, fine_loss(z_all.value(), pro_all.value(), neighbors), w.lambda1, parts.fine);
    }
  }
  if (t.use_intra) {
    add_term({z_user, z_item, mu_user, mu_item},
             intra_loss(z_user.value(), z_item.value(), mu_user.value(), mu_item.value(), config.tau), w.lambda2,
             parts.intra);
  }
  if (t.use_inter) {
    add_term({z_user, z_item, mu_user, mu_item},
             inter_loss(z_user.value(), z_item.value(), mu_user.value(), mu_item.value(), config.tau), w.lambda2,
             parts.inter);
  }
  if (w.weight_decay > 0.0) {
    ad::Var l2 = tape.sum_squares(params[0]);
    for (std::size_t i = 1; i < params.size(); ++i) l2 = tape.add(l2, tape.sum_squares(params[i]));
    parts.l2_reg = l2.value()(0, 0);
    terms.push_back(tape.scale(l2, w.weight_decay));
  }

  ad::Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = tape.add(total, terms[i]);
  tape.backward(total);

  StepResult out;
  out.losses = total_loss(parts, w, t);
  out.losses.total = total.value()(0, 0);
  for (const ad::Var& p : params) out.grads.push_back(p.grad());
  return out;
}

TrainStreams::TrainStreams(std::uint64_t seed)
    : batch(make_stream(seed, "batch")), vmf(make_stream(seed, "vmf")), epsilon(make_stream(seed, "epsilon")) {}

LossBreakdown train_epoch(ModelState& state, const TrainingData& data, const TrainConfig& config, AdamState& adam,
                          TrainStreams& streams, std::size_t epoch, const StepLogger& log, InvariantStats* checks) {
  const std::size_t steps = (data.split.train.size() + config.batch - 1) / config.batch;
  const NoiseSource noise = random_noise(config.kappa, streams.vmf, streams.epsilon);
  LossBreakdown mean;
  for (std::size_t step = 0; step < steps; ++step) {
    const Batch batch = sample_batch(data.split.train, data.train_items, config.batch, config.toggles.objective, streams.batch);
    StepResult r = loss_and_gradients(state, data, batch, noise, config, checks);
    adam_step(state.trainable(), r.grads, adam, config.lr);
    if (config.checked) state.check_finite();
    if (log) log(StepRecord{epoch, step, r.losses, batch.negative_fallbacks});
    mean += r.losses;
  }
  mean *= 1.0 / static_cast<double>(steps);
  return mean;
}

double validation_recall(const ModelState& state, const TrainingData& data, const TrainConfig& config) {
  const Representations reps = encode_for_ranking(state, data.graph, data.semantics, config.encoder());
  EvaluationOptions opts;
  opts.cutoffs = {config.valid_cutoff};
  opts.group_count = 0;
  return evaluate(reps, data.split.train, data.split.validation, opts).overall.front().recall;
}

ModelState init_model(const TrainingData& data, const TrainConfig& config) {
  Rng rng = make_stream(config.seed, "init");
  ModelState::InitOptions o;
  o.users = data.graph.user_count();
  o.items = data.graph.item_count();
  o.dim = config.dim;
  o.intents = config.intents;
  o.source_dim = data.semantics.source_dim();
  o.hidden = config.hidden_dim();
  o.eta = config.eta;
  o.kappa = config.kappa;
  o.init_std = config.init_std;
  return ModelState::init(o, rng);
}

TrainReport fit(ModelState& state, const TrainingData& data, const TrainConfig& config, const StepLogger& log,
                const std::function<double(const ModelState&)>& validator) {
  config.validate();
  TrainReport report;
  AdamState adam;
  TrainStreams streams(config.seed);
  ModelState best = state;
  bool have_best = false;
  std::size_t since_best = 0;
  report.termination = Termination::MaxEpochs;
  for (std::size_t epoch = 1; epoch <= config.epochs_max; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.losses = train_epoch(state, data, config, adam, streams, epoch, log, config.checked ? &report.invariants : nullptr);
    rec.valid_recall = validator ? validator(state) : validation_recall(state, data, config);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(rec);
    if (!have_best || rec.valid_recall > report.best_valid_recall) {
      have_best = true;
      report.best_valid_recall = rec.valid_recall;
      report.best_epoch = epoch;
      best = state;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      report.termination = Termination::Patience;
      break;
    }
  }
  state = std::move(best);
  // Checkpoints hold float32; round now so a reloaded checkpoint reproduces
  // the recorded validation score exactly.
  round_to_checkpoint_precision(state);
  if (!validator) report.best_valid_recall = validation_recall(state, data, config);
  return report;
}

std::string to_string(Termination t) { return t == Termination::Patience ? "patience" : "max_epochs"; }

}  // namespace diaurec
