// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>

#include "diaurec/diagnostics.hpp"
#include "diaurec/error.hpp"
#include "diaurec/evaluator.hpp"
#include "diaurec/harness.hpp"
#include "diaurec/intent.hpp"
#include "diaurec/losses.hpp"
#include "diaurec/trainer.hpp"
#include "support.hpp"

using namespace diaurec;
namespace fs = std::filesystem;
using testing::numeric_grad;
using testing::random_matrix;
using testing::random_unit_rows;
using testing::rel_error;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Desk-scale settings for the synthetic end-to-end runs.
std::map<std::string, std::string> desk_overrides() {
  return {{"batch", "128"}, {"lr", "0.001"}, {"patience", "10"}, {"epochs_max", "100"}};
}

const fs::path& root() {
  static const fs::path dir = testing::scratch_dir("acceptance");
  return dir;
}

// 300 users, 200 items, 5 clusters, semantic noise 0.1.
const fs::path& synthetic_dataset() {
  static const fs::path dir = [] {
    PrepareOptions o;
    o.out_dir = root() / "data";
    run_prepare(o);
    return o.out_dir;
  }();
  return dir;
}

ExperimentSpec desk_spec(const fs::path& out) {
  ExperimentSpec s;
  s.data_dir = synthetic_dataset();
  s.overrides = desk_overrides();
  s.out_dir = out;
  return s;
}

// Max relative error of every gradient of a multi-argument loss.
double loss_fd_error(const std::function<LossGrad(const std::vector<Matrix>&)>& loss, const std::vector<Matrix>& args) {
  const LossGrad r = loss(args);
  double worst = 0.0;
  for (std::size_t a = 0; a < args.size(); ++a) {
    const Matrix numeric = numeric_grad(
        [&](const Matrix& m) {
          auto copy = args;
          copy[a] = m;
          return loss(copy).value;
        },
        args[a]);
    worst = std::max(worst, rel_error(r.grads[a], numeric));
  }
  return worst;
}

NoiseSource frozen_noise(const Batch& batch, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t items = batch.items.size() + batch.negatives.size();
  auto n = std::make_shared<BatchNoise>();
  n->h_user = random_unit_rows(batch.users.size(), dim, rng);
  n->h_item = random_unit_rows(items, dim, rng);
  n->eps_user = random_matrix(batch.users.size(), dim, rng);
  n->eps_item = random_matrix(items, dim, rng);
  return [n](const Matrix&, const Matrix&) { return *n; };
}

Outcome gradient_correctness() {
  constexpr double kTol = 1e-4;
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  std::string worst_name;
  auto track = [&](const std::string& name, double err) {
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  };
  // The whole objective has steep curvature near short rows in d = 2, where
  // the 1e-4 central difference is truncation-bound; it is checked at 1e-5.
  double objective = 0.0, objective_coarse = 0.0;

  EdgeList all = synth_interactions(5, 12, 2, 6, 0.9, 3);
  DatasetSplit split = split_dataset(all, 3);
  SemanticStore sem = synth_semantic_vectors(build_graph(split.train), 6, 3, 0.1, 3);
  const TrainingData data = TrainingData::assemble(std::move(split), std::move(sem));
  const std::vector<std::string> variants = {"full", "bpr", "au_user_item", "au_item", "wo_diir", "layers_0"};

  for (int i = 0; i < 50; ++i) {
    const std::size_t b = 2 + i % 7, d = 2 + i % 5;  // B ≤ 8, d ≤ 6
    auto unit = [&] { return random_unit_rows(b, d, rng); };
    track("align", loss_fd_error([](const auto& x) { return align_loss(x[0], x[1]); }, {unit(), unit()}));
    track("uniform", loss_fd_error([](const auto& x) { return uniform_loss(x[0]); }, {unit()}));
    for (auto target : {UniformityTarget::UserOnly, UniformityTarget::UserAndItem, UniformityTarget::ItemOnly})
      track("au", loss_fd_error([&](const auto& x) { return au_loss(x[0], x[1], 1.0, target); }, {unit(), unit()}));
    track("coarse", loss_fd_error([](const auto& x) { return coarse_loss(x[0], x[1], x[2]); },
                                  {unit(), unit(), random_matrix(d, d, rng)}));
    const Matrix z = unit();
    const auto nbr = mine_neighbors(z);
    track("fine", loss_fd_error([&](const auto& x) { return fine_loss(x[0], x[1], nbr); }, {z, random_matrix(b, d, rng)}));
    track("infonce", loss_fd_error([](const auto& x) { return infonce(x[0], x[1], 0.2); }, {unit(), unit()}));
    track("intra", loss_fd_error([](const auto& x) { return intra_loss(x[0], x[1], x[2], x[3], 0.2); },
                                 {unit(), unit(), unit(), unit()}));
    track("inter", loss_fd_error([](const auto& x) { return inter_loss(x[0], x[1], x[2], x[3], 0.2); },
                                 {unit(), unit(), unit(), unit()}));
    track("bpr", loss_fd_error([](const auto& x) { return bpr_loss(x[0], x[1], x[2]); }, {unit(), unit(), unit()}));

    // the whole objective on the tape, K ≤ 4
    TrainConfig c;
    c.dim = d;
    c.intents = 1 + i % 4;
    c.hidden = 5;
    c.weight_decay = 1e-2;
    c.seed = 1000 + i;
    const std::string variant = variants[i % variants.size()];
    apply_variant(c, variant);
    if (i % 2) c.anchor = CoarseAnchor::Prototype;
    const ModelState state = init_model(data, c);
    Rng brng(2000 + i);
    const Batch batch = sample_batch(data.split.train, data.train_items, b, c.toggles.objective, brng);
    const NoiseSource noise = frozen_noise(batch, d, 3000 + i);
    const StepResult r = loss_and_gradients(state, data, batch, noise, c);
    const auto names = state.trainable();
    for (std::size_t t = 0; t < names.size(); ++t) {
      auto objective_fd = [&](double h) {
        return numeric_grad(
            [&](const Matrix& m) {
              ModelState s = state;
              *s.trainable()[t].second = m;
              return loss_and_gradients(s, data, batch, noise, c).losses.total;
            },
            *names[t].second, h);
      };
      objective_coarse = std::max(objective_coarse, rel_error(r.grads[t], objective_fd(1e-4)));
      const Matrix fine = objective_fd(1e-5);
      objective = std::max(objective, rel_error(r.grads[t], fine));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kTol && objective <= kTol && secs < 60.0,
          fmt("50 instances, components max rel err %.2e (%s) <= %.0e at step 1e-4; whole objective %.2e <= %.0e at "
              "step 1e-5 (%.2e at 1e-4, truncation); %.1fs < 60s",
              worst, worst_name.c_str(), kTol, objective, kTol, objective_coarse, secs)};
}

Outcome uniformity_analysis() {
  constexpr double kFdTol = 1e-6, kClosedTol = 1e-10, kTraceTol = 1e-10;
  const auto t0 = Clock::now();
  Rng rng(202);
  double fd = 0.0, closed = 0.0, trace = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Matrix z = random_unit_rows(3 + i % 8, 2 + i % 6, rng);
    for (bool unit : {false, true}) {
      const KernelConvention conv{unit};
      const Matrix g = uniform_grad_closed_form(z, conv);
      fd = std::max(fd, max_abs_diff(g, uniform_grad_numeric(z, 1e-5, conv)));
      const LaplacianForm lf = laplacian_form(z, conv);
      closed = std::max(closed, max_abs_diff(g, lf.gradient));
      // tr(ZᵀLZ) against ½ Σ w_mn ‖z_m − z_n‖², both computed here
      const Matrix lz = matmul(lf.laplacian, z);
      double tr = 0.0, pairwise = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) tr += z.data()[k] * lz.data()[k];
      for (std::size_t m = 0; m < z.rows(); ++m)
        for (std::size_t n = 0; n < z.rows(); ++n) pairwise += 0.5 * lf.weights(m, n) * squared_distance(z.row(m), z.row(n));
      trace = std::max({trace, std::abs(tr - pairwise), std::abs(laplacian_energy(z, conv) - pairwise)});
    }
  }
  const double secs = seconds_since(t0);
  return {fd <= kFdTol && closed <= kClosedTol && trace <= kTraceTol && secs < 10.0,
          fmt("20 instances x 2 kernels: FD %.2e <= %.0e, closed forms %.2e <= %.0e, trace %.2e <= %.0e, %.1fs < 10s", fd,
              kFdTol, closed, kClosedTol, trace, kTraceTol, secs)};
}

Outcome vmf_sampler() {
  constexpr std::size_t kSamples = 100000;
  constexpr double kTol = 0.01, kUniformTol = 0.02;
  const auto t0 = Clock::now();
  Rng rng(303);
  Matrix mean(kSamples, 3);
  for (std::size_t i = 0; i < kSamples; ++i) {
    mean(i, 0) = 1.0;
    mean(i, 1) = -2.0;
    mean(i, 2) = 2.0;
  }
  auto resultant = [&](double kappa) {
    const Matrix s = vmf_sample(mean, kappa, rng);
    double r[3] = {0, 0, 0};
    for (std::size_t i = 0; i < kSamples; ++i)
      for (int j = 0; j < 3; ++j) r[j] += s(i, j) / kSamples;
    return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
  };
  bool ok = true;
  std::string detail;
  for (double kappa : {0.5, 2.0, 10.0}) {
    const double expected = 1.0 / std::tanh(kappa) - 1.0 / kappa;
    const double got = resultant(kappa);
    ok &= std::abs(got - expected) <= kTol;
    detail += fmt("k=%g %.4f vs %.4f; ", kappa, got, expected);
  }
  const double uniform = resultant(0.0);
  ok &= uniform <= kUniformTol;
  const double secs = seconds_since(t0);
  ok &= secs < 30.0;
  return {ok, detail + fmt("k=0 mean norm %.4f <= %.2f, %.1fs < 30s", uniform, kUniformTol, secs)};
}

// Independent top-N metrics straight from a full sort.
std::pair<double, double> brute_metrics(const Matrix& s, const std::vector<std::set<std::size_t>>& train,
                                        const std::vector<std::set<std::size_t>>& target, std::size_t n) {
  double recall = 0.0, ndcg = 0.0;
  std::size_t users = 0;
  for (std::size_t u = 0; u < s.rows(); ++u) {
    if (target[u].empty()) continue;
    ++users;
    std::vector<std::size_t> cand;
    for (std::size_t v = 0; v < s.cols(); ++v)
      if (!train[u].count(v)) cand.push_back(v);
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return s(u, a) > s(u, b); });
    double hits = 0.0, dcg = 0.0, idcg = 0.0;
    for (std::size_t r = 0; r < std::min(n, cand.size()); ++r)
      if (target[u].count(cand[r])) {
        hits += 1.0;
        dcg += 1.0 / std::log2(r + 2.0);
      }
    for (std::size_t r = 0; r < std::min(n, target[u].size()); ++r) idcg += 1.0 / std::log2(r + 2.0);
    recall += hits / target[u].size();
    ndcg += dcg / idcg;
  }
  return {recall / users, ndcg / users};
}

Outcome metric_oracle() {
  constexpr double kTol = 1e-12;
  Rng rng(404);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    EdgeList train, target;
    train.user_count = target.user_count = 6;
    train.item_count = target.item_count = 8;
    std::vector<std::set<std::size_t>> tr(6), te(6);
    for (std::size_t u = 0; u < 6; ++u)
      for (std::size_t v = 0; v < 8; ++v) {
        const double c = coin(rng);
        if (c < 0.3) {
          train.pairs.push_back({u, v});
          tr[u].insert(v);
        } else if (c < 0.55) {
          target.pairs.push_back({u, v});
          te[u].insert(v);
        }
      }
    Matrix s = random_matrix(6, 8, rng);
    if (i % 2)  // coarse scores force ties, which go to the lower index
      for (double& x : s.data()) x = std::round(x * 2.0) / 2.0;
    EvaluationOptions o;
    o.cutoffs = {1, 2, 3, 4, 5, 6, 7, 8};
    o.group_count = 0;
    const MetricsReport r = evaluate_scores(s, train, target, o);
    for (const auto& m : r.overall) {
      const auto [recall, ndcg] = brute_metrics(s, tr, te, m.cutoff);
      worst = std::max({worst, std::abs(m.recall - recall), std::abs(m.ndcg - ndcg)});
    }
  }
  return {worst <= kTol, fmt("100 score matrices, 6x8, N=1..8, max deviation %.2e <= %.0e", worst, kTol)};
}

Outcome synthetic_end_to_end() {
  constexpr double kFactor = 5.0;
  const auto t0 = Clock::now();
  ExperimentSpec spec = desk_spec(root() / "e2e");
  spec.seeds = {1, 2, 3, 4, 5};
  const TrainOutcome o = run_train(spec);
  const TrainingData data = load_training_data(spec);
  const double baseline = random_recall_baseline(data.split.train, data.split.test, 20);
  double mean = 0.0, lo = 1.0;
  std::size_t decreasing = 0;
  for (const auto& s : o.seeds) {
    const double r = s.test.at(20).recall;
    mean += r / o.seeds.size();
    lo = std::min(lo, r);
    const auto& e = s.report.epochs;
    if (e.size() >= 10 && e[9].losses.total < e[0].losses.total) ++decreasing;
  }
  const double secs = seconds_since(t0);
  return {mean >= kFactor * baseline && decreasing >= 4 && secs < 600.0,
          fmt("mean R@20 %.4f (min %.4f) >= %.0fx baseline %.4f (%.1fx); epoch-10 loss below epoch-1 in %zu/5 seeds; "
              "%.0fs < 600s",
              mean, lo, kFactor, baseline, mean / baseline, decreasing, secs)};
}

Outcome ablation_plumbing() {
  ExperimentSpec spec = desk_spec(root() / "plumbing");
  TrainingData data = load_training_data(spec);
  const std::vector<std::string> fields = {"align", "uniform_user", "uniform_item", "bpr", "coarse",
                                           "fine",  "intra",        "inter",        "l2_reg"};
  auto values = [](const LossBreakdown& l) {
    return std::vector<double>{l.align, l.uniform_user, l.uniform_item, l.bpr, l.coarse, l.fine, l.intra, l.inter, l.l2_reg};
  };
  const std::set<std::string> au_full = {"bpr", "uniform_item"};
  const std::map<std::string, std::set<std::string>> zero = {
      {"full", au_full},
      {"wo_fm", {"bpr", "uniform_item", "fine"}},
      {"wo_cm", {"bpr", "uniform_item", "coarse"}},
      {"wo_bothm", {"bpr", "uniform_item", "fine", "coarse"}},
      {"wo_diir", {"bpr", "uniform_item", "intra"}},
      {"wo_ir", {"bpr", "uniform_item", "inter"}},
      {"wo_bothr", {"bpr", "uniform_item", "intra", "inter"}},
      {"bpr", {"align", "uniform_user", "uniform_item"}},
      {"au_user_item", {"bpr"}},
      {"au_item", {"bpr", "uniform_user"}},
      {"layers_0", au_full},
      {"layers_1", au_full},
      {"layers_2", au_full},
      {"layers_3", au_full},
      {"layers_4", au_full},
  };
  std::vector<std::string> problems;
  std::size_t steps = 0;
  for (const auto& variant : variant_names()) {
    TrainConfig c = effective_config(spec);
    c.dim = 16;
    c.intents = 16;
    c.batch = 512;
    apply_variant(c, variant);
    ModelState state = init_model(data, c);
    AdamState adam;
    TrainStreams streams(c.seed);
    const auto& expect = zero.at(variant);
    train_epoch(state, data, c, adam, streams, 1, [&](const StepRecord& rec) {
      ++steps;
      const auto v = values(rec.losses);
      for (std::size_t f = 0; f < fields.size(); ++f) {
        const bool off = expect.count(fields[f]) > 0;
        if (off != (v[f] == 0.0)) problems.push_back(variant + "." + fields[f]);
      }
    });
  }

  // layers_0: the loss ignores the graph entirely, and the ranking base is
  // the raw embedding.
  auto graph_sensitivity = [&](const std::string& variant) {
    TrainConfig c = effective_config(spec);
    c.dim = 16;
    c.intents = 16;
    apply_variant(c, variant);
    const ModelState state = init_model(data, c);
    Rng brng(5);
    const Batch batch = sample_batch(data.split.train, data.train_items, 256, c.toggles.objective, brng);
    const NoiseSource noise = frozen_noise(batch, c.dim, 6);
    TrainingData other = data;
    EdgeList everything = data.split.train;
    for (const auto* part : {&data.split.validation, &data.split.test})
      everything.pairs.insert(everything.pairs.end(), part->pairs.begin(), part->pairs.end());
    other.graph = build_graph(everything);
    const double a = loss_and_gradients(state, data, batch, noise, c).losses.total;
    const double b = loss_and_gradients(state, other, batch, noise, c).losses.total;
    EncoderOptions enc = c.encoder();
    enc.use_dual_intent = false;
    const Representations reps = encode_for_ranking(state, data.graph, data.semantics, enc);
    return std::pair{a != b, max_abs_diff(reps.user, normalize_rows(state.user_mu))};
  };
  const auto [l0_sensitive, l0_gap] = graph_sensitivity("layers_0");
  const auto [l2_sensitive, l2_gap] = graph_sensitivity("layers_2");
  if (l0_sensitive || l0_gap != 0.0) problems.push_back("layers_0 uses propagation");
  if (!l2_sensitive || l2_gap == 0.0) problems.push_back("layers_2 ignores propagation");

  std::string detail = fmt("%zu variants, %zu logged steps, disabled fields identically 0, enabled nonzero; "
                           "layers_0 graph-independent",
                           variant_names().size(), steps);
  if (!problems.empty()) {
    detail += "; mismatches:";
    for (std::size_t i = 0; i < std::min<std::size_t>(problems.size(), 8); ++i) detail += " " + problems[i];
  }
  return {problems.empty(), detail};
}

Outcome geometry_invariants() {
  constexpr double kTol = 1e-6;
  ExperimentSpec spec = desk_spec(root() / "checked");
  spec.overrides["checked"] = "true";
  spec.seeds = {11};
  const TrainOutcome o = run_train(spec);
  const InvariantStats& inv = o.seeds.front().report.invariants;
  return {inv.unit_norm_checks > 0 && inv.softmax_row_checks > 0 && inv.max_norm_error <= kTol &&
              inv.max_row_sum_error <= kTol,
          fmt("%zu epochs; %zu unit-norm checks max err %.2e, %zu softmax-row checks max err %.2e (<= %.0e)",
              o.seeds.front().report.epochs.size(), inv.unit_norm_checks, inv.max_norm_error, inv.softmax_row_checks,
              inv.max_row_sum_error, kTol)};
}

Outcome pipeline_invariants() {
  constexpr double kTol = 1e-10;
  Rng rng(808);
  std::size_t fixpoint_bad = 0, split_bad = 0;
  double prop = 0.0;
  for (int g = 0; g < 100; ++g) {
    const EdgeList e = testing::random_edges(10, 10, 30 + g % 30, rng);
    const std::size_t k = 1 + g % 3;
    try {
      const EdgeList core = k_core_filter(e, k);
      std::vector<std::size_t> du(core.user_count), dv(core.item_count);
      for (const auto& p : core.pairs) {
        ++du[p.user];
        ++dv[p.item];
      }
      const bool degrees_ok = std::all_of(du.begin(), du.end(), [&](std::size_t d) { return d >= k; }) &&
                              std::all_of(dv.begin(), dv.end(), [&](std::size_t d) { return d >= k; });
      if (!degrees_ok || k_core_filter(core, k).pairs != core.pairs) ++fixpoint_bad;
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::EmptyDataset) ++fixpoint_bad;
    }

    const DatasetSplit s = split_dataset(e, g);
    std::multiset<Interaction> parts(s.train.pairs.begin(), s.train.pairs.end());
    parts.insert(s.validation.pairs.begin(), s.validation.pairs.end());
    parts.insert(s.test.pairs.begin(), s.test.pairs.end());
    const std::set<Interaction> unique(parts.begin(), parts.end());
    if (parts != std::multiset<Interaction>(e.pairs.begin(), e.pairs.end()) || unique.size() != parts.size()) ++split_bad;

    const InteractionGraph graph = build_graph(e);
    const Matrix zu = random_matrix(e.user_count, 3, rng), zv = random_matrix(e.item_count, 3, rng);
    const LayerSequence seq = propagate(graph, zu, zv, 3);
    const Matrix a = testing::dense_normalized(e);
    Matrix x = vstack(zu, zv);
    for (std::size_t l = 1; l <= 3; ++l) {
      x = testing::naive_matmul(a, x);
      prop = std::max(prop, max_abs_diff(vstack(seq.users[l], seq.items[l]), x));
    }
  }
  return {fixpoint_bad == 0 && split_bad == 0 && prop <= kTol,
          fmt("100 random graphs (<= 20 nodes): k-core violations %zu, split violations %zu, propagate vs dense %.2e "
              "<= %.0e",
              fixpoint_bad, split_bad, prop, kTol)};
}

Outcome determinism() {
  ExperimentSpec spec = desk_spec(root() / "det_a");
  spec.overrides["epochs_max"] = "5";
  spec.seeds = {21, 22};
  run_train(spec);
  const fs::path a = spec.out_dir;
  spec.out_dir = root() / "det_b";
  run_train(spec);
  const fs::path b = spec.out_dir;
  bool same = slurp(a / "metrics.json") == slurp(b / "metrics.json") && !slurp(a / "metrics.json").empty();
  for (std::uint64_t seed : spec.seeds) {
    const std::string ca = slurp(checkpoint_path(a, seed));
    same &= !ca.empty() && ca == slurp(checkpoint_path(b, seed));
  }
  return {same, "two identical specs, 2 seeds: metrics.json and checkpoints byte-identical"};
}

Outcome complexity() {
  constexpr double kMaxRatio = 5.0;
  ExperimentSpec spec = desk_spec(root() / "cost");
  const TrainingData data = load_training_data(spec);
  const TrainConfig c = effective_config(spec);
  const ModelState state = init_model(data, c);
  Rng brng(9), vrng(10), erng(11);
  const NoiseSource noise = random_noise(c.kappa, vrng, erng);
  std::vector<double> times;
  for (std::size_t b : {512u, 1024u, 2048u}) {
    const Batch batch = sample_batch(data.split.train, data.train_items, b, c.toggles.objective, brng);
    loss_and_gradients(state, data, batch, noise, c);  // warm-up
    double best = INFINITY;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = Clock::now();
      loss_and_gradients(state, data, batch, noise, c);
      best = std::min(best, seconds_since(t0));
    }
    times.push_back(best);
  }
  const double r1 = times[1] / times[0], r2 = times[2] / times[1];
  return {r1 <= kMaxRatio && r2 <= kMaxRatio,
          fmt("d=%zu, B=512/1024/2048: %.1f/%.1f/%.1f ms, ratios %.2f, %.2f <= %.1f", c.dim, times[0] * 1e3,
              times[1] * 1e3, times[2] * 1e3, r1, r2, kMaxRatio)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"uniformity analysis", uniformity_analysis},
      {"vMF sampler", vmf_sampler},
      {"metric oracle equivalence", metric_oracle},
      {"synthetic end-to-end", synthetic_end_to_end},
      {"ablation plumbing", ablation_plumbing},
      {"geometry invariants", geometry_invariants},
      {"pipeline invariants", pipeline_invariants},
      {"determinism", determinism},
      {"complexity contract", complexity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(root());
  return failed ? 1 : 0;
}
