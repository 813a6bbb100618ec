#include "diaurec/harness.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "diaurec/error.hpp"
#include "diaurec/semantic.hpp"

namespace diaurec {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

// Re-throws with the pipeline stage prepended.
template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(name) + ": " + e.what());
  }
}

Json metrics_json(const std::vector<CutoffMetrics>& m) {
  Json j = Json::object();
  for (const auto& c : m) j["R@" + std::to_string(c.cutoff)] = c.recall;
  for (const auto& c : m) j["N@" + std::to_string(c.cutoff)] = c.ndcg;
  return j;
}

Json losses_json(const LossBreakdown& l) {
  return Json{{"align", l.align},   {"uniform_user", l.uniform_user},
              {"uniform_item", l.uniform_item}, {"bpr", l.bpr},
              {"coarse", l.coarse}, {"fine", l.fine},
              {"intra", l.intra},   {"inter", l.inter},
              {"l2_reg", l.l2_reg}, {"total", l.total}};
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string exact(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return s;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

fs::path default_output_root() {
  if (const char* env = std::getenv("DIAUREC_OUT_ROOT"); env && *env) return env;
  return "runs";
}

PrepareResult run_prepare(const PrepareOptions& o) {
  ensure_dir(o.out_dir);
  EdgeList edges;
  if (o.raw) {
    edges = stage("load", [&] { return load_interactions(*o.raw, o.min_rating); });
    edges = stage("k-core", [&] { return k_core_filter(edges, o.k); });
    edges = stage("largest component", [&] { return largest_connected_component(edges); });
  } else {
    const auto& s = o.synthetic;
    edges = stage("synthesize", [&] {
      return compact(synth_interactions(s.users, s.items, s.clusters, s.per_user, s.purity, o.seed));
    });
  }
  PrepareResult r;
  r.stats = dataset_stats(edges);
  r.split = stage("split", [&] { return split_dataset(edges, o.seed); });

  write_edges(o.out_dir / "train.tsv", r.split.train);
  write_edges(o.out_dir / "valid.tsv", r.split.validation);
  write_edges(o.out_dir / "test.tsv", r.split.test);
  write_json(o.out_dir / "dataset_stats.json",
             Json{{"users", r.stats.users},
                  {"items", r.stats.items},
                  {"interactions", r.stats.interactions},
                  {"sparsity", std::round(r.stats.sparsity * 10000.0) / 100.0}});
  write_json(o.out_dir / "split.json", Json{{"source", o.raw ? o.raw->string() : std::string("synthetic")},
                                            {"seed", o.seed},
                                            {"k", o.raw ? Json(o.k) : Json(nullptr)},
                                            {"train", r.split.train.size()},
                                            {"validation", r.split.validation.size()},
                                            {"test", r.split.test.size()}});
  if (!o.raw) {
    const auto& s = o.synthetic;
    const InteractionGraph g = build_graph(r.split.train);
    const SemanticStore sem = synth_semantic_vectors(g, s.semantic_dim, s.clusters, s.semantic_noise, o.seed);
    write_semantic_matrix(o.out_dir / "user_semantic.bin", sem.raw_user);
    write_semantic_matrix(o.out_dir / "item_semantic.bin", sem.raw_item);
  }
  return r;
}

TrainConfig effective_config(const ExperimentSpec& spec) {
  TrainConfig c = spec.config;
  apply_variant(c, spec.variant);
  for (const auto& [k, v] : spec.overrides) c.set(k, v);
  c.validate();
  return c;
}

TrainingData load_training_data(const ExperimentSpec& spec) {
  DatasetSplit split;
  split.train = read_edges(spec.data_dir / "train.tsv");
  split.validation = read_edges(spec.data_dir / "valid.tsv");
  split.test = read_edges(spec.data_dir / "test.tsv");
  const std::size_t users = split.train.user_count, items = split.train.item_count;
  for (const EdgeList* e : {&split.validation, &split.test})
    if (e->user_count != users || e->item_count != items)
      fail(ErrorKind::Alignment, "split files in " + spec.data_dir.string() + " disagree on user/item counts");

  SemanticStore sem;
  if (spec.user_semantic && spec.item_semantic) {
    sem = load_semantic_vectors(*spec.user_semantic, *spec.item_semantic, users, items);
  } else if (fs::exists(spec.data_dir / "user_semantic.bin") && fs::exists(spec.data_dir / "item_semantic.bin")) {
    sem = load_semantic_vectors(spec.data_dir / "user_semantic.bin", spec.data_dir / "item_semantic.bin", users, items);
  } else {
    const TrainConfig c = effective_config(spec);
    sem = synth_semantic_vectors(build_graph(split.train), c.semantic_dim, c.semantic_clusters, c.semantic_noise,
                                 c.seed);
  }
  return TrainingData::assemble(std::move(split), std::move(sem));
}

fs::path checkpoint_path(const fs::path& out_dir, std::uint64_t seed) {
  return out_dir / ("model_seed" + std::to_string(seed) + ".ckpt");
}

TrainOutcome run_train(const ExperimentSpec& spec) {
  if (spec.seeds.empty()) fail(ErrorKind::InvalidArgument, "train: no seeds given");
  const TrainConfig base = effective_config(spec);
  const TrainingData data = load_training_data(spec);
  ensure_dir(spec.out_dir);
  write_config_file(spec.out_dir / "config.txt", base);

  std::ofstream log(spec.out_dir / "train_log.jsonl");
  if (!log) fail(ErrorKind::Io, "cannot write train_log.jsonl in " + spec.out_dir.string());

  TrainOutcome outcome;
  Json per_seed = Json::array(), reports = Json::array(), groups = Json::array();
  for (std::uint64_t seed : spec.seeds) {
    TrainConfig config = base;
    config.seed = seed;
    ModelState state = init_model(data, config);
    const StepLogger logger = [&](const StepRecord& r) {
      Json line{{"seed", seed}, {"epoch", r.epoch}, {"step", r.step}};
      const Json losses = losses_json(r.losses);
      for (auto it = losses.begin(); it != losses.end(); ++it) line[it.key()] = it.value();
      line["negative_fallbacks"] = r.negative_fallbacks;
      log << line.dump() << '\n';
    };
    SeedOutcome so;
    so.seed = seed;
    so.report = fit(state, data, config, logger);
    save_checkpoint(checkpoint_path(spec.out_dir, seed), state);
    const Representations reps = encode_for_ranking(state, data.graph, data.semantics, config.encoder());
    so.test = evaluate(reps, data.split.train, data.split.test);

    per_seed.push_back(Json{{"seed", seed},
                            {"best_epoch", so.report.best_epoch},
                            {"epochs_run", so.report.epochs.size()},
                            {"termination", to_string(so.report.termination)},
                            {"best_valid_recall@" + std::to_string(config.valid_cutoff), so.report.best_valid_recall},
                            {"test", metrics_json(so.test.overall)}});
    Json epochs = Json::array();
    for (const auto& e : so.report.epochs)
      epochs.push_back(Json{{"epoch", e.epoch}, {"losses", losses_json(e.losses)}, {"valid_recall", e.valid_recall},
                            {"seconds", e.seconds}});
    Json rep{{"seed", seed}, {"best_epoch", so.report.best_epoch},
             {"termination", to_string(so.report.termination)}, {"epochs", epochs}};
    if (config.checked) {
      const auto& inv = so.report.invariants;
      rep["invariants"] = Json{{"unit_norm_checks", inv.unit_norm_checks},
                               {"softmax_row_checks", inv.softmax_row_checks},
                               {"max_norm_error", inv.max_norm_error},
                               {"max_row_sum_error", inv.max_row_sum_error}};
    }
    reports.push_back(rep);
    Json g = Json::array();
    for (const auto& gm : so.test.groups)
      g.push_back(Json{{"group", gm.group}, {"users", gm.users}, {"min_degree", gm.min_degree},
                       {"max_degree", gm.max_degree}, {"metrics", metrics_json(gm.metrics)}});
    groups.push_back(Json{{"seed", seed}, {"groups", g}});
    outcome.seeds.push_back(std::move(so));
  }
  log.close();

  const auto& cutoffs = outcome.seeds.front().test.overall;
  std::vector<CutoffMetrics> stdev;
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    std::vector<double> r, n;
    for (const auto& s : outcome.seeds) {
      r.push_back(s.test.overall[c].recall);
      n.push_back(s.test.overall[c].ndcg);
    }
    outcome.mean.push_back({cutoffs[c].cutoff, mean_of(r), mean_of(n)});
    stdev.push_back({cutoffs[c].cutoff, std_of(r), std_of(n)});
  }
  Json seeds_json = Json::array();
  for (auto s : spec.seeds) seeds_json.push_back(s);
  write_json(spec.out_dir / "metrics.json",
             Json{{"variant", spec.variant},
                  {"seeds", seeds_json},
                  {"per_seed", per_seed},
                  {"mean", metrics_json(outcome.mean)},
                  {"std", metrics_json(stdev)},
                  {"random_baseline_R@20", random_recall_baseline(data.split.train, data.split.test, 20)}});
  write_json(spec.out_dir / "sparsity_groups.json", groups);
  write_json(spec.out_dir / "train_report.json", reports);
  return outcome;
}

MetricsReport run_evaluate(const fs::path& checkpoint, const ExperimentSpec& spec) {
  const TrainConfig config = effective_config(spec);
  const TrainingData data = load_training_data(spec);
  const ModelState state = load_checkpoint(checkpoint);
  const Representations reps = encode_for_ranking(state, data.graph, data.semantics, config.encoder());
  MetricsReport report = evaluate(reps, data.split.train, data.split.test);
  if (!spec.out_dir.empty()) {
    ensure_dir(spec.out_dir);
    Json g = Json::array();
    for (const auto& gm : report.groups)
      g.push_back(Json{{"group", gm.group}, {"users", gm.users}, {"min_degree", gm.min_degree},
                       {"max_degree", gm.max_degree}, {"metrics", metrics_json(gm.metrics)}});
    write_json(spec.out_dir / "eval_metrics.json", Json{{"checkpoint", checkpoint.string()},
                                                        {"evaluated_users", report.evaluated_users},
                                                        {"test", metrics_json(report.overall)},
                                                        {"groups", g}});
  }
  return report;
}

void write_ablation_table(const fs::path& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "variant\tstatus\tR@20_mean\tR@20_std\tN@20_mean\tN@20_std\tR@20_per_seed\tN@20_per_seed\tmessage\n";
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + exact(v[i]);
    return s;
  };
  for (const auto& r : rows) {
    out << r.variant << '\t' << (r.ok ? "ok" : "error") << '\t';
    if (r.ok)
      out << exact(r.recall_mean) << '\t' << exact(r.recall_std) << '\t' << exact(r.ndcg_mean) << '\t'
          << exact(r.ndcg_std) << '\t' << join(r.recall) << '\t' << join(r.ndcg) << '\t';
    else
      out << "\t\t\t\t\t\t";
    out << one_line(r.error) << '\n';
  }
}

std::vector<AblationRow> read_ablation_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<AblationRow> rows;
  std::size_t line_no = 1;
  auto parse_list = [&](const std::string& s) {
    std::vector<double> v;
    for (const auto& t : split_on(s, ',')) v.push_back(std::stod(t));
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_on(line, '\t');
    if (f.size() != 9) fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": expected 9 columns");
    AblationRow r;
    r.variant = f[0];
    r.ok = f[1] == "ok";
    r.error = f[8];
    try {
      if (r.ok) {
        r.recall_mean = std::stod(f[2]);
        r.recall_std = std::stod(f[3]);
        r.ndcg_mean = std::stod(f[4]);
        r.ndcg_std = std::stod(f[5]);
        r.recall = parse_list(f[6]);
        r.ndcg = parse_list(f[7]);
      }
    } catch (const std::logic_error&) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<AblationRow> run_ablation_matrix(const ExperimentSpec& base, const std::vector<std::string>& variants) {
  ensure_dir(base.out_dir);
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    AblationRow row;
    row.variant = v;
    ExperimentSpec spec = base;
    spec.variant = v;
    spec.out_dir = base.out_dir / v;
    try {
      const TrainOutcome o = run_train(spec);
      for (const auto& s : o.seeds) {
        row.recall.push_back(s.test.at(20).recall);
        row.ndcg.push_back(s.test.at(20).ndcg);
      }
      row.recall_mean = mean_of(row.recall);
      row.recall_std = std_of(row.recall);
      row.ndcg_mean = mean_of(row.ndcg);
      row.ndcg_std = std_of(row.ndcg);
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  write_ablation_table(base.out_dir / "ablation.tsv", rows);

  Json table = Json::array();
  for (const auto& r : rows) {
    Json j{{"variant", r.variant}, {"status", r.ok ? "ok" : "error"}};
    if (r.ok) {
      j["R@20"] = Json{{"mean", r.recall_mean}, {"std", r.recall_std}, {"per_seed", r.recall}};
      j["N@20"] = Json{{"mean", r.ndcg_mean}, {"std", r.ndcg_std}, {"per_seed", r.ndcg}};
    } else {
      j["message"] = r.error;
    }
    table.push_back(j);
  }
  write_json(base.out_dir / "ablation.json", table);

  Json sig = Json::array();
  const AblationRow* full = nullptr;
  for (const auto& r : rows)
    if (r.variant == "full" && r.ok) full = &r;
  for (const auto& r : rows) {
    if (!full || &r == full || !r.ok) continue;
    Json j{{"variant", r.variant}, {"against", "full"}};
    for (const auto& [name, a, b] : {std::tuple{"R@20", &full->recall, &r.recall}, std::tuple{"N@20", &full->ndcg, &r.ndcg}}) {
      try {
        j[name] = paired_t_test(*a, *b);
      } catch (const Error& e) {
        j[name] = nullptr;
        j[std::string(name) + "_note"] = e.what();
      }
    }
    sig.push_back(j);
  }
  write_json(base.out_dir / "significance.json", sig);
  return rows;
}

DiagnosticsResult run_diagnostics(const DiagnosticsOptions& o) {
  const ModelState state = load_checkpoint(o.checkpoint);
  Matrix users, items;
  EdgeList pairs;
  if (o.data) {
    const TrainingData data = load_training_data(*o.data);
    const Representations reps = encode_for_ranking(state, data.graph, data.semantics, effective_config(*o.data).encoder());
    users = reps.user;
    items = reps.item;
    pairs = data.split.train;
  } else {
    users = normalize_rows(state.user_mu);
    items = normalize_rows(state.item_mu);
  }
  DiagnosticsResult r;
  r.geometry = measure_geometry(users, items, pairs, o.sample_size, o.seed);

  // The trained populations join the random instances, capped so the
  // pairwise checks stay cheap.
  const std::size_t cap = std::min<std::size_t>(64, std::min(users.rows(), items.rows()));
  std::vector<std::size_t> head(cap);
  std::iota(head.begin(), head.end(), std::size_t{0});
  r.gradients = run_gradient_suite(o.instances, o.seed, o.convention, {gather_rows(users, head), gather_rows(items, head)});

  ensure_dir(o.out_dir);
  const auto& g = r.geometry;
  Json hist = Json::array();
  for (auto c : g.nn_cosine_histogram) hist.push_back(c);
  write_json(o.out_dir / "geometry.json",
             Json{{"checkpoint", o.checkpoint.string()},
                  {"representation", o.data ? "ranking" : "base_embeddings"},
                  {"loss_convention", o.convention.describe()},
                  {"user_sample", g.user_sample},
                  {"item_sample", g.item_sample},
                  {"pair_sample", g.pair_sample},
                  {"alignment", g.alignment},
                  {"uniformity_user", g.uniformity_user},
                  {"uniformity_item", g.uniformity_item},
                  {"laplacian_energy_user", g.energy_user},
                  {"laplacian_energy_item", g.energy_item},
                  {"grad_norm_user_mean", mean_of(g.grad_norm_user)},
                  {"grad_norm_item_mean", mean_of(g.grad_norm_item)},
                  {"nn_cosine_histogram", Json{{"range", {-1.0, 1.0}}, {"bins", hist}}}});
  const auto& gr = r.gradients;
  write_json(o.out_dir / "gradient_check.json", Json{{"loss_convention", gr.convention},
                                                     {"instances", gr.instances},
                                                     {"fd_step", gr.fd_step},
                                                     {"max_fd_error", gr.max_fd_error},
                                                     {"max_closed_form_gap", gr.max_closed_form_gap},
                                                     {"max_row_sum", gr.max_row_sum},
                                                     {"max_energy_gap", gr.max_energy_gap},
                                                     {"max_rotation_gap", gr.max_rotation_gap},
                                                     {"max_tangent_error", gr.max_tangent_error},
                                                     {"tolerances", Json{{"fd", 1e-6},
                                                                         {"closed_form", 1e-10},
                                                                         {"row_sum", 1e-8},
                                                                         {"energy", 1e-10},
                                                                         {"tangent", 1e-6}}},
                                                     {"passed", gr.passed},
                                                     {"failures", gr.failures}});
  std::ofstream tsv(o.out_dir / "gradient_norms.tsv");
  tsv << "population\tindex\tgrad_norm\n";
  for (std::size_t i = 0; i < g.grad_norm_user.size(); ++i) tsv << "user\t" << i << '\t' << exact(g.grad_norm_user[i]) << '\n';
  for (std::size_t i = 0; i < g.grad_norm_item.size(); ++i) tsv << "item\t" << i << '\t' << exact(g.grad_norm_item[i]) << '\n';
  return r;
}

}  // namespace diaurec
