// diaurec command-line entry point: prepare, train, evaluate, ablate, diagnose.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diaurec/error.hpp"
#include "diaurec/harness.hpp"

namespace fs = std::filesystem;
using namespace diaurec;

namespace {

struct CommonArgs {
  std::string data;
  std::string config;
  std::string variant = "full";
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> sets;
  std::string out;
  std::string user_semantic, item_semantic;
  bool checked = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool data_required) {
  auto* d = cmd->add_option("--data", a.data, "Prepared dataset directory");
  if (data_required) d->required();
  cmd->add_option("--config", a.config, "key = value config file");
  cmd->add_option("--variant", a.variant, "Variant preset");
  cmd->add_option("--seed,--seeds", a.seeds, "Seed(s); training repeats per seed")->delimiter(',');
  cmd->add_option("--set", a.sets, "Override a config key (key=value), repeatable");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--user-semantic", a.user_semantic, "User semantic matrix (overrides dataset files)");
  cmd->add_option("--item-semantic", a.item_semantic, "Item semantic matrix (overrides dataset files)");
  cmd->add_flag("--checked", a.checked, "Assert geometry invariants on every step");
}

fs::path out_dir(const std::string& given, const std::string& fallback) {
  return given.empty() ? default_output_root() / fallback : fs::path(given);
}

ExperimentSpec make_spec(const CommonArgs& a, const std::string& fallback_out) {
  ExperimentSpec s;
  s.data_dir = a.data;
  if (!a.config.empty())
    for (const auto& [k, v] : read_config_file(a.config)) s.config.set(k, v);
  s.variant = a.variant;
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Usage, "--set expects key=value, got '" + kv + "'");
    s.overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (a.checked) s.overrides["checked"] = "true";
  if (!a.seeds.empty()) {
    s.seeds = a.seeds;
  } else {
    // the override is validated by TrainConfig::set, so parse it the same way
    TrainConfig probe = s.config;
    if (const auto it = s.overrides.find("seed"); it != s.overrides.end()) probe.set("seed", it->second);
    s.seeds = {probe.seed};
  }
  if (!a.user_semantic.empty() || !a.item_semantic.empty()) {
    if (a.user_semantic.empty() || a.item_semantic.empty())
      fail(ErrorKind::Usage, "--user-semantic and --item-semantic must be given together");
    s.user_semantic = a.user_semantic;
    s.item_semantic = a.item_semantic;
  }
  s.out_dir = out_dir(a.out, fallback_out);
  return s;
}

void print_metrics(const std::vector<CutoffMetrics>& m) {
  for (const auto& c : m) std::printf("  R@%zu %.4f  N@%zu %.4f\n", c.cutoff, c.recall, c.cutoff, c.ndcg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DIAURec training and evaluation engine"};
  app.require_subcommand(1);

  PrepareOptions prep;
  std::string raw;
  double min_rating = 0.0;
  std::string prep_out;
  auto* prepare = app.add_subcommand("prepare", "Filter, split and describe a dataset");
  prepare->add_option("--raw", raw, "Interactions TSV (user, item[, rating]); synthetic data when omitted");
  auto* min_rating_opt = prepare->add_option("--min-rating", min_rating, "Drop records rated below this");
  prepare->add_option("--k", prep.k, "k-core threshold")->capture_default_str();
  prepare->add_option("--seed", prep.seed, "Split / synthesis seed")->capture_default_str();
  prepare->add_option("--out", prep_out, "Dataset output directory");
  prepare->add_option("--users", prep.synthetic.users)->capture_default_str();
  prepare->add_option("--items", prep.synthetic.items)->capture_default_str();
  prepare->add_option("--clusters", prep.synthetic.clusters)->capture_default_str();
  prepare->add_option("--per-user", prep.synthetic.per_user)->capture_default_str();
  prepare->add_option("--purity", prep.synthetic.purity)->capture_default_str();
  prepare->add_option("--semantic-dim", prep.synthetic.semantic_dim)->capture_default_str();
  prepare->add_option("--semantic-noise", prep.synthetic.semantic_noise)->capture_default_str();

  CommonArgs train_args;
  auto* train = app.add_subcommand("train", "Fit a variant for one or more seeds");
  add_common(train, train_args, true);

  CommonArgs eval_args;
  std::string eval_ckpt;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Rank the test split with a saved model");
  add_common(evaluate_cmd, eval_args, true);
  evaluate_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();

  CommonArgs abl_args;
  std::vector<std::string> abl_variants;
  auto* ablate = app.add_subcommand("ablate", "Train several variants and tabulate R@20 / N@20");
  add_common(ablate, abl_args, true);
  ablate->add_option("--variants", abl_variants, "Variant list (default: every preset)")->delimiter(',');

  CommonArgs diag_args;
  DiagnosticsOptions diag;
  std::string diag_ckpt;
  bool unit_kernel = false;
  auto* diagnose = app.add_subcommand("diagnose", "Geometry report and uniformity gradient checks");
  add_common(diagnose, diag_args, false);
  diagnose->add_option("--checkpoint", diag_ckpt, "Model checkpoint")->required();
  diagnose->add_option("--sample-size", diag.sample_size)->capture_default_str();
  diagnose->add_option("--instances", diag.instances, "Random point sets in the gradient suite")->capture_default_str();
  diagnose->add_flag("--unit-kernel", unit_kernel, "Use the exp(-d^2) kernel convention");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    if (*prepare) {
      if (!raw.empty()) prep.raw = raw;
      if (*min_rating_opt) prep.min_rating = min_rating;
      prep.out_dir = out_dir(prep_out, "data");
      const PrepareResult r = run_prepare(prep);
      std::printf("%zu users, %zu items, %zu interactions, sparsity %.2f%%\n", r.stats.users, r.stats.items,
                  r.stats.interactions, r.stats.sparsity * 100.0);
      std::printf("split %zu / %zu / %zu -> %s\n", r.split.train.size(), r.split.validation.size(),
                  r.split.test.size(), prep.out_dir.string().c_str());
    } else if (*train) {
      const ExperimentSpec spec = make_spec(train_args, "train/" + train_args.variant);
      const TrainOutcome o = run_train(spec);
      for (const auto& s : o.seeds)
        std::printf("seed %llu: best epoch %zu of %zu (%s)\n", static_cast<unsigned long long>(s.seed),
                    s.report.best_epoch, s.report.epochs.size(), to_string(s.report.termination).c_str());
      std::printf("test, mean over %zu seed(s):\n", o.seeds.size());
      print_metrics(o.mean);
    } else if (*evaluate_cmd) {
      const ExperimentSpec spec = make_spec(eval_args, "evaluate");
      const MetricsReport r = run_evaluate(eval_ckpt, spec);
      std::printf("test, %zu users:\n", r.evaluated_users);
      print_metrics(r.overall);
    } else if (*ablate) {
      const ExperimentSpec spec = make_spec(abl_args, "ablate");
      if (abl_variants.empty()) abl_variants = variant_names();
      const auto rows = run_ablation_matrix(spec, abl_variants);
      for (const auto& r : rows) {
        if (r.ok)
          std::printf("%-14s R@20 %.4f ± %.4f  N@20 %.4f ± %.4f\n", r.variant.c_str(), r.recall_mean, r.recall_std,
                      r.ndcg_mean, r.ndcg_std);
        else
          std::printf("%-14s error: %s\n", r.variant.c_str(), r.error.c_str());
      }
    } else if (*diagnose) {
      diag.checkpoint = diag_ckpt;
      diag.convention.unit_kernel = unit_kernel;
      const ExperimentSpec spec = make_spec(diag_args, "diagnose");
      diag.out_dir = spec.out_dir;
      diag.seed = spec.seeds.front();
      if (!diag_args.data.empty()) diag.data = spec;
      const DiagnosticsResult r = run_diagnostics(diag);
      std::printf("alignment %.6f  uniformity user %.6f item %.6f\n", r.geometry.alignment, r.geometry.uniformity_user,
                  r.geometry.uniformity_item);
      std::printf("gradient checks (%s): %s\n", r.gradients.convention.c_str(), r.gradients.passed ? "pass" : "FAIL");
      for (const auto& f : r.gradients.failures) std::fprintf(stderr, "  %s\n", f.c_str());
      if (!r.gradients.passed) return 3;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
