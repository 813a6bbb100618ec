#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "diaurec/data_core.hpp"
#include "diaurec/intent.hpp"
#include "diaurec/matrix.hpp"

namespace diaurec {

struct CutoffMetrics {
  std::size_t cutoff = 0;
  double recall = 0.0;
  double ndcg = 0.0;
};

struct GroupMetrics {
  std::size_t group = 0;
  std::size_t users = 0;  // evaluated users in this bucket
  std::size_t min_degree = 0, max_degree = 0;
  std::vector<CutoffMetrics> metrics;
};

struct MetricsReport {
  std::vector<CutoffMetrics> overall;
  std::vector<GroupMetrics> groups;
  std::size_t evaluated_users = 0;

  const CutoffMetrics& at(std::size_t cutoff) const;
};

// Indices of the N highest scores, skipping `exclude` (sorted); ties go to
// the lower index.
std::vector<std::size_t> rank_items(std::span<const double> scores, std::span<const std::size_t> exclude, std::size_t n);

// Same, scoring every item against one user's representation.
std::vector<std::size_t> rank_items(const Representations& reps, std::size_t user,
                                    std::span<const std::size_t> exclude, std::size_t n);

// nullopt when `relevant` is empty (user is skipped).
std::optional<double> recall_at_n(std::span<const std::size_t> topn, std::span<const std::size_t> relevant);
std::optional<double> ndcg_at_n(std::span<const std::size_t> topn, std::span<const std::size_t> relevant);

// Users sorted by train degree (stable by index), cut into `group_count`
// buckets whose sizes differ by at most one; lowest-degree bucket first.
std::vector<std::size_t> sparsity_groups(const EdgeList& train, std::size_t group_count);

struct EvaluationOptions {
  std::vector<std::size_t> cutoffs{5, 10, 20};
  std::size_t group_count = 4;  // 0 disables the sparsity breakdown
};

// Full ranking over all non-train items; averages over users with a
// nonempty target set.
MetricsReport evaluate(const Representations& reps, const EdgeList& train, const EdgeList& target,
                       const EvaluationOptions& options = {});

// Same protocol on an arbitrary users × items score matrix.
MetricsReport evaluate_scores(const Matrix& scores, const EdgeList& train, const EdgeList& target,
                              const EvaluationOptions& options = {});

// Expected Recall@N of a uniformly random ranking: mean over evaluated users
// of min(N, C_u)/C_u with C_u the number of candidate items.
double random_recall_baseline(const EdgeList& train, const EdgeList& target, std::size_t cutoff);

// Two-tailed paired t-test p-value over per-seed metric values.
double paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace diaurec
