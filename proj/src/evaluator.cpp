#include "diaurec/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "diaurec/error.hpp"

namespace diaurec {

const CutoffMetrics& MetricsReport::at(std::size_t cutoff) const {
  for (const auto& m : overall)
    if (m.cutoff == cutoff) return m;
  fail(ErrorKind::InvalidArgument, "metrics report has no cutoff " + std::to_string(cutoff));
}

std::vector<std::size_t> rank_items(std::span<const double> scores, std::span<const std::size_t> exclude, std::size_t n) {
  std::vector<std::size_t> candidates;
  candidates.reserve(scores.size());
  std::size_t e = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    while (e < exclude.size() && exclude[e] < i) ++e;
    if (e < exclude.size() && exclude[e] == i) continue;
    candidates.push_back(i);
  }
  if (n > candidates.size()) {
    fail(ErrorKind::InvalidArgument, "rank_items: N=" + std::to_string(n) + " exceeds " +
                                         std::to_string(candidates.size()) + " candidate items");
  }
  auto better = [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n), candidates.end(), better);
  candidates.resize(n);
  return candidates;
}

std::vector<std::size_t> rank_items(const Representations& reps, std::size_t user, std::span<const std::size_t> exclude,
                                    std::size_t n) {
  if (user >= reps.user.rows()) fail(ErrorKind::InvalidArgument, "rank_items: unknown user " + std::to_string(user));
  std::vector<double> scores(reps.item.rows());
  for (std::size_t v = 0; v < scores.size(); ++v) scores[v] = score(reps.user.row(user), reps.item.row(v));
  return rank_items(scores, exclude, n);
}

std::optional<double> recall_at_n(std::span<const std::size_t> topn, std::span<const std::size_t> relevant) {
  if (relevant.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t v : topn)
    if (std::find(relevant.begin(), relevant.end(), v) != relevant.end()) ++hits;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

std::optional<double> ndcg_at_n(std::span<const std::size_t> topn, std::span<const std::size_t> relevant) {
  if (relevant.empty()) return std::nullopt;
  double dcg = 0.0;
  for (std::size_t r = 0; r < topn.size(); ++r)
    if (std::find(relevant.begin(), relevant.end(), topn[r]) != relevant.end()) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min(topn.size(), relevant.size());
  for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

std::vector<std::size_t> sparsity_groups(const EdgeList& train, std::size_t group_count) {
  if (group_count < 2) fail(ErrorKind::InvalidArgument, "sparsity_groups: need at least 2 groups");
  const std::size_t users = train.user_count;
  if (users < group_count) fail(ErrorKind::InvalidArgument, "sparsity_groups: fewer users than groups");
  std::vector<std::size_t> degree(users, 0);
  for (const auto& e : train.pairs) ++degree[e.user];
  std::vector<std::size_t> order(users);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return degree[a] < degree[b]; });

  std::vector<std::size_t> group(users, 0);
  const std::size_t base = users / group_count, extra = users % group_count;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < group_count; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) group[order[pos++]] = g;
  }
  return group;
}

namespace {

template <typename ScoreRow>
MetricsReport evaluate_impl(std::size_t users, std::size_t items, ScoreRow&& score_row, const EdgeList& train,
                            const EdgeList& target, const EvaluationOptions& options) {
  if (options.cutoffs.empty()) fail(ErrorKind::InvalidArgument, "evaluate: no cutoffs");
  const auto train_items = items_by_user(train);
  const auto target_items = items_by_user(target);
  const std::size_t max_cut = *std::max_element(options.cutoffs.begin(), options.cutoffs.end());
  const std::size_t k = options.cutoffs.size();

  std::vector<std::size_t> group;
  const bool grouped = options.group_count >= 2 && users >= options.group_count;
  if (grouped) group = sparsity_groups(train, options.group_count);

  MetricsReport report;
  std::vector<double> recall_sum(k, 0.0), ndcg_sum(k, 0.0);
  const std::size_t groups = grouped ? options.group_count : 0;
  std::vector<std::vector<double>> g_recall(groups, std::vector<double>(k, 0.0)), g_ndcg = g_recall;
  std::vector<std::size_t> g_users(groups, 0);

  std::vector<double> scores(items);
  for (std::size_t u = 0; u < users; ++u) {
    if (u >= target_items.size() || target_items[u].empty()) continue;
    score_row(u, scores);
    const auto& exclude = u < train_items.size() ? train_items[u] : std::vector<std::size_t>{};
    const std::size_t candidates = items - exclude.size();
    const auto ranked = rank_items(scores, exclude, std::min(max_cut, candidates));
    for (std::size_t c = 0; c < k; ++c) {
      const std::span<const std::size_t> top(ranked.data(), std::min(options.cutoffs[c], ranked.size()));
      const double r = *recall_at_n(top, target_items[u]);
      const double n = *ndcg_at_n(top, target_items[u]);
      recall_sum[c] += r;
      ndcg_sum[c] += n;
      if (grouped) {
        g_recall[group[u]][c] += r;
        g_ndcg[group[u]][c] += n;
      }
    }
    if (grouped) ++g_users[group[u]];
    ++report.evaluated_users;
  }
  if (report.evaluated_users == 0) fail(ErrorKind::EmptyDataset, "evaluate: no user has held-out items");

  for (std::size_t c = 0; c < k; ++c) {
    const double n = static_cast<double>(report.evaluated_users);
    report.overall.push_back({options.cutoffs[c], recall_sum[c] / n, ndcg_sum[c] / n});
  }
  if (grouped) {
    std::vector<std::size_t> degree(users, 0);
    for (const auto& e : train.pairs) ++degree[e.user];
    for (std::size_t g = 0; g < groups; ++g) {
      GroupMetrics gm;
      gm.group = g;
      gm.users = g_users[g];
      gm.min_degree = SIZE_MAX;
      for (std::size_t u = 0; u < users; ++u) {
        if (group[u] != g) continue;
        gm.min_degree = std::min(gm.min_degree, degree[u]);
        gm.max_degree = std::max(gm.max_degree, degree[u]);
      }
      for (std::size_t c = 0; c < k; ++c) {
        const double n = g_users[g] ? static_cast<double>(g_users[g]) : 1.0;
        gm.metrics.push_back({options.cutoffs[c], g_recall[g][c] / n, g_ndcg[g][c] / n});
      }
      report.groups.push_back(std::move(gm));
    }
  }
  return report;
}

}  // namespace

MetricsReport evaluate(const Representations& reps, const EdgeList& train, const EdgeList& target,
                       const EvaluationOptions& options) {
  if (reps.user.rows() != train.user_count || reps.item.rows() != train.item_count) {
    fail(ErrorKind::Shape, "evaluate: representation counts do not match the dataset");
  }
  return evaluate_impl(
      reps.user.rows(), reps.item.rows(),
      [&](std::size_t u, std::vector<double>& scores) {
        const auto zu = reps.user.row(u);
        for (std::size_t v = 0; v < scores.size(); ++v) scores[v] = dot(zu, reps.item.row(v));
      },
      train, target, options);
}

MetricsReport evaluate_scores(const Matrix& scores, const EdgeList& train, const EdgeList& target,
                              const EvaluationOptions& options) {
  return evaluate_impl(
      scores.rows(), scores.cols(),
      [&](std::size_t u, std::vector<double>& out) {
        const auto r = scores.row(u);
        std::copy(r.begin(), r.end(), out.begin());
      },
      train, target, options);
}

double random_recall_baseline(const EdgeList& train, const EdgeList& target, std::size_t cutoff) {
  const auto train_items = items_by_user(train);
  const auto target_items = items_by_user(target);
  double sum = 0.0;
  std::size_t users = 0;
  for (std::size_t u = 0; u < target_items.size(); ++u) {
    if (target_items[u].empty()) continue;
    const double candidates = static_cast<double>(train.item_count - train_items[u].size());
    sum += std::min(static_cast<double>(cutoff), candidates) / candidates;
    ++users;
  }
  if (users == 0) fail(ErrorKind::EmptyDataset, "random_recall_baseline: no evaluable users");
  return sum / static_cast<double>(users);
}

double paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) fail(ErrorKind::InvalidArgument, "paired_t_test: need two equal-length series of length >= 2");
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) {
    if (mean == 0.0) fail(ErrorKind::InvalidArgument, "paired_t_test: all differences are zero, test undefined");
    return 0.0;
  }
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace diaurec
