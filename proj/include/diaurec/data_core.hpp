#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diaurec/matrix.hpp"

namespace diaurec {

struct Interaction {
  std::size_t user = 0;
  std::size_t item = 0;
  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

// Observed user-item pairs with dense 0-based indices.
struct EdgeList {
  std::vector<Interaction> pairs;
  std::size_t user_count = 0;
  std::size_t item_count = 0;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
};

struct DatasetSplit {
  EdgeList train;
  EdgeList validation;
  EdgeList test;
};

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double sparsity = 0.0;  // fraction, 1 - interactions / (users * items)
};

// Bipartite interaction graph with symmetric-normalized edge weights
// 1/sqrt(deg(u) deg(v)), stored as user->item and item->user CSR.
class InteractionGraph {
 public:
  std::size_t user_count() const noexcept { return user_degrees_.size(); }
  std::size_t item_count() const noexcept { return item_degrees_.size(); }
  std::size_t edge_count() const noexcept { return user_items_.size(); }

  const std::vector<std::size_t>& user_offsets() const noexcept { return user_offsets_; }
  const std::vector<std::size_t>& user_items() const noexcept { return user_items_; }
  const std::vector<double>& user_weights() const noexcept { return user_weights_; }
  const std::vector<std::size_t>& item_offsets() const noexcept { return item_offsets_; }
  const std::vector<std::size_t>& item_users() const noexcept { return item_users_; }
  const std::vector<double>& item_weights() const noexcept { return item_weights_; }
  const std::vector<std::size_t>& user_degrees() const noexcept { return user_degrees_; }
  const std::vector<std::size_t>& item_degrees() const noexcept { return item_degrees_; }

  // Weight of edge (u, v), or nullopt when absent.
  std::optional<double> weight(std::size_t user, std::size_t item) const;
  bool has_edge(std::size_t user, std::size_t item) const { return weight(user, item).has_value(); }

  // One propagation step on node embeddings stacked as [users; items].
  // The normalized adjacency is symmetric, so this is also its own adjoint.
  Matrix step_stacked(const Matrix& stacked) const;

  friend InteractionGraph build_graph(const EdgeList& train);

 private:
  std::vector<std::size_t> user_offsets_, user_items_;
  std::vector<double> user_weights_;
  std::vector<std::size_t> item_offsets_, item_users_;
  std::vector<double> item_weights_;
  std::vector<std::size_t> user_degrees_, item_degrees_;
};

struct LayerSequence {
  std::vector<Matrix> users;  // layers 0..L
  std::vector<Matrix> items;
};

EdgeList load_interactions(const std::filesystem::path& path, std::optional<double> min_rating);
EdgeList k_core_filter(const EdgeList& edges, std::size_t k);
EdgeList largest_connected_component(const EdgeList& edges);
DatasetSplit split_dataset(const EdgeList& edges, std::uint64_t seed);
InteractionGraph build_graph(const EdgeList& train);
LayerSequence propagate(const InteractionGraph& graph, const Matrix& user_emb, const Matrix& item_emb,
                        std::size_t layers);

// Drop nodes without edges and re-index the remaining ones densely, keeping
// their relative order.
EdgeList compact(const EdgeList& edges);

DatasetStats dataset_stats(const EdgeList& edges);

// Dense-index edge files: "user\titem" per line, preceded by a
// "# users items" header so that trailing isolated nodes survive.
void write_edges(const std::filesystem::path& path, const EdgeList& edges);
EdgeList read_edges(const std::filesystem::path& path);

// Per-user adjacency lists (sorted), sized to edges.user_count.
std::vector<std::vector<std::size_t>> items_by_user(const EdgeList& edges);

// Synthetic clustered interactions: item i belongs to cluster i % clusters,
// user u prefers cluster u % clusters and draws `purity` of its
// interactions from that cluster, the rest uniformly.
EdgeList synth_interactions(std::size_t users, std::size_t items, std::size_t clusters,
                            std::size_t per_user, double purity, std::uint64_t seed);

}  // namespace diaurec
