#include "diaurec/data_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>

#include "diaurec/error.hpp"
#include "diaurec/rng.hpp"

namespace diaurec {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

void sort_unique(std::vector<Interaction>& pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
}

struct DisjointSet {
  std::vector<std::size_t> parent, size;
  explicit DisjointSet(std::size_t n) : parent(n), size(n, 1) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
  }
};

}  // namespace

EdgeList load_interactions(const std::filesystem::path& path, std::optional<double> min_rating) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open interactions file: " + path.string());

  std::unordered_map<std::string, std::size_t> user_ids, item_ids;
  EdgeList edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
      fail(ErrorKind::Parse, where + ": expected 'user<TAB>item[<TAB>rating]'");
    }
    if (fields.size() == 3) {
      double rating = 0.0;
      std::istringstream rs(fields[2]);
      if (!(rs >> rating) || !(rs >> std::ws).eof()) {
        fail(ErrorKind::Parse, where + ": bad rating '" + fields[2] + "'");
      }
      if (min_rating && rating < *min_rating) continue;
    }
    const auto u = user_ids.try_emplace(fields[0], user_ids.size()).first->second;
    const auto v = item_ids.try_emplace(fields[1], item_ids.size()).first->second;
    edges.pairs.push_back({u, v});
  }
  edges.user_count = user_ids.size();
  edges.item_count = item_ids.size();
  sort_unique(edges.pairs);
  if (edges.empty()) fail(ErrorKind::EmptyDataset, "no interactions retained from " + path.string());
  return edges;
}

EdgeList compact(const EdgeList& edges) {
  std::vector<std::size_t> user_map(edges.user_count, SIZE_MAX), item_map(edges.item_count, SIZE_MAX);
  for (const auto& e : edges.pairs) {
    user_map[e.user] = 0;
    item_map[e.item] = 0;
  }
  std::size_t next = 0;
  for (auto& m : user_map)
    if (m != SIZE_MAX) m = next++;
  const std::size_t users = next;
  next = 0;
  for (auto& m : item_map)
    if (m != SIZE_MAX) m = next++;
  EdgeList out;
  out.user_count = users;
  out.item_count = next;
  out.pairs.reserve(edges.size());
  for (const auto& e : edges.pairs) out.pairs.push_back({user_map[e.user], item_map[e.item]});
  sort_unique(out.pairs);
  return out;
}

EdgeList k_core_filter(const EdgeList& edges, std::size_t k) {
  if (k < 1) fail(ErrorKind::InvalidArgument, "k_core_filter: k must be >= 1");
  std::vector<Interaction> pairs = edges.pairs;
  sort_unique(pairs);
  while (true) {
    std::vector<std::size_t> udeg(edges.user_count, 0), ideg(edges.item_count, 0);
    for (const auto& e : pairs) {
      ++udeg[e.user];
      ++ideg[e.item];
    }
    const auto before = pairs.size();
    std::erase_if(pairs, [&](const Interaction& e) { return udeg[e.user] < k || ideg[e.item] < k; });
    if (pairs.size() == before) break;
  }
  if (pairs.empty()) fail(ErrorKind::EmptyDataset, "k-core filter with k=" + std::to_string(k) + " removed every interaction");
  return compact(EdgeList{std::move(pairs), edges.user_count, edges.item_count});
}

EdgeList largest_connected_component(const EdgeList& edges) {
  if (edges.empty()) fail(ErrorKind::EmptyDataset, "largest_connected_component: empty edge list");
  const std::size_t m = edges.user_count;
  DisjointSet ds(m + edges.item_count);
  for (const auto& e : edges.pairs) ds.unite(e.user, m + e.item);

  struct Component {
    std::size_t nodes = 0, edge_count = 0, min_user = SIZE_MAX;
  };
  std::map<std::size_t, Component> comps;
  std::vector<char> seen(m + edges.item_count, 0);
  for (const auto& e : edges.pairs) {
    auto& c = comps[ds.find(e.user)];
    ++c.edge_count;
    c.min_user = std::min(c.min_user, e.user);
    for (std::size_t node : {e.user, m + e.item}) {
      if (!seen[node]) {
        seen[node] = 1;
        ++c.nodes;
      }
    }
  }
  std::size_t best_root = 0;
  const Component* best = nullptr;
  for (const auto& [root, c] : comps) {
    const bool better = !best || c.nodes > best->nodes ||
                        (c.nodes == best->nodes && c.edge_count > best->edge_count) ||
                        (c.nodes == best->nodes && c.edge_count == best->edge_count && c.min_user < best->min_user);
    if (better) {
      best = &c;
      best_root = root;
    }
  }
  EdgeList kept{{}, edges.user_count, edges.item_count};
  for (const auto& e : edges.pairs)
    if (ds.find(e.user) == best_root) kept.pairs.push_back(e);
  return compact(kept);
}

std::vector<std::vector<std::size_t>> items_by_user(const EdgeList& edges) {
  std::vector<std::vector<std::size_t>> out(edges.user_count);
  for (const auto& e : edges.pairs) out[e.user].push_back(e.item);
  for (auto& items : out) std::sort(items.begin(), items.end());
  return out;
}

DatasetSplit split_dataset(const EdgeList& edges, std::uint64_t seed) {
  if (edges.empty()) fail(ErrorKind::EmptyDataset, "split_dataset: empty edge list");
  Rng rng = make_stream(seed, "split");

  enum Part : std::uint8_t { kTrain, kValid, kTest };
  // Slot pattern for positions within a shuffled user history: 3:1:1 with
  // any remainder filling train first.
  constexpr Part kPattern[5] = {kTrain, kTrain, kTrain, kValid, kTest};

  struct Assigned {
    Interaction edge;
    Part part;
  };
  std::vector<Assigned> all;
  all.reserve(edges.size());
  const auto by_user = items_by_user(edges);
  for (std::size_t u = 0; u < by_user.size(); ++u) {
    auto items = by_user[u];
    std::shuffle(items.begin(), items.end(), rng);
    for (std::size_t i = 0; i < items.size(); ++i) all.push_back({{u, items[i]}, kPattern[i % 5]});
  }

  // Every item evaluated later must have a train edge: swap a cold item's
  // held-out edge with a train edge of the same user whose item stays warm,
  // otherwise move the held-out edge into train.
  std::vector<std::size_t> train_deg(edges.item_count, 0);
  for (const auto& a : all)
    if (a.part == kTrain) ++train_deg[a.edge.item];
  std::vector<std::vector<std::size_t>> slots_by_user(edges.user_count);
  for (std::size_t i = 0; i < all.size(); ++i) slots_by_user[all[i].edge.user].push_back(i);

  for (Part held : {kValid, kTest}) {
    for (std::size_t i = 0; i < all.size(); ++i) {
      auto& a = all[i];
      if (a.part != held || train_deg[a.edge.item] > 0) continue;
      std::size_t donor = SIZE_MAX;
      for (std::size_t j : slots_by_user[a.edge.user]) {
        if (all[j].part == kTrain && train_deg[all[j].edge.item] >= 2) {
          donor = j;
          break;
        }
      }
      if (donor != SIZE_MAX) {
        --train_deg[all[donor].edge.item];
        all[donor].part = held;
      }
      a.part = kTrain;
      ++train_deg[a.edge.item];
    }
  }

  DatasetSplit split;
  for (EdgeList* e : {&split.train, &split.validation, &split.test}) {
    e->user_count = edges.user_count;
    e->item_count = edges.item_count;
  }
  for (const auto& a : all) {
    EdgeList& target = a.part == kTrain ? split.train : a.part == kValid ? split.validation : split.test;
    target.pairs.push_back(a.edge);
  }
  for (EdgeList* e : {&split.train, &split.validation, &split.test}) sort_unique(e->pairs);
  return split;
}

InteractionGraph build_graph(const EdgeList& train) {
  if (train.empty()) fail(ErrorKind::EmptyDataset, "build_graph: empty train set");
  std::vector<Interaction> pairs = train.pairs;
  sort_unique(pairs);

  InteractionGraph g;
  g.user_degrees_.assign(train.user_count, 0);
  g.item_degrees_.assign(train.item_count, 0);
  for (const auto& e : pairs) {
    if (e.user >= train.user_count || e.item >= train.item_count) {
      fail(ErrorKind::Shape, "build_graph: edge index out of range");
    }
    ++g.user_degrees_[e.user];
    ++g.item_degrees_[e.item];
  }
  for (std::size_t u = 0; u < train.user_count; ++u)
    if (g.user_degrees_[u] == 0) fail(ErrorKind::Degenerate, "build_graph: user " + std::to_string(u) + " has no train edges");
  for (std::size_t v = 0; v < train.item_count; ++v)
    if (g.item_degrees_[v] == 0) fail(ErrorKind::Degenerate, "build_graph: item " + std::to_string(v) + " has no train edges");

  auto weight_of = [&](const Interaction& e) {
    return 1.0 / std::sqrt(static_cast<double>(g.user_degrees_[e.user]) * static_cast<double>(g.item_degrees_[e.item]));
  };

  // pairs are sorted by (user, item): forward CSR falls out directly.
  g.user_offsets_.assign(train.user_count + 1, 0);
  for (const auto& e : pairs) ++g.user_offsets_[e.user + 1];
  std::partial_sum(g.user_offsets_.begin(), g.user_offsets_.end(), g.user_offsets_.begin());
  g.user_items_.reserve(pairs.size());
  g.user_weights_.reserve(pairs.size());
  for (const auto& e : pairs) {
    g.user_items_.push_back(e.item);
    g.user_weights_.push_back(weight_of(e));
  }

  g.item_offsets_.assign(train.item_count + 1, 0);
  for (const auto& e : pairs) ++g.item_offsets_[e.item + 1];
  std::partial_sum(g.item_offsets_.begin(), g.item_offsets_.end(), g.item_offsets_.begin());
  g.item_users_.assign(pairs.size(), 0);
  g.item_weights_.assign(pairs.size(), 0.0);
  std::vector<std::size_t> cursor(g.item_offsets_.begin(), g.item_offsets_.end() - 1);
  for (const auto& e : pairs) {
    const std::size_t pos = cursor[e.item]++;
    g.item_users_[pos] = e.user;
    g.item_weights_[pos] = weight_of(e);
  }
  return g;
}

std::optional<double> InteractionGraph::weight(std::size_t user, std::size_t item) const {
  if (user >= user_count()) return std::nullopt;
  const auto first = user_items_.begin() + static_cast<std::ptrdiff_t>(user_offsets_[user]);
  const auto last = user_items_.begin() + static_cast<std::ptrdiff_t>(user_offsets_[user + 1]);
  const auto it = std::lower_bound(first, last, item);
  if (it == last || *it != item) return std::nullopt;
  return user_weights_[static_cast<std::size_t>(it - user_items_.begin())];
}

Matrix InteractionGraph::step_stacked(const Matrix& stacked) const {
  const std::size_t m = user_count();
  require_shape(stacked, m + item_count(), stacked.cols(), "propagation input");
  Matrix out(stacked.rows(), stacked.cols());
  const std::size_t d = stacked.cols();
  for (std::size_t u = 0; u < m; ++u) {
    auto dst = out.row(u);
    for (std::size_t e = user_offsets_[u]; e < user_offsets_[u + 1]; ++e) {
      const auto src = stacked.row(m + user_items_[e]);
      const double w = user_weights_[e];
      for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
    }
  }
  for (std::size_t v = 0; v < item_count(); ++v) {
    auto dst = out.row(m + v);
    for (std::size_t e = item_offsets_[v]; e < item_offsets_[v + 1]; ++e) {
      const auto src = stacked.row(item_users_[e]);
      const double w = item_weights_[e];
      for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

LayerSequence propagate(const InteractionGraph& graph, const Matrix& user_emb, const Matrix& item_emb,
                        std::size_t layers) {
  require_shape(user_emb, graph.user_count(), user_emb.cols(), "propagate user embeddings");
  require_shape(item_emb, graph.item_count(), user_emb.cols(), "propagate item embeddings");
  LayerSequence seq;
  seq.users.push_back(user_emb);
  seq.items.push_back(item_emb);
  Matrix stacked = vstack(user_emb, item_emb);
  for (std::size_t l = 0; l < layers; ++l) {
    stacked = graph.step_stacked(stacked);
    seq.users.push_back(slice_rows(stacked, 0, graph.user_count()));
    seq.items.push_back(slice_rows(stacked, graph.user_count(), graph.item_count()));
  }
  return seq;
}

DatasetStats dataset_stats(const EdgeList& edges) {
  DatasetStats s;
  s.users = edges.user_count;
  s.items = edges.item_count;
  s.interactions = edges.size();
  const double cells = static_cast<double>(s.users) * static_cast<double>(s.items);
  s.sparsity = cells > 0 ? 1.0 - static_cast<double>(s.interactions) / cells : 0.0;
  return s;
}

void write_edges(const std::filesystem::path& path, const EdgeList& edges) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "# " << edges.user_count << ' ' << edges.item_count << '\n';
  for (const auto& e : edges.pairs) out << e.user << '\t' << e.item << '\n';
}

EdgeList read_edges(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open edge file: " + path.string());
  EdgeList edges;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      char hash = 0;
      if (!(ls >> hash >> edges.user_count >> edges.item_count)) {
        fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": bad header");
      }
      have_header = true;
      continue;
    }
    Interaction e;
    if (!(ls >> e.user >> e.item)) {
      fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": expected two indices");
    }
    edges.pairs.push_back(e);
  }
  if (!have_header) {
    for (const auto& e : edges.pairs) {
      edges.user_count = std::max(edges.user_count, e.user + 1);
      edges.item_count = std::max(edges.item_count, e.item + 1);
    }
  }
  for (const auto& e : edges.pairs) {
    if (e.user >= edges.user_count || e.item >= edges.item_count) {
      fail(ErrorKind::Format, path.string() + ": index exceeds header counts");
    }
  }
  sort_unique(edges.pairs);
  return edges;
}

EdgeList synth_interactions(std::size_t users, std::size_t items, std::size_t clusters,
                            std::size_t per_user, double purity, std::uint64_t seed) {
  if (clusters < 1 || users < 1 || items < clusters || per_user > items / clusters) {
    fail(ErrorKind::InvalidArgument, "synth_interactions: inconsistent sizes");
  }
  Rng rng = make_stream(seed, "synth_interactions");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_item(0, items - 1);
  EdgeList edges{{}, users, items};
  for (std::size_t u = 0; u < users; ++u) {
    const std::size_t c = u % clusters;
    const std::size_t cluster_size = (items - c + clusters - 1) / clusters;
    std::uniform_int_distribution<std::size_t> in_cluster(0, cluster_size - 1);
    std::vector<char> taken(items, 0);
    std::size_t drawn = 0;
    while (drawn < per_user) {
      const std::size_t v = coin(rng) < purity ? c + clusters * in_cluster(rng) : any_item(rng);
      if (taken[v]) continue;
      taken[v] = 1;
      edges.pairs.push_back({u, v});
      ++drawn;
    }
  }
  sort_unique(edges.pairs);
  return edges;
}

}  // namespace diaurec
