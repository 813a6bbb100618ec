// Shared helpers for the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <unistd.h>

#include "diaurec/data_core.hpp"
#include "diaurec/matrix.hpp"
#include "diaurec/rng.hpp"

namespace testing {

using diaurec::EdgeList;
using diaurec::Interaction;
using diaurec::Matrix;
using diaurec::Rng;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  return diaurec::gaussian_matrix(rows, cols, scale, rng);
}

inline Matrix random_unit_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  return diaurec::normalize_rows(random_matrix(rows, cols, rng));
}

// Central finite differences of a scalar function of one matrix.
template <typename F>
Matrix numeric_grad(F&& f, Matrix x, double h = 1e-4) {
  Matrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double up = f(x);
    x.data()[i] = orig - h;
    const double down = f(x);
    x.data()[i] = orig;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_abs(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data()) s = std::max(s, std::abs(x));
  return s;
}

// Largest elementwise deviation relative to the larger gradient's scale.
inline double rel_error(const Matrix& analytic, const Matrix& numeric) {
  const double scale = std::max({max_abs(analytic), max_abs(numeric), 1e-6});
  return diaurec::max_abs_diff(analytic, numeric) / scale;
}

// Random bipartite edges, then compacted so every node has degree >= 1.
inline EdgeList random_edges(std::size_t users, std::size_t items, std::size_t edges, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pu(0, users - 1), pv(0, items - 1);
  std::set<Interaction> seen;
  for (std::size_t i = 0; i < edges; ++i) seen.insert({pu(rng), pv(rng)});
  EdgeList e;
  e.pairs.assign(seen.begin(), seen.end());
  e.user_count = users;
  e.item_count = items;
  return diaurec::compact(e);
}

// Dense (M+N)×(M+N) adjacency of the stacked [users; items] node order.
inline Matrix dense_adjacency(const EdgeList& e) {
  const std::size_t n = e.user_count + e.item_count;
  Matrix a(n, n);
  for (const auto& p : e.pairs) a(p.user, e.user_count + p.item) = a(e.user_count + p.item, p.user) = 1.0;
  return a;
}

// D^{-1/2} A D^{-1/2}
inline Matrix dense_normalized(const EdgeList& e) {
  Matrix a = dense_adjacency(e);
  std::vector<double> deg(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) deg[i] += a(i, j);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) a(i, j) /= std::sqrt(deg[i] * deg[j]);
  return a;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("diaurec_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
