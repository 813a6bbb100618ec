#include "diaurec/rng.hpp"

namespace diaurec {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t master, std::string_view name) {
  // FNV-1a over the stream name.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master) ^ h);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = dist(rng);
  return m;
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& x : m.data()) x = dist(rng);
  return m;
}

}  // namespace diaurec
