#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "diaurec/matrix.hpp"

namespace diaurec {

using Rng = std::mt19937_64;

// Seed for a named sub-stream of a master seed. Each consumer (split, init,
// batch, vmf, epsilon, ...) draws from its own stream so that changing how
// much one consumer draws never shifts another.
std::uint64_t substream_seed(std::uint64_t master, std::string_view name);

inline Rng make_stream(std::uint64_t master, std::string_view name) {
  return Rng(substream_seed(master, name));
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng);
Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng);

}  // namespace diaurec
