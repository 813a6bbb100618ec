#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace diaurec {

// Dense row-major matrix of doubles. Vectors are 1×n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

// a·b
Matrix matmul(const Matrix& a, const Matrix& b);
// a·bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// aᵀ·b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> index);
Matrix vstack(const Matrix& top, const Matrix& bottom);
Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t count);

// Rows scaled to unit L2 norm; throws Degenerate on a zero row.
Matrix normalize_rows(const Matrix& a);
// Row-wise softmax of a / temperature with max subtraction.
Matrix softmax_rows(const Matrix& a, double temperature);

double frobenius_squared(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what);
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace diaurec
