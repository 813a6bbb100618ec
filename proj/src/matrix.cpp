#include "diaurec/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "diaurec/error.hpp"

namespace diaurec {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> view(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

Eigen::Map<RowMajor> view(Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorKind::Shape, "matrix data length " + std::to_string(data_.size()) +
                               " does not match " + std::to_string(rows) + "x" +
                               std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "matrix +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "matrix -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::Shape, "matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  if (!out.empty() && a.cols() > 0) view(out).noalias() = view(a) * view(b);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorKind::Shape, "matmul_nt: " + shape_str(a) + " * T(" + shape_str(b) + ")");
  }
  Matrix out(a.rows(), b.rows());
  if (!out.empty() && a.cols() > 0) view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorKind::Shape, "matmul_tn: T(" + shape_str(a) + ") * " + shape_str(b));
  }
  Matrix out(a.cols(), b.cols());
  if (!out.empty() && a.rows() > 0) view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> index) {
  Matrix out(index.size(), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= a.rows()) {
      fail(ErrorKind::Shape, "gather_rows: index " + std::to_string(index[i]) +
                                 " out of range for " + shape_str(a));
    }
    auto src = a.row(index[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) {
    fail(ErrorKind::Shape, "vstack: " + shape_str(top) + " over " + shape_str(bottom));
  }
  Matrix out(top.rows() + bottom.rows(), top.cols());
  std::copy(top.data().begin(), top.data().end(), out.data().begin());
  std::copy(bottom.data().begin(), bottom.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(top.size()));
  return out;
}

Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) {
    fail(ErrorKind::Shape, "slice_rows out of range for " + shape_str(a));
  }
  Matrix out(count, a.cols());
  const auto first = a.data().begin() + static_cast<std::ptrdiff_t>(begin * a.cols());
  std::copy(first, first + static_cast<std::ptrdiff_t>(count * a.cols()), out.data().begin());
  return out;
}

Matrix normalize_rows(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double n = norm(r);
    if (!(n > 0.0)) fail(ErrorKind::Degenerate, "normalize_rows: zero-norm row " + std::to_string(i));
    for (double& x : r) x /= n;
  }
  return out;
}

Matrix softmax_rows(const Matrix& a, double temperature) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto src = a.row(i);
    auto dst = out.row(i);
    double mx = -INFINITY;
    for (double x : src) mx = std::max(mx, x / temperature);
    if (!std::isfinite(mx)) fail(ErrorKind::Numeric, "softmax: non-finite logits in row " + std::to_string(i));
    double sum = 0.0;
    for (std::size_t j = 0; j < src.size(); ++j) {
      const double logit = src[j] / temperature;
      if (!std::isfinite(logit)) fail(ErrorKind::Numeric, "softmax: non-finite logit in row " + std::to_string(i));
      dst[j] = std::exp(logit - mx);
      sum += dst[j];
    }
    for (double& x : dst) x /= sum;
  }
  return out;
}

double frobenius_squared(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data()) s += x * x;
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double x) { return std::isfinite(x); });
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    fail(ErrorKind::Shape, std::string(what) + ": expected " + std::to_string(rows) + "x" +
                               std::to_string(cols) + ", got " + shape_str(m));
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    fail(ErrorKind::Shape, std::string(what) + ": shape " + shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace diaurec
