#include "diaurec/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "diaurec/error.hpp"
#include "diaurec/rng.hpp"

namespace diaurec {

namespace {

void require_points(const Matrix& z, const char* what) {
  if (z.rows() < 2) fail(ErrorKind::InvalidArgument, std::string(what) + ": needs at least 2 points");
}

// Unnormalized kernel values exp(−s‖z_m − z_n‖²) for m≠n, with the largest
// exponent factored out so the weights never underflow to all-zero.
Matrix kernel(const Matrix& z, double scale, double* log_shift) {
  const std::size_t b = z.rows();
  Matrix e(b, b);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < b; ++m)
    for (std::size_t n = 0; n < b; ++n)
      if (m != n) {
        e(m, n) = -scale * squared_distance(z.row(m), z.row(n));
        top = std::max(top, e(m, n));
      }
  for (std::size_t m = 0; m < b; ++m)
    for (std::size_t n = 0; n < b; ++n) e(m, n) = m == n ? 0.0 : std::exp(e(m, n) - top);
  if (log_shift) *log_shift = top;
  return e;
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t want, Rng& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (want >= population) return idx;
  for (std::size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(want);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Matrix random_rotation(std::size_t d, Rng& rng) {
  // Gram-Schmidt on a Gaussian matrix.
  Matrix q = gaussian_matrix(d, d, 1.0, rng);
  for (std::size_t i = 0; i < d; ++i) {
    auto qi = q.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      const auto qj = q.row(j);
      const double p = dot(qi, qj);
      for (std::size_t c = 0; c < d; ++c) qi[c] -= p * qj[c];
    }
    const double n = norm(qi);
    for (double& x : qi) x /= n;
  }
  return q;
}

}  // namespace

std::string KernelConvention::describe() const {
  return unit_kernel ? "exp(-d^2) kernel, gradient -4 * sum pi_mn (z_m - z_n)"
                           : "exp(-2 d^2) kernel, gradient -8 * sum pi_mn (z_m - z_n)";
}

double uniform_value(const Matrix& z, KernelConvention conv) {
  require_points(z, "uniform_value");
  double shift = 0.0;
  const Matrix e = kernel(z, conv.kernel_scale(), &shift);
  double s = 0.0;
  for (double x : e.data()) s += x;
  const double pairs = static_cast<double>(z.rows() * (z.rows() - 1));
  return shift + std::log(s / pairs);
}

Matrix pair_weights(const Matrix& z, KernelConvention conv) {
  require_points(z, "pair_weights");
  Matrix e = kernel(z, conv.kernel_scale(), nullptr);
  double s = 0.0;
  for (double x : e.data()) s += x;
  e *= 1.0 / s;
  return e;
}

Matrix uniform_grad_closed_form(const Matrix& z, KernelConvention conv) {
  require_points(z, "uniform_grad_closed_form");
  const Matrix pi = pair_weights(z, conv);
  const double c = conv.gradient_coefficient();
  Matrix g(z.rows(), z.cols());
  for (std::size_t m = 0; m < z.rows(); ++m) {
    auto gm = g.row(m);
    const auto zm = z.row(m);
    for (std::size_t n = 0; n < z.rows(); ++n) {
      if (n == m) continue;
      const auto zn = z.row(n);
      for (std::size_t k = 0; k < gm.size(); ++k) gm[k] -= c * pi(m, n) * (zm[k] - zn[k]);
    }
  }
  return g;
}

LaplacianForm laplacian_form(const Matrix& z, KernelConvention conv) {
  require_points(z, "laplacian_form");
  LaplacianForm out;
  out.weights = pair_weights(z, conv);
  const std::size_t b = z.rows();
  out.laplacian = Matrix(b, b);
  for (std::size_t m = 0; m < b; ++m) {
    double degree = 0.0;
    for (std::size_t n = 0; n < b; ++n) {
      degree += out.weights(m, n);
      out.laplacian(m, n) = -out.weights(m, n);
    }
    out.laplacian(m, m) += degree;
  }
  out.gradient = matmul(out.laplacian, z) * -conv.gradient_coefficient();
  const double gap = max_abs_diff(out.gradient, uniform_grad_closed_form(z, conv));
  if (gap > 1e-10) fail(ErrorKind::Numeric, "laplacian_form: matrix form deviates from closed form by " + std::to_string(gap));
  return out;
}

double laplacian_energy(const Matrix& z, KernelConvention conv) {
  require_points(z, "laplacian_energy");
  const LaplacianForm lf = laplacian_form(z, conv);
  const Matrix lz = matmul(lf.laplacian, z);
  double trace = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) trace += z.data()[i] * lz.data()[i];
  double pairwise = 0.0;
  for (std::size_t m = 0; m < z.rows(); ++m)
    for (std::size_t n = 0; n < z.rows(); ++n)
      if (m != n) pairwise += lf.weights(m, n) * squared_distance(z.row(m), z.row(n));
  pairwise *= 0.5;
  if (std::abs(trace - pairwise) > 1e-10)
    fail(ErrorKind::Numeric, "laplacian_energy: trace form deviates from pairwise form");
  return trace;
}

Matrix tangent_project(const Matrix& g, const Matrix& z) {
  require_same_shape(g, z, "tangent_project");
  Matrix out = g;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto zi = z.row(i);
    const double n2 = dot(zi, zi);
    if (n2 == 0.0) continue;
    auto r = out.row(i);
    const double p = dot(r, zi) / n2;
    for (std::size_t c = 0; c < r.size(); ++c) r[c] -= p * zi[c];
  }
  return out;
}

Matrix uniform_grad_numeric(const Matrix& z, double step, KernelConvention conv) {
  Matrix g(z.rows(), z.cols());
  Matrix probe = z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + step;
    const double up = uniform_value(probe, conv);
    probe.data()[i] = orig - step;
    const double down = uniform_value(probe, conv);
    probe.data()[i] = orig;
    g.data()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

GeometryReport measure_geometry(const Matrix& user_z, const Matrix& item_z, const EdgeList& pairs,
                                std::size_t sample_size, std::uint64_t seed) {
  if (sample_size < 2) fail(ErrorKind::InvalidArgument, "measure_geometry: sample_size must be >= 2");
  if (user_z.rows() < 2 || item_z.rows() < 2) fail(ErrorKind::InvalidArgument, "measure_geometry: need at least 2 users and 2 items");
  Rng rng = make_stream(seed, "geometry");
  GeometryReport r;

  const auto users = sample_indices(user_z.rows(), sample_size, rng);
  const auto items = sample_indices(item_z.rows(), sample_size, rng);
  const Matrix zu = gather_rows(user_z, users);
  const Matrix zv = gather_rows(item_z, items);
  r.user_sample = users.size();
  r.item_sample = items.size();

  if (!pairs.empty()) {
    const auto chosen = sample_indices(pairs.size(), sample_size, rng);
    double sum = 0.0;
    for (std::size_t i : chosen) {
      const auto& e = pairs.pairs[i];
      sum += squared_distance(user_z.row(e.user), item_z.row(e.item));
    }
    r.pair_sample = chosen.size();
    r.alignment = sum / static_cast<double>(chosen.size());
  }

  r.uniformity_user = uniform_value(zu);
  r.uniformity_item = uniform_value(zv);
  r.energy_user = laplacian_energy(zu);
  r.energy_item = laplacian_energy(zv);
  const Matrix gu = uniform_grad_closed_form(zu), gv = uniform_grad_closed_form(zv);
  for (std::size_t i = 0; i < gu.rows(); ++i) r.grad_norm_user.push_back(norm(gu.row(i)));
  for (std::size_t i = 0; i < gv.rows(); ++i) r.grad_norm_item.push_back(norm(gv.row(i)));

  const Matrix unit = normalize_rows(zv);
  for (std::size_t m = 0; m < unit.rows(); ++m) {
    double best = -1.0;
    for (std::size_t n = 0; n < unit.rows(); ++n)
      if (n != m) best = std::max(best, dot(unit.row(m), unit.row(n)));
    best = std::clamp(best, -1.0, 1.0);
    const auto bin = static_cast<std::size_t>((best + 1.0) / 2.0 * static_cast<double>(kHistogramBins));
    ++r.nn_cosine_histogram[std::min(bin, kHistogramBins - 1)];
  }
  return r;
}

GradientCheckReport run_gradient_suite(std::size_t instances, std::uint64_t seed, KernelConvention conv,
                                       const std::vector<Matrix>& extra) {
  GradientCheckReport rep;
  rep.convention = conv.describe();
  Rng rng = make_stream(seed, "gradient_suite");

  std::vector<Matrix> cases;
  for (std::size_t i = 0; i < instances; ++i) {
    std::uniform_int_distribution<std::size_t> bdist(2, 8), ddist(2, 6);
    cases.push_back(normalize_rows(gaussian_matrix(bdist(rng), ddist(rng), 1.0, rng)));
  }
  for (const Matrix& m : extra) cases.push_back(normalize_rows(m));

  auto check = [&](double value, double tol, double& worst, const std::string& what, std::size_t idx) {
    worst = std::max(worst, value);
    if (!(value <= tol)) rep.failures.push_back(what + " on instance " + std::to_string(idx) + ": " + std::to_string(value));
  };

  for (std::size_t idx = 0; idx < cases.size(); ++idx) {
    const Matrix& z = cases[idx];
    const Matrix closed = uniform_grad_closed_form(z, conv);
    // Only the small random instances go through finite differences.
    if (idx < instances) {
      const Matrix fd = uniform_grad_numeric(z, rep.fd_step, conv);
      check(max_abs_diff(closed, fd), 1e-6, rep.max_fd_error, "closed form vs finite differences", idx);

      // Riemannian gradient: derivative of the loss after re-normalization.
      Matrix fd_sphere(z.rows(), z.cols());
      Matrix probe = z;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double orig = probe.data()[i];
        probe.data()[i] = orig + rep.fd_step;
        const double up = uniform_value(normalize_rows(probe), conv);
        probe.data()[i] = orig - rep.fd_step;
        const double down = uniform_value(normalize_rows(probe), conv);
        probe.data()[i] = orig;
        fd_sphere.data()[i] = (up - down) / (2.0 * rep.fd_step);
      }
      check(max_abs_diff(tangent_project(closed, z), fd_sphere), 1e-6, rep.max_tangent_error,
            "tangent projection vs normalized finite differences", idx);
    }

    try {
      const LaplacianForm lf = laplacian_form(z, conv);
      check(max_abs_diff(lf.gradient, closed), 1e-10, rep.max_closed_form_gap, "closed form vs Laplacian form", idx);
      const double energy = laplacian_energy(z, conv);
      double pairwise = 0.0;
      for (std::size_t m = 0; m < z.rows(); ++m)
        for (std::size_t n = 0; n < z.rows(); ++n)
          if (m != n) pairwise += lf.weights(m, n) * squared_distance(z.row(m), z.row(n));
      check(std::abs(energy - 0.5 * pairwise), 1e-10, rep.max_energy_gap, "trace vs pairwise energy", idx);
      const Matrix rotated = matmul(z, random_rotation(z.cols(), rng));
      check(std::abs(laplacian_energy(rotated, conv) - energy), 1e-10, rep.max_rotation_gap,
            "energy rotation invariance", idx);
    } catch (const Error& e) {
      rep.failures.push_back(std::string(e.what()) + " on instance " + std::to_string(idx));
    }

    std::vector<double> sum(z.cols(), 0.0);
    for (std::size_t m = 0; m < closed.rows(); ++m)
      for (std::size_t c = 0; c < closed.cols(); ++c) sum[c] += closed(m, c);
    check(norm(sum), 1e-8, rep.max_row_sum, "gradient row sum", idx);
  }
  rep.instances = cases.size();
  rep.passed = rep.failures.empty();
  return rep;
}

}  // namespace diaurec
