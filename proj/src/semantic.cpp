#include "diaurec/semantic.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "diaurec/error.hpp"

namespace diaurec {

static_assert(std::endian::native == std::endian::little, "semantic file I/O assumes a little-endian host");

namespace {

bool is_text_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return ext == ".tsv" || ext == ".txt";
}

Matrix read_text_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open semantic file: " + path.string());
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t width = 0;
    std::string tok;
    while (std::getline(ls, tok, '\t')) {
      try {
        std::size_t used = 0;
        data.push_back(static_cast<float>(std::stod(tok, &used)));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        fail(ErrorKind::Format, path.string() + ": row " + std::to_string(rows + 1) + ": bad number '" + tok + "'");
      }
      ++width;
    }
    if (rows == 0) cols = width;
    if (width != cols) {
      fail(ErrorKind::Format, path.string() + ": row " + std::to_string(rows + 1) + " has " + std::to_string(width) +
                                  " columns, expected " + std::to_string(cols));
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

Matrix read_binary_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open semantic file: " + path.string());
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in) fail(ErrorKind::Format, path.string() + ": truncated header");
  std::vector<float> buf(rows * cols);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) fail(ErrorKind::Format, path.string() + ": truncated payload");
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorKind::Format, path.string() + ": trailing bytes");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < buf.size(); ++i) m.data()[i] = buf[i];
  return m;
}

}  // namespace

ProjectorParams ProjectorParams::init(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, Rng& rng) {
  const double bound1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden_dim));
  const double bound2 = std::sqrt(6.0 / static_cast<double>(hidden_dim + output_dim));
  ProjectorParams p;
  p.w1 = uniform_matrix(hidden_dim, input_dim, bound1, rng);
  p.b1 = Matrix(1, hidden_dim);
  p.w2 = uniform_matrix(output_dim, hidden_dim, bound2, rng);
  p.b2 = Matrix(1, output_dim);
  return p;
}

void write_semantic_matrix(const std::filesystem::path& path, const Matrix& m) {
  if (is_text_path(path)) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out.precision(9);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "\t" : "") << static_cast<float>(m(i, j));
      out << '\n';
    }
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  const std::uint64_t rows = m.rows(), cols = m.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  std::vector<float> buf(m.data().begin(), m.data().end());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

Matrix read_semantic_matrix(const std::filesystem::path& path) {
  Matrix m = is_text_path(path) ? read_text_matrix(path) : read_binary_matrix(path);
  if (!all_finite(m)) fail(ErrorKind::Format, path.string() + ": non-finite entries");
  return m;
}

SemanticStore load_semantic_vectors(const std::filesystem::path& user_path, const std::filesystem::path& item_path,
                                    std::size_t expected_users, std::size_t expected_items) {
  SemanticStore store{read_semantic_matrix(user_path), read_semantic_matrix(item_path)};
  if (store.raw_user.rows() != expected_users) {
    fail(ErrorKind::Alignment, user_path.string() + ": " + std::to_string(store.raw_user.rows()) +
                                   " rows for " + std::to_string(expected_users) + " users");
  }
  if (store.raw_item.rows() != expected_items) {
    fail(ErrorKind::Alignment, item_path.string() + ": " + std::to_string(store.raw_item.rows()) +
                                   " rows for " + std::to_string(expected_items) + " items");
  }
  if (store.raw_user.cols() != store.raw_item.cols()) {
    fail(ErrorKind::Format, "user and item semantic widths differ");
  }
  return store;
}

SemanticStore synth_semantic_vectors(const InteractionGraph& graph, std::size_t source_dim, std::size_t cluster_count,
                                     double noise_scale, std::uint64_t seed) {
  if (cluster_count < 1) fail(ErrorKind::InvalidArgument, "synth_semantic_vectors: cluster_count must be >= 1");
  Rng rng = make_stream(seed, "semantic");
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix centroids(cluster_count, source_dim);
  for (std::size_t c = 0; c < cluster_count; ++c) {
    auto r = centroids.row(c);
    double n = 0.0;
    do {
      for (double& x : r) x = gauss(rng);
      n = norm(r);
    } while (n == 0.0);
    for (double& x : r) x /= n;
  }

  SemanticStore store{Matrix(graph.user_count(), source_dim), Matrix(graph.item_count(), source_dim)};
  for (std::size_t v = 0; v < graph.item_count(); ++v) {
    const auto centroid = centroids.row(v % cluster_count);
    auto r = store.raw_item.row(v);
    for (std::size_t j = 0; j < source_dim; ++j) r[j] = centroid[j] + noise_scale * gauss(rng);
  }
  const auto& offsets = graph.user_offsets();
  const auto& items = graph.user_items();
  for (std::size_t u = 0; u < graph.user_count(); ++u) {
    auto r = store.raw_user.row(u);
    const std::size_t deg = offsets[u + 1] - offsets[u];
    for (std::size_t e = offsets[u]; e < offsets[u + 1]; ++e) {
      const auto iv = store.raw_item.row(items[e]);
      for (std::size_t j = 0; j < source_dim; ++j) r[j] += iv[j];
    }
    for (double& x : r) x /= static_cast<double>(deg);
  }
  return store;
}

Matrix project_rows(const Matrix& raw, const ProjectorParams& params) {
  if (raw.cols() != params.input_dim()) {
    fail(ErrorKind::Shape, "project_semantic: source width " + std::to_string(raw.cols()) +
                               " but projector expects " + std::to_string(params.input_dim()));
  }
  Matrix hidden = matmul_nt(raw, params.w1);
  for (std::size_t i = 0; i < hidden.rows(); ++i) {
    auto r = hidden.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] += params.b1(0, j);
      if (params.activation == Activation::Tanh) r[j] = std::tanh(r[j]);
    }
  }
  Matrix out = matmul_nt(hidden, params.w2);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += params.b2(0, j);
  }
  return normalize_rows(out);
}

ProjectedSemantics project_semantic(const SemanticStore& store, const ProjectorParams& params) {
  return {project_rows(store.raw_user, params), project_rows(store.raw_item, params)};
}

ad::Var project_rows(ad::Tape& tape, ad::Var raw, const ProjectorVars& params, Activation activation) {
  if (raw.value().cols() != params.w1.value().cols()) {
    fail(ErrorKind::Shape, "project_semantic: source width mismatch");
  }
  ad::Var hidden = tape.add_row(tape.matmul_nt(raw, params.w1), params.b1);
  if (activation == Activation::Tanh) hidden = tape.tanh(hidden);
  ad::Var out = tape.add_row(tape.matmul_nt(hidden, params.w2), params.b2);
  return tape.normalize_rows(out);
}

}  // namespace diaurec
