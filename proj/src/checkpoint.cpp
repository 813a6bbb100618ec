#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "diaurec/error.hpp"
#include "diaurec/intent.hpp"

namespace diaurec {

namespace {

constexpr char kMagic[4] = {'D', 'I', 'A', 'U'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const std::string& where) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) fail(ErrorKind::Format, where + ": truncated checkpoint");
  return value;
}

void put_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  for (double x : m.data()) put<float>(out, static_cast<float>(x));
}

}  // namespace

void round_to_checkpoint_precision(ModelState& state) {
  for (auto& [name, m] : state.trainable())
    for (double& x : m->data()) x = static_cast<float>(x);
  state.bank.eta = static_cast<float>(state.bank.eta);
  state.bank.kappa = static_cast<float>(state.bank.kappa);
}

// Layout: "DIAU", u32 version, then per tensor: u32 name length, name
// bytes, u64 rows, u64 cols, row-major float32 payload.
void save_checkpoint(const std::filesystem::path& path, const ModelState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  for (const auto& [name, m] : state.trainable()) put_tensor(out, name, *m);
  put_tensor(out, "eta", Matrix(1, 1, state.bank.eta));
  put_tensor(out, "kappa", Matrix(1, 1, state.bank.kappa));
  put_tensor(out, "projector.activation",
             Matrix(1, 1, state.projector.activation == Activation::Identity ? 1.0 : 0.0));
  if (!out) fail(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + where);
  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) fail(ErrorKind::Format, where + ": bad magic bytes");
  const auto version = get<std::uint32_t>(in, where);
  if (version != kVersion) fail(ErrorKind::Format, where + ": unsupported version " + std::to_string(version));

  std::map<std::string, Matrix> tensors;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto len = get<std::uint32_t>(in, where);
    if (len == 0 || len > 256) fail(ErrorKind::Format, where + ": bad tensor name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto rows = get<std::uint64_t>(in, where);
    const auto cols = get<std::uint64_t>(in, where);
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) fail(ErrorKind::Format, where + ": implausible shape for " + name);
    Matrix m(rows, cols);
    for (double& x : m.data()) x = get<float>(in, where);
    tensors[name] = std::move(m);
  }

  auto take = [&](const std::string& name) -> Matrix {
    auto it = tensors.find(name);
    if (it == tensors.end()) fail(ErrorKind::Format, where + ": missing tensor '" + name + "'");
    return it->second;
  };
  ModelState s;
  for (auto& [name, m] : s.trainable()) *m = take(name);
  s.bank.eta = take("eta")(0, 0);
  s.bank.kappa = take("kappa")(0, 0);
  s.projector.activation = take("projector.activation")(0, 0) != 0.0 ? Activation::Identity : Activation::Tanh;

  const std::size_t d = s.user_mu.cols();
  const std::size_t k = s.bank.proto_bank.rows();
  const bool consistent = s.item_mu.cols() == d && s.bank.proto_bank.cols() == d && s.bank.dist_bank.rows() == k &&
                          s.bank.dist_bank.cols() == d && s.bank.dist_proj.rows() == k && s.bank.dist_proj.cols() == d &&
                          s.projector.w2.rows() == d && s.projector.b2.cols() == d &&
                          s.projector.b1.cols() == s.projector.w1.rows() && s.projector.w2.cols() == s.projector.w1.rows() &&
                          s.coarse_map.rows() == d && s.coarse_map.cols() == d;
  if (!consistent) fail(ErrorKind::Format, where + ": inconsistent tensor shapes");
  return s;
}

}  // namespace diaurec
