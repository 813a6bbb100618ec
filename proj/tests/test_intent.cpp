#include <doctest.h>

#include <cmath>

#include "diaurec/error.hpp"
#include "diaurec/intent.hpp"
#include "support.hpp"

using namespace diaurec;

namespace {

double row_sum(const Matrix& m, std::size_t i) {
  double s = 0.0;
  for (double x : m.row(i)) s += x;
  return s;
}

void check_stochastic(const Matrix& p) {
  for (std::size_t i = 0; i < p.rows(); ++i) {
    CHECK(std::abs(row_sum(p, i) - 1.0) < 1e-6);
    for (double x : p.row(i)) CHECK((x >= 0.0 && x <= 1.0));
  }
}

Matrix mean_row(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += m(i, j) / static_cast<double>(m.rows());
  return out;
}

}  // namespace

TEST_CASE("prototype_assign") {
  const Matrix s(1, 2, std::vector<double>{1, 0});
  const Matrix equal(4, 2, std::vector<double>{0.5, 1, 0.5, -1, 0.5, 2, 0.5, 0});
  const Matrix p = prototype_assign(s, equal, 1.0);
  for (double x : p.row(0)) CHECK(x == doctest::Approx(0.25));

  const Matrix bank(4, 2, std::vector<double>{1, 0, 0, 1, 0, -1, 0, 0});
  const Matrix q = prototype_assign(s, bank, 1.0);
  CHECK(q(0, 0) == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 3.0)).epsilon(1e-12));
  CHECK(q(0, 0) == doctest::Approx(0.4754).epsilon(1e-4));

  const Matrix sharp = prototype_assign(s, bank, 0.01);
  CHECK(sharp(0, 0) > 1.0 - 1e-6);

  CHECK_THROWS_AS(prototype_assign(s, bank, 0.0), Error);
  Matrix bad = s;
  bad(0, 0) = NAN;
  try {
    prototype_assign(bad, bank, 1.0);
    FAIL("expected numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("distribution_assign") {
  Rng rng(3);
  const Matrix h = testing::random_unit_rows(5, 3, rng);
  const Matrix same(4, 3, 0.7);
  const Matrix u = distribution_assign(h, same, 1.0);
  for (double x : u.data()) CHECK(x == doctest::Approx(0.25));

  const Matrix one(1, 1, std::vector<double>{1.0});
  const Matrix proj(2, 1, std::vector<double>{1.0, -1.0});
  const Matrix p = distribution_assign(one, proj, 1.0);
  CHECK(p(0, 0) == doctest::Approx(logistic(2.0)).epsilon(1e-12));
  CHECK(p(0, 1) == doctest::Approx(logistic(-2.0)).epsilon(1e-12));
  CHECK(p(0, 0) == doctest::Approx(0.8808).epsilon(1e-4));

  const Matrix w = testing::random_matrix(6, 3, rng);
  const Matrix base = distribution_assign(h, w, 0.5);
  CHECK(max_abs_diff(distribution_assign(h * 3.0, w, 1.5), base) < 1e-12);
  CHECK(max_abs_diff(distribution_assign(h * 3.0, w, 0.5), base) > 1e-3);
}

TEST_CASE("assignment rows are stochastic and shift-invariant in argmax") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix s = testing::random_unit_rows(7, 4, rng);
    const Matrix bank = testing::random_matrix(5, 4, rng, 3.0);
    check_stochastic(prototype_assign(s, bank, 0.2));
    check_stochastic(distribution_assign(s, bank, 0.2));
  }
  const Matrix logits = testing::random_matrix(3, 6, rng);
  Matrix shifted = logits;
  for (double& x : shifted.data()) x += 100.0;
  const Matrix a = softmax_rows(logits, 1.0), b = softmax_rows(shifted, 1.0);
  CHECK(max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("vmf_sample limits and moments") {
  Rng rng(2024);
  const Matrix mu(3, 3, std::vector<double>{2, 0, 0, 0, -1, 0, 1, 1, 1});
  const Matrix tight = vmf_sample(mu, 1e6, rng);
  const Matrix dir = normalize_rows(mu);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::sqrt(squared_distance(tight.row(i), dir.row(i))) <= 0.01);

  const std::size_t n = 100000;
  const Matrix pole(n, 3, 0.0);
  Matrix north = pole;
  for (std::size_t i = 0; i < n; ++i) north(i, 2) = 1.0;

  const Matrix uniform = vmf_sample(north, 0.0, rng);
  CHECK(norm(mean_row(uniform).row(0)) <= 0.02);

  const Matrix k2 = vmf_sample(north, 2.0, rng);
  const double expected = 1.0 / std::tanh(2.0) - 0.5;
  CHECK(expected == doctest::Approx(0.5373).epsilon(1e-4));
  CHECK(std::abs(norm(mean_row(k2).row(0)) - expected) <= 0.01);

  for (double kappa : {0.0, 0.5, 10.0, 1e4}) {
    const Matrix x = vmf_sample(testing::random_matrix(20, 5, rng), kappa, rng);
    for (std::size_t i = 0; i < x.rows(); ++i) CHECK(std::abs(norm(x.row(i)) - 1.0) < 1e-6);
  }

  CHECK_THROWS_AS(vmf_sample(Matrix(1, 3), 1.0, rng), Error);
  CHECK(vmf_sample(Matrix(1, 3), 0.0, rng).rows() == 1);

  Rng r1(5), r2(5);
  CHECK(vmf_sample(mu, 10.0, r1) == vmf_sample(mu, 10.0, r2));
}

TEST_CASE("mix_intents") {
  Rng rng(12);
  const Matrix bank = testing::random_matrix(3, 4, rng);
  const Matrix onehot(1, 3, std::vector<double>{0, 1, 0});
  CHECK(max_abs_diff(mix_intents(onehot, bank), slice_rows(bank, 1, 1)) == 0.0);

  const Matrix uniform(1, 3, 1.0 / 3.0);
  CHECK(max_abs_diff(mix_intents(uniform, bank), mean_row(bank)) < 1e-12);

  const Matrix probs = softmax_rows(testing::random_matrix(5, 3, rng), 1.0);
  const Matrix got = mix_intents(probs, bank);
  for (std::size_t b = 0; b < 5; ++b)
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += probs(b, k) * bank(k, j);
      CHECK(std::abs(got(b, j) - s) < 1e-12);
    }

  // K=2: output lies on the segment between the two bank rows
  const Matrix two = testing::random_matrix(2, 3, rng);
  const Matrix p2 = softmax_rows(testing::random_matrix(4, 2, rng), 1.0);
  const Matrix c = mix_intents(p2, two);
  for (std::size_t b = 0; b < 4; ++b) {
    const double t = p2(b, 1);
    CHECK((t >= 0.0 && t <= 1.0));
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(c(b, j) - ((1 - t) * two(0, j) + t * two(1, j))) < 1e-12);
  }

  CHECK_THROWS_AS(mix_intents(Matrix(1, 2, 0.5), bank), Error);
  CHECK_THROWS_AS(mix_intents(Matrix(1, 3, 0.5), bank), Error);
}

TEST_CASE("reconstruct modes") {
  Rng rng(13);
  const std::vector<Matrix> layers = {testing::random_matrix(4, 3, rng), testing::random_matrix(4, 3, rng),
                                      testing::random_matrix(4, 3, rng)};
  const Matrix c_pro = testing::random_matrix(4, 3, rng);
  const Matrix c_dis = testing::random_matrix(4, 3, rng);
  const Matrix mean = normalize_rows((layers[0] + layers[1] + layers[2]) * (1.0 / 3.0));

  CHECK(max_abs_diff(reconstruct(layers, c_pro, c_dis, EpsilonMode::Zero, rng), mean) < 1e-14);
  CHECK(max_abs_diff(reconstruct(layers, c_pro, c_pro * -1.0, EpsilonMode::EvalOnes, rng), mean) < 1e-14);

  const Matrix ones = reconstruct_raw(layers, c_pro, c_dis, EpsilonMode::EvalOnes, rng);
  CHECK(max_abs_diff(ones, (layers[0] + layers[1] + layers[2]) * (1.0 / 3.0) + c_pro + c_dis) < 1e-14);

  Rng a(77), b(77);
  CHECK(reconstruct(layers, c_pro, c_dis, EpsilonMode::TrainGaussian, a) ==
        reconstruct(layers, c_pro, c_dis, EpsilonMode::TrainGaussian, b));

  // zero mode is linear in μ before normalization
  std::vector<Matrix> scaled;
  for (const auto& l : layers) scaled.push_back(l * 2.5);
  CHECK(max_abs_diff(reconstruct_raw(scaled, c_pro, c_dis, EpsilonMode::Zero, rng),
                     reconstruct_raw(layers, c_pro, c_dis, EpsilonMode::Zero, rng) * 2.5) < 1e-13);

  CHECK(parse_epsilon_mode("eval_ones") == EpsilonMode::EvalOnes);
  CHECK_THROWS_AS(parse_epsilon_mode("sometimes"), Error);
}

TEST_CASE("score and intent marginal") {
  const std::vector<double> e1{1, 0, 0}, e2{0, 1, 0};
  CHECK(score(e1, e1) == 1.0);
  CHECK(score(e1, e2) == 0.0);
  CHECK(score_prob(e1, e2) == 0.5);
  CHECK(logistic(-800.0) >= 0.0);

  Rng rng(14);
  IntentBank one;
  one.proto_bank = testing::random_matrix(1, 3, rng);
  one.dist_bank = testing::random_matrix(1, 3, rng);
  const std::vector<double> p1{1.0};
  const std::vector<double> zu{0.3, -0.2, 0.5}, zv{0.1, 0.4, -0.6};
  std::vector<double> pu(3), pv(3);
  for (int j = 0; j < 3; ++j) {
    const double c = 0.5 * (one.proto_bank(0, j) + one.dist_bank(0, j));
    pu[j] = zu[j] + c;
    pv[j] = zv[j] + c;
  }
  CHECK(intent_marginal_prob(zu, zv, p1, p1, one) == doctest::Approx(logistic(dot(pu, pv))).epsilon(1e-14));

  IntentBank zero;
  zero.proto_bank = Matrix(3, 3);
  zero.dist_bank = Matrix(3, 3);
  const std::vector<double> pp{0.2, 0.3, 0.5}, pd{0.6, 0.1, 0.3};
  const double factor = 0.2 * 0.6 + 0.3 * 0.1 + 0.5 * 0.3;
  CHECK(intent_marginal_prob(zu, zv, pp, pd, zero) == doctest::Approx(factor * logistic(dot(zu, zv))).epsilon(1e-14));

  IntentBank three;
  three.proto_bank = testing::random_matrix(3, 3, rng);
  three.dist_bank = testing::random_matrix(3, 3, rng);
  double oracle = 0.0;
  for (int k = 0; k < 3; ++k) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double c = (three.proto_bank(k, j) + three.dist_bank(k, j)) / 2.0;
      s += (zu[j] + c) * (zv[j] + c);
    }
    oracle += pp[k] * pd[k] / (1.0 + std::exp(-s));
  }
  CHECK(std::abs(intent_marginal_prob(zu, zv, pp, pd, three) - oracle) < 1e-12);
}

TEST_CASE("model state init, finiteness and checkpoints") {
  Rng rng(15);
  ModelState::InitOptions o;
  o.users = 4;
  o.items = 3;
  o.dim = 5;
  o.intents = 6;
  o.source_dim = 7;
  o.hidden = 8;
  ModelState s = ModelState::init(o, rng);
  CHECK(s.dim() == 5);
  CHECK(s.bank.intent_count() == 6);
  CHECK(s.coarse_map == Matrix::identity(5));
  CHECK(s.trainable().size() == 10);
  s.check_finite();

  const auto dir = testing::scratch_dir("ckpt");
  save_checkpoint(dir / "m.ckpt", s);
  const ModelState back = load_checkpoint(dir / "m.ckpt");
  round_to_checkpoint_precision(s);
  for (std::size_t i = 0; i < s.trainable().size(); ++i) CHECK(*back.trainable()[i].second == *s.trainable()[i].second);
  CHECK(back.bank.eta == s.bank.eta);
  CHECK(back.bank.kappa == s.bank.kappa);

  std::fstream f(dir / "m.ckpt", std::ios::in | std::ios::out | std::ios::binary);
  f.write("XXXX", 4);
  f.close();
  try {
    load_checkpoint(dir / "m.ckpt");
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
  }

  s.bank.dist_bank(1, 1) = INFINITY;
  try {
    s.check_finite();
    FAIL("expected numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
    CHECK(std::string(e.what()).find("dist_bank") != std::string::npos);
  }
}

TEST_CASE("ranking encoder without intents is the normalized layer mean") {
  Rng rng(16);
  const EdgeList e = testing::random_edges(6, 5, 15, rng);
  const InteractionGraph g = build_graph(e);
  ModelState::InitOptions o;
  o.users = g.user_count();
  o.items = g.item_count();
  o.dim = 4;
  o.intents = 3;
  o.source_dim = 6;
  o.hidden = 5;
  const ModelState s = ModelState::init(o, rng);
  const SemanticStore sem{testing::random_matrix(o.users, 6, rng), testing::random_matrix(o.items, 6, rng)};
  EncoderOptions enc;
  enc.use_dual_intent = false;
  const Representations r = encode_for_ranking(s, g, sem, enc);
  const auto seq = propagate(g, s.user_mu, s.item_mu, 2);
  CHECK(max_abs_diff(r.user, normalize_rows(layer_mean(seq.users))) < 1e-14);

  enc.use_dual_intent = true;
  const Representations full = encode_for_ranking(s, g, sem, enc);
  for (std::size_t i = 0; i < full.item.rows(); ++i) CHECK(std::abs(norm(full.item.row(i)) - 1.0) < 1e-12);
  CHECK(encode_for_ranking(s, g, sem, enc).user == full.user);
}
