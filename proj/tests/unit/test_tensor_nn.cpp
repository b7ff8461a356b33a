#include <doctest.h>

#include <cmath>
#include <random>

#include "cgrl/errors.hpp"
#include "cgrl/tensor_nn.hpp"

using namespace cgrl;

namespace {

double max_rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

TEST_CASE("mlp_forward: zero weights return the bias") {
  MlpParams p = make_mlp({3, 2}, {Activation::kLinear});
  p.bias(0) << 0.7, -1.3;
  Eigen::VectorXd x(3);
  x << 5, -2, 9;
  const Eigen::VectorXd y = mlp_forward(p, x);
  CHECK(y[0] == 0.7);
  CHECK(y[1] == -1.3);
}

TEST_CASE("mlp_forward: identity layer") {
  MlpParams p = make_mlp({3, 3}, {Activation::kLinear});
  p.weight(0) = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd x(3);
  x << 0.1, -4, 2.5;
  CHECK((mlp_forward(p, x) - x).norm() == 0.0);
}

TEST_CASE("mlp_forward: 2-3-1 hand evaluation") {
  std::mt19937_64 rng(7);
  MlpParams p = init_mlp({2, 3, 1}, {Activation::kTanh, Activation::kLinear}, rng);
  p.bias(0) << 0.1, -0.2, 0.3;
  p.bias(1) << 0.05;
  Eigen::VectorXd x(2);
  x << 0.5, -0.2;
  double out = p.bias(1)[0];
  for (int j = 0; j < 3; ++j) {
    double h = p.bias(0)[j];
    for (int i = 0; i < 2; ++i) h += p.weight(0)(j, i) * x[i];
    out += p.weight(1)(0, j) * std::tanh(h);
  }
  CHECK(mlp_forward(p, x)[0] == doctest::Approx(out).epsilon(1e-14));
}

TEST_CASE("mlp_forward: dimension mismatch rejected") {
  MlpParams p = make_mlp({3, 2}, {Activation::kLinear});
  CHECK_THROWS_AS(mlp_forward(p, Eigen::VectorXd::Zero(2)), InvalidInput);
  CHECK_THROWS_AS(mlp_gradient(p, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(3)),
                  InvalidInput);
}

TEST_CASE("glorot init bounds") {
  std::mt19937_64 rng(1);
  MlpParams p = init_mlp({10, 30, 4}, {Activation::kRelu, Activation::kLinear}, rng);
  const double b0 = std::sqrt(6.0 / 40.0), b1 = std::sqrt(6.0 / 34.0);
  CHECK(p.weight(0).cwiseAbs().maxCoeff() <= b0);
  CHECK(p.weight(1).cwiseAbs().maxCoeff() <= b1);
  CHECK(p.bias(0).norm() == 0.0);
  std::mt19937_64 rng2(1);
  MlpParams q = init_mlp({10, 30, 4}, {Activation::kRelu, Activation::kLinear}, rng2);
  CHECK(p.values == q.values);
}

TEST_CASE("mlp_gradient: zero upstream gives zero gradient") {
  std::mt19937_64 rng(3);
  MlpParams p = init_mlp(4, {8, 8}, 2, Activation::kTanh, rng);
  const MlpGradient g = mlp_gradient(p, Eigen::VectorXd::Random(4), Eigen::VectorXd::Zero(2));
  CHECK(g.params.norm() == 0.0);
  CHECK(g.input.norm() == 0.0);
}

TEST_CASE("mlp_gradient: linear layer weight gradient is an outer product") {
  std::mt19937_64 rng(4);
  MlpParams p = init_mlp({3, 2}, {Activation::kLinear}, rng);
  Eigen::VectorXd x(3), up(2);
  x << 1, -2, 0.5;
  up << 0.3, -0.7;
  const MlpGradient g = mlp_gradient(p, x, up);
  const Eigen::MatrixXd outer = up * x.transpose();
  Eigen::Map<const Eigen::MatrixXd> gw(g.params.data() + p.weight_offset(0), 2, 3);
  CHECK((gw - outer).norm() < 1e-15);
  Eigen::Map<const Eigen::VectorXd> gb(g.params.data() + p.bias_offset(0), 2);
  CHECK((gb - up).norm() < 1e-15);
}

TEST_CASE("mlp_gradient: finite differences on 100 seeded networks") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> width(1, 6);
  const Activation acts[] = {Activation::kTanh, Activation::kRelu, Activation::kLinear};
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const int in = width(rng), hid = width(rng), out = width(rng);
    const Activation a = acts[n % 3];
    MlpParams p = init_mlp({in, hid, hid, out}, {a, a, Activation::kLinear}, rng);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (Eigen::Index i = 0; i < p.values.size(); ++i) p.values[i] += 0.1 * u(rng);
    Eigen::VectorXd x(in), up(out);
    for (int i = 0; i < in; ++i) x[i] = 2.0 * u(rng);
    for (int i = 0; i < out; ++i) up[i] = 2.0 * u(rng);
    const MlpGradient g = mlp_gradient(p, x, up);
    const double h = 1e-5;
    auto f = [&](const MlpParams& q, const Eigen::VectorXd& xi) { return up.dot(mlp_forward(q, xi)); };
    for (Eigen::Index i = 0; i < p.values.size(); ++i) {
      MlpParams lo = p, hi = p;
      lo.values[i] -= h;
      hi.values[i] += h;
      const double fd = (f(hi, x) - f(lo, x)) / (2 * h);
      worst = std::max(worst, max_rel_err(fd, g.params[i]));
    }
    for (int i = 0; i < in; ++i) {
      Eigen::VectorXd lo = x, hi = x;
      lo[i] -= h;
      hi[i] += h;
      const double fd = (f(p, hi) - f(p, lo)) / (2 * h);
      worst = std::max(worst, max_rel_err(fd, g.input(i, 0)));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("mlp batch gradient accumulates per-sample gradients") {
  std::mt19937_64 rng(5);
  MlpParams p = init_mlp(3, {5}, 2, Activation::kTanh, rng);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 4), U = Eigen::MatrixXd::Random(2, 4);
  MlpCache cache;
  mlp_forward_batch(p, X, &cache);
  const MlpGradient g = mlp_backward_batch(p, cache, U);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.values.size());
  for (int b = 0; b < 4; ++b) {
    const MlpGradient gb = mlp_gradient(p, X.col(b), U.col(b));
    sum += gb.params;
    CHECK((gb.input - g.input.col(b)).norm() < 1e-12);
  }
  CHECK((sum - g.params).norm() < 1e-12);
}

TEST_CASE("adam: zero gradient leaves params unchanged") {
  Eigen::VectorXd p(2);
  p << 1.5, -2;
  const Eigen::VectorXd before = p;
  AdamState s = make_adam(2, 1e-3);
  adam_step(p, Eigen::VectorXd::Zero(2), s);
  CHECK(p == before);
  CHECK(s.step_count == 1);
}

TEST_CASE("adam: first step value") {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
  AdamState s = make_adam(1, 0.001);
  adam_step(p, Eigen::VectorXd::Constant(1, 1.0), s);
  CHECK(p[0] == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(-0.000999999990).epsilon(1e-9));
}

TEST_CASE("adam: constant gradient step converges to -lr") {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(1);
  AdamState s = make_adam(1, 0.01);
  double last = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double before = p[0];
    adam_step(p, Eigen::VectorXd::Constant(1, 3.0), s);
    last = p[0] - before;
  }
  CHECK(last == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam: non-finite gradient rejected without side effects") {
  Eigen::VectorXd p = Eigen::VectorXd::Ones(2);
  AdamState s = make_adam(2, 1e-3);
  Eigen::VectorXd g(2);
  g << 1.0, std::nan("");
  try {
    adam_step(p, g, s, "critic");
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("critic") != std::string::npos);
  }
  CHECK(p == Eigen::VectorXd::Ones(2));
  CHECK(s.step_count == 0);
}

TEST_CASE("adam is deterministic") {
  Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(5, -1, 1), b = a;
  AdamState sa = make_adam(5, 1e-2), sb = sa;
  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(5, 0.3, -2);
  for (int i = 0; i < 10; ++i) {
    adam_step(a, g, sa);
    adam_step(b, g, sb);
  }
  CHECK(a == b);
}

TEST_CASE("softmax examples") {
  CHECK_THROWS_AS(softmax(Eigen::VectorXd()), InvalidInput);
  const Eigen::VectorXd u = softmax(Eigen::VectorXd::Constant(4, 2.5));
  for (int i = 0; i < 4; ++i) CHECK(u[i] == doctest::Approx(0.25));
  Eigen::VectorXd v(2);
  v << 0.0, std::log(3.0);
  const Eigen::VectorXd p = softmax(v);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax: simplex and shift invariance, including huge scores") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int n = 0; n < 200; ++n) {
    Eigen::VectorXd v(1 + n % 7);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = (n % 2 ? 1.0 : 1e-3) * u(rng);
    const Eigen::VectorXd p = softmax(v);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
    const Eigen::VectorXd q = softmax((v.array() + 37.5).matrix());
    CHECK((p - q).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("attention_scores examples") {
  Eigen::MatrixXd keys = Eigen::MatrixXd::Identity(3, 4);
  const Eigen::VectorXd uni = attention_scores(Eigen::VectorXd::Zero(4), keys, 4);
  for (int i = 0; i < 3; ++i) CHECK(uni[i] == doctest::Approx(1.0 / 3.0));

  const Eigen::VectorXd q = 10.0 * keys.row(2).transpose();
  const Eigen::VectorXd a = attention_scores(q, keys, 4);
  Eigen::Index arg;
  a.maxCoeff(&arg);
  CHECK(arg == 2);
  CHECK(a[2] == doctest::Approx(std::exp(5.0) / (std::exp(5.0) + 2.0)).epsilon(1e-12));

  const Eigen::VectorXd one = attention_scores(q, keys.topRows(1), 4);
  CHECK(one.size() == 1);
  CHECK(one[0] == 1.0);

  CHECK_THROWS_AS(attention_scores(Eigen::VectorXd(), Eigen::MatrixXd(2, 0), 0), InvalidInput);
}

TEST_CASE("attention_scores: shift of every raw dot product leaves the result unchanged") {
  // Adding c * q / |q|^2 * sqrt(d) to every key shifts all scores by the same c.
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 1);
  Eigen::VectorXd q(4);
  Eigen::MatrixXd K(5, 4);
  for (int i = 0; i < 4; ++i) q[i] = n(rng);
  for (int i = 0; i < 20; ++i) K.data()[i] = n(rng);
  const Eigen::VectorXd base = attention_scores(q, K, 4);
  const Eigen::RowVectorXd shift = (3.0 * 2.0 / q.squaredNorm()) * q.transpose();
  const Eigen::MatrixXd K2 = K.rowwise() + shift;
  CHECK((attention_scores(q, K2, 4) - base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("polyak endpoints") {
  std::mt19937_64 rng(9);
  MlpParams a = init_mlp(2, {3}, 1, Activation::kRelu, rng);
  MlpParams b = init_mlp(2, {3}, 1, Activation::kRelu, rng);
  MlpParams t = a;
  polyak_update(t, b, 0.0);
  CHECK(t.values == a.values);
  polyak_update(t, b, 1.0);
  CHECK(t.values == b.values);
}

TEST_CASE("export/import round trip") {
  std::mt19937_64 rng(10);
  MlpParams a = init_mlp(3, {4}, 2, Activation::kTanh, rng);
  TensorMap m;
  for (auto& t : export_mlp(a, "net")) m[t.name] = t;
  CHECK(m.count("net/w0") == 1);
  CHECK(m.at("net/w0").shape == std::vector<std::int64_t>{4, 3});
  MlpParams b = make_mlp({3, 4, 2}, {Activation::kTanh, Activation::kLinear});
  import_mlp(b, m, "net");
  CHECK(a.values == b.values);
  m.erase("net/b1");
  CHECK_THROWS_AS(import_mlp(b, m, "net"), InvalidInput);
}
