#include <sstream>

#include "doctest.h"
#include "rms/archive.hpp"
#include "rms/nn.hpp"
#include "rms/optim.hpp"
#include "support.hpp"

using namespace rms;

TEST_CASE("huber loss branches") {
  CHECK(nn::huber_loss(0.5) == 0.125);
  CHECK(nn::huber_loss(2.0) == 1.5);
  CHECK(nn::huber_loss(1.0) == 0.5);
  CHECK(nn::huber_loss(-2.0) == 1.5);
  CHECK(nn::huber_grad(0.3) == 0.3);
  CHECK(nn::huber_grad(-4.0) == -1.0);
}

TEST_CASE("activation derivatives match finite differences") {
  using nn::Activation;
  for (Activation a : {Activation::Identity, Activation::Relu, Activation::LeakyRelu, Activation::Elu,
                       Activation::Tanh, Activation::Sigmoid}) {
    for (double x : {-2.3, -0.7, 0.4, 1.9}) {
      const double h = 1e-6;
      double numeric = (nn::activate(a, x + h) - nn::activate(a, x - h)) / (2 * h);
      CHECK(nn::activate_grad(a, x) == doctest::Approx(numeric).epsilon(1e-6));
    }
    CHECK(nn::parse_activation(nn::to_string(a)) == a);
  }
  CHECK_THROWS_AS(nn::parse_activation("swish"), Error);
}

TEST_CASE("softplus and sigmoid are stable at the extremes") {
  CHECK(nn::softplus(800.0) == doctest::Approx(800.0));
  CHECK(nn::softplus(-800.0) >= 0.0);
  CHECK(std::isfinite(nn::softplus(-800.0)));
  CHECK(nn::sigmoid(-800.0) == 0.0);
  CHECK(nn::sigmoid(800.0) == 1.0);
  CHECK(nn::softplus(0.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("softmax sums to one and its backward matches finite differences") {
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd x(5), w(5);
    for (int i = 0; i < 5; ++i) x[i] = n(rng), w[i] = n(rng);
    auto p = nn::softmax(x);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    auto dx = nn::softmax_backward(p, w);
    for (int i = 0; i < 5; ++i) {
      Eigen::VectorXd up = x, down = x;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      double numeric = (nn::softmax(up).dot(w) - nn::softmax(down).dot(w)) / 2e-6;
      CHECK(dx[i] == doctest::Approx(numeric).epsilon(1e-5));
    }
  }
  Eigen::VectorXd huge(2);
  huge << 1000.0, 1000.0;
  CHECK(nn::softmax(huge)[0] == doctest::Approx(0.5));
}

TEST_CASE("glorot bounds") {
  Rng rng(3);
  auto m = nn::glorot(30, 20, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  CHECK(m.cwiseAbs().maxCoeff() <= bound);
  CHECK(m.cwiseAbs().maxCoeff() > 0.8 * bound);
}

TEST_CASE("sgd and adam take the textbook first step") {
  Eigen::VectorXd p(2), g(2);
  p << 1.0, -1.0;
  g << 0.5, -2.0;
  std::vector<ParamRef> ps{ParamRef::of(p)}, gs{ParamRef::of(g)};
  Sgd sgd(0.1);
  sgd.step(ps, gs);
  CHECK(p[0] == doctest::Approx(0.95));
  CHECK(p[1] == doctest::Approx(-0.8));

  p << 1.0, -1.0;
  Adam adam(0.01);
  adam.step(ps, gs);
  // The bias-corrected first Adam step moves each entry by lr * sign(g).
  CHECK(p[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-0.99).epsilon(1e-6));
  CHECK_THROWS_AS(make_optimizer("rmsprop", 0.1), Error);
}

TEST_CASE("adam minimizes a quadratic and its state survives a save/load") {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 5.0), g(3);
  std::vector<ParamRef> ps{ParamRef::of(x)}, gs{ParamRef::of(g)};
  Adam a(0.1);
  for (int i = 0; i < 20; ++i) {
    g = 2 * x;
    a.step(ps, gs);
  }
  TensorArchive ar;
  a.save(ar, "opt");
  Adam b(0.1);
  b.load(ar, "opt");
  Eigen::VectorXd y = x;
  std::vector<ParamRef> ys{ParamRef::of(y)};
  for (int i = 0; i < 300; ++i) {
    g = 2 * x;
    a.step(ps, gs);
    g = 2 * y;
    b.step(ys, gs);
  }
  CHECK(x == y);
  CHECK(x.norm() < 0.05);
}

TEST_CASE("archive round-trips tensors and text byte for byte") {
  TensorArchive ar;
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, std::nextafter(6.0, 7.0);
  ar.put("w", m);
  ar.put("b", Eigen::VectorXd(Eigen::VectorXd::Constant(4, -0.25)));
  ar.put_text("kind", "test");
  ar.put_int("steps", -12);
  std::stringstream a;
  ar.write(a);
  auto back = TensorArchive::read(a);
  CHECK(back.matrix("w") == m);
  CHECK(back.vector("b") == Eigen::VectorXd::Constant(4, -0.25));
  CHECK(back.text("kind") == "test");
  CHECK(back.integer("steps") == -12);
  std::stringstream b;
  back.write(b);
  CHECK(a.str() == b.str());
  CHECK_THROWS_AS(back.matrix("missing"), Error);

  std::stringstream junk("RMSCKPT");
  CHECK_THROWS_AS(TensorArchive::read(junk), Error);
}

TEST_CASE("binary primitives are little-endian") {
  std::stringstream s;
  BinaryWriter w(s);
  w.u32(0x01020304);
  CHECK(s.str() == std::string("\x04\x03\x02\x01", 4));
  w.f64(-1.5);
  w.str("hi");
  BinaryReader r(s);
  CHECK(r.u32() == 0x01020304u);
  CHECK(r.f64() == -1.5);
  CHECK(r.str() == "hi");
  CHECK_THROWS_AS(r.u32(), Error);
}

TEST_CASE("seed mixing and hashing are stable") {
  static_assert(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(7, 3) == mix_seed(7, 3));
}
