#include <filesystem>
#include <map>

#include "doctest.h"
#include "rms/dqn.hpp"
#include "support.hpp"

using namespace rms;

namespace {

Eigen::VectorXd unit(int dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = std::abs(n(rng));
  return v.normalized();
}

std::vector<Transition> random_batch(int dim, int actions, int n, Rng& rng) {
  std::uniform_int_distribution<int> a(0, actions - 1);
  std::normal_distribution<double> r(0.0, 1.0);
  std::vector<Transition> out;
  for (int i = 0; i < n; ++i) out.push_back({unit(dim, rng), a(rng), r(rng), unit(dim, rng), i % 3 == 0});
  return out;
}

// Random biases keep ReLU units away from their kink so differences are clean.
Mlp random_net(const std::vector<int>& sizes, Rng& rng) {
  Mlp m(sizes, rng);
  std::normal_distribution<double> b(0.0, 0.3);
  for (auto& L : m.layers())
    for (Eigen::Index i = 0; i < L.bias.size(); ++i) L.bias[i] = b(rng);
  return m;
}

}  // namespace

TEST_CASE("zero network outputs zeros") {
  auto q = Mlp::zeros({6, 32, 64, 32, 7});
  Rng rng(1);
  CHECK(q_forward(q, unit(6, rng)) == Eigen::VectorXd::Zero(7));
}

TEST_CASE("a fresh agent starts with Q = 0 unless the output init is switched off") {
  Rng rng(2);
  DqnConfig cfg;
  cfg.seed = 4;
  DqnAgent zero(6, 7, cfg);
  auto s = unit(6, rng);
  CHECK(q_forward(zero.q(), s) == Eigen::VectorXd::Zero(7));
  CHECK_FALSE(zero.q().layers().front().weight.isZero(0.0));
  cfg.zero_output = false;
  DqnAgent glorot(6, 7, cfg);
  CHECK_FALSE(q_forward(glorot.q(), s).isZero(0.0));
}

TEST_CASE("single identity layer passes the state through") {
  auto q = Mlp::zeros({3, 3});
  q.layers()[0].weight.setIdentity();
  Eigen::VectorXd s(3);
  s << 0.2, -0.4, 0.9;
  CHECK(q_forward(q, s) == s);
  CHECK_THROWS_AS(q_forward(q, Eigen::VectorXd::Zero(4)), Error);
}

TEST_CASE("greedy action: argmax, lowest id on ties, shift invariance, mask") {
  Eigen::VectorXd q(3);
  q << 0.1, 0.9, 0.3;
  CHECK(greedy_action(q, {}) == 1);
  Eigen::VectorXd tie = Eigen::VectorXd::Zero(7);
  tie[2] = tie[5] = 1.0;
  CHECK(greedy_action(tie, {}) == 2);
  Rng rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd v(7);
    for (int i = 0; i < 7; ++i) v[i] = n(rng);
    CHECK(greedy_action(v, {}) == greedy_action((v.array() + 12.5).matrix(), {}));
  }
  CHECK(greedy_action(q, {true, false, true}) == 2);
  CHECK_THROWS_AS(greedy_action(q, {false, false, false}), Error);
}

TEST_CASE("epsilon = 1 draws legal actions uniformly") {
  Rng rng(5);
  auto q = Mlp({6, 8, 7}, rng);
  Eigen::VectorXd s = unit(6, rng);
  std::vector<int> hits(7, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++hits[select_action(q, s, {}, 1.0, rng)];
  double chi2 = 0.0;
  const double expect = draws / 7.0;
  for (int h : hits) chi2 += (h - expect) * (h - expect) / expect;
  CHECK(chi2 < 22.46);  // 99.9th percentile of chi-square with 6 degrees of freedom

  std::vector<bool> mask{true, false, true, false, false, false, true};
  for (int i = 0; i < 500; ++i) CHECK(mask[select_action(q, s, mask, 1.0, rng)]);
}

TEST_CASE("epsilon = 0 is a pure function of the network and state") {
  Rng rng(6), a(1), b(999);
  auto q = Mlp({6, 8, 7}, rng);
  for (int i = 0; i < 50; ++i) {
    auto s = unit(6, rng);
    CHECK(select_action(q, s, {}, 0.0, a) == select_action(q, s, {}, 0.0, b));
    CHECK(select_action(q, s, {}, 0.0, a) == greedy_action(q_forward(q, s), {}));
  }
}

TEST_CASE("replay buffer evicts oldest first and samples without replacement") {
  ReplayBuffer buf(5);
  for (int i = 0; i < 8; ++i) buf.push({Eigen::VectorXd::Zero(1), i, 0.0, Eigen::VectorXd::Zero(1), false});
  CHECK(buf.size() == 5);
  for (std::size_t i = 0; i < buf.size(); ++i) CHECK(buf[i].action == static_cast<int>(i) + 3);
  Rng rng(1);
  auto s = buf.sample(4, rng);
  std::set<int> seen;
  for (auto& t : s) seen.insert(t.action);
  CHECK(seen.size() == 4);
  CHECK(buf.sample(50, rng).size() == 5);
  CHECK_THROWS_AS(ReplayBuffer(0), Error);
}

TEST_CASE("td loss gradient matches finite differences") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto q = random_net({6, 5, 7, 4, 7}, rng);
    auto target = random_net({6, 5, 7, 4, 7}, rng);
    auto batch = random_batch(6, 7, 8, rng);
    auto loss = td_loss(q, target, batch, 0.9);
    auto f = [&] { return td_loss(q, target, batch, 0.9).loss; };
    std::string worst;
    double err = test::max_gradient_error(f, q.parameters(), Mlp::parameters(loss.grad), 1e-5, &worst);
    CHECK_MESSAGE(err < 1e-4, worst);
  }
}

TEST_CASE("gamma = 0 makes the target the reward") {
  Rng rng(8);
  auto q = random_net({4, 6, 5}, rng);
  auto t1 = random_net({4, 6, 5}, rng);
  auto t2 = random_net({4, 6, 5}, rng);
  auto batch = random_batch(4, 5, 6, rng);
  for (auto& t : batch) t.done = false;
  CHECK(td_loss(q, t1, batch, 0.0).loss == td_loss(q, t2, batch, 0.0).loss);
  CHECK(td_loss(q, t1, batch, 0.9).loss != td_loss(q, t2, batch, 0.9).loss);
}

TEST_CASE("zero network on zero rewards is a fixed point") {
  auto q = Mlp::zeros({4, 3, 5});
  auto target = q;
  Rng rng(9);
  auto batch = random_batch(4, 5, 6, rng);
  for (auto& t : batch) t.reward = 0.0;
  Adam opt(0.01);
  CHECK(td_update(q, target, batch, 0.9, opt) == 0.0);
  CHECK(q.layers()[0].weight.isZero(0.0));
  CHECK(q.layers()[1].bias.isZero(0.0));
}

TEST_CASE("one terminal transition moves Q(s, a) toward the reward") {
  // One hidden unit: Q(s, a) = w2[a] * relu(w1 . s + b1) + b2[a].
  auto q = Mlp::zeros({2, 1, 3});
  q.layers()[0].weight << 0.5, 0.5;
  q.layers()[0].bias << 0.1;
  q.layers()[1].weight << 0.2, 0.3, -0.4;
  Eigen::VectorXd s(2);
  s << 0.6, 0.8;
  std::vector<Transition> batch{{s, 1, 1.0, s, true}};
  const double before = std::abs(q_forward(q, s)[1] - 1.0);
  // Hand-derived: hidden = 0.8, Q = 0.24, delta = -0.76.
  auto loss = td_loss(q, q, batch, 0.9);
  CHECK(loss.loss == doctest::Approx(0.5 * 0.76 * 0.76));
  CHECK(loss.grad[1].bias[1] == doctest::Approx(-0.76));
  CHECK(loss.grad[1].weight(1, 0) == doctest::Approx(-0.76 * 0.8));
  CHECK(loss.grad[0].bias[0] == doctest::Approx(-0.76 * 0.3));
  Sgd opt(0.05);
  auto target = q;
  td_update(q, target, batch, 0.9, opt);
  CHECK(std::abs(q_forward(q, s)[1] - 1.0) < before);
}

TEST_CASE("non-finite loss is reported") {
  auto q = Mlp::zeros({2, 2});
  Eigen::VectorXd s(2);
  s << 1.0, 0.0;
  std::vector<Transition> batch{{s, 0, std::nan(""), s, true}};
  CHECK_THROWS_AS(td_loss(q, q, batch, 0.9), Error);
}

TEST_CASE("epsilon decays linearly over the first half of planned steps") {
  DqnConfig cfg;
  cfg.episodes = 10;
  cfg.warmup = 1000;
  cfg.seed = 1;
  DqnAgent agent(5, 5, cfg);
  CHECK(agent.epsilon() == 1.0);
  test::OneGoodRelationEnv env(4, 2, 4);
  agent.train(env, 5);
  CHECK(agent.episodes_done() == 5);
  CHECK(agent.updates() == 0);
  CHECK(agent.epsilon() < 1.0);
  agent.train(env);
  CHECK(agent.episodes_done() == 10);
  CHECK(agent.epsilon() >= cfg.epsilon_end);
}

TEST_CASE("agent learns the one good relation") {
  int successes = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DqnConfig cfg;
    cfg.episodes = 200;
    cfg.seed = seed;
    test::OneGoodRelationEnv env(6, 3);
    DqnAgent agent(env.state_dim(), env.num_actions(), cfg);
    agent.train(env);
    if (agent.greedy_episode(env).front() == 3) ++successes;
  }
  CHECK(successes == 5);
}

TEST_CASE("agent checkpoint resumes bit-identically") {
  auto dir = std::filesystem::temp_directory_path() / "rms_test_dqn";
  std::filesystem::create_directories(dir);
  DqnConfig cfg;
  cfg.episodes = 60;
  cfg.warmup = 20;
  cfg.seed = 3;
  test::OneGoodRelationEnv env(5, 1);

  DqnAgent straight(6, 6, cfg);
  straight.train(env);

  DqnAgent first(6, 6, cfg);
  first.train(env, 25);
  first.save(dir / "agent.ckpt");
  DqnAgent resumed(6, 6, cfg);
  resumed.load(dir / "agent.ckpt");
  CHECK(resumed.episodes_done() == 25);
  resumed.train(env);

  for (std::size_t k = 0; k < straight.q().layers().size(); ++k) {
    CHECK(straight.q().layers()[k].weight == resumed.q().layers()[k].weight);
    CHECK(straight.q().layers()[k].bias == resumed.q().layers()[k].bias);
  }
  CHECK(straight.updates() == resumed.updates());

  DqnAgent wrong(4, 5, cfg);
  CHECK_THROWS_AS(wrong.load(dir / "agent.ckpt"), Error);
}

TEST_CASE("search with zero episodes still returns a form-valid set, deterministically") {
  auto s = movie_schema();
  SetProbe probe = [](const MetaPathSet& set) { return ProbeOutcome{0.1 * static_cast<double>(set.size()), ""}; };
  auto run = [&](int episodes) {
    DqnConfig cfg;
    cfg.episodes = episodes;
    cfg.warmup = 10;
    cfg.seed = 17;
    SearchEnv env(s, PathForm::UserSymmetric, probe);
    DqnAgent agent(env.state_dim(), env.num_actions(), cfg);
    return dqn_search(env, agent);
  };
  auto none = run(0);
  for (const auto& p : none) CHECK(satisfies_form(s, p, PathForm::UserSymmetric));
  CHECK(run(30) == run(30));
}
