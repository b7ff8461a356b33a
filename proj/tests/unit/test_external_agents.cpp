#include <doctest.h>

#include <random>

#include "cgrl/cartstem.hpp"
#include "cgrl/errors.hpp"
#include "cgrl/external_agents.hpp"
#include "cgrl/rod.hpp"

using namespace cgrl;

namespace {

SacConfig small_config() {
  SacConfig c;
  c.hidden = {16};
  c.buffer_capacity = 100;
  return c;
}

NodeLabeler env_labeler(const Environment& env) {
  return [&env](const Eigen::VectorXd& o) { return env.label_from_observation(o); };
}

// Outcome of T steps from FREE(1) of the cartstem graph, reaching `reached`.
OptionOutcome synthetic_outcome(int steps, int reached) {
  OptionOutcome o;
  o.start_node = 1;
  o.reached_node = reached;
  o.steps = steps;
  o.terminated_by = OptionEnd::kNodeChange;
  for (int t = 0; t <= steps; ++t) {
    o.states.push_back(Eigen::VectorXd::Constant(7, t));
    o.labels.push_back(t == steps ? reached : 1);
  }
  for (int t = 0; t < steps; ++t) {
    o.actions.push_back(Eigen::VectorXd::Constant(1, 0.1 * t));
    o.rewards.push_back(-1.0);
  }
  return o;
}

}  // namespace

TEST_CASE("external_act: augmented input and identifier checks") {
  std::mt19937_64 rng(1);
  ExternalAgent a = make_external_agent(7, 1, 4, small_config(), rng);
  CHECK(a.sac.observation_dim == 11);
  const Eigen::VectorXd s = Eigen::VectorXd::Ones(7);
  CHECK_THROWS_AS(external_act(a, s, Eigen::VectorXd::Zero(3), PolicyMode::kDeterministic, rng),
                  InvalidInput);
  a.sac.policy.values.setZero();
  CHECK(external_act(a, s, Eigen::VectorXd::Unit(4, 0), PolicyMode::kDeterministic, rng)[0] == 0.0);

  std::mt19937_64 init(2);
  const ExternalAgent b = make_external_agent(7, 1, 4, small_config(), init);
  std::mt19937_64 r1(3), r2(3);
  CHECK(external_act(b, s, Eigen::VectorXd::Unit(4, 0), PolicyMode::kDeterministic, r1) ==
        external_act(b, s, Eigen::VectorXd::Unit(4, 0), PolicyMode::kDeterministic, r2));
  const Eigen::VectorXd aug = augment(s, Eigen::VectorXd::Unit(4, 2));
  CHECK(aug.size() == 11);
  CHECK(aug[9] == 1.0);
}

TEST_CASE("rod grasp script from full articulation: T = 11, reaches HOLD") {
  RodEnv env;
  env.reset(0);
  RodState s = env.state();
  s.u = degrees(90);
  s.grip = Grip::kReleased;
  env.set_state(s);
  std::mt19937_64 rng(0);
  const OptionOutcome o = run_option(env, ScriptedOption{static_cast<int>(RodExpert::kGrasp)},
                                     {{0}, 1, 20}, env_labeler(env), rng);
  CHECK(o.steps == 11);
  CHECK(o.reached_node == 1);
  CHECK(o.terminated_by == OptionEnd::kNodeChange);
  CHECK(o.rewards.size() == 11);
  CHECK(o.states.size() == 12);
  CHECK(env.state().u == 0.0);
  CHECK(env.state().theta == s.theta);
}

TEST_CASE("run_option: starting set and availability enforced") {
  RodEnv env;
  env.reset(0);
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(run_option(env, ScriptedOption{0}, {{1}, 0, 5}, env_labeler(env), rng),
                  OptionUnavailable);
  CHECK_THROWS_AS(run_option(env, ScriptedOption{static_cast<int>(RodExpert::kRelease)},
                             {{0}, 1, 5}, env_labeler(env), rng),
                  OptionUnavailable);
}

TEST_CASE("run_option: T_max and episode end") {
  CartStemEnv env;
  env.reset(0);
  CartStemState s = env.state();
  s.x_cart = 0.0;
  s.x_tips = 0.0;
  s.x_left = -4;
  s.x_right = 4;
  env.set_state(s);
  std::mt19937_64 init(1);
  ExternalAgent a = make_external_agent(7, 1, 4, small_config(), init);
  a.sac.policy.values.setZero();  // target x = 0, the cart stays in FREE
  const LearnedOption policy{&a, Eigen::VectorXd::Unit(4, 0), PolicyMode::kDeterministic};
  std::mt19937_64 rng(0);
  OptionOutcome o = run_option(env, policy, {{1}, 0, 1}, env_labeler(env), rng);
  CHECK(o.steps == 1);
  CHECK(o.terminated_by == OptionEnd::kTMax);
  CHECK(o.reached_node == 1);
  CHECK(her_relabel(o, cartstem_graph()).empty());

  s.step_index = 28;
  env.set_state(s);
  o = run_option(env, policy, {{1}, 0, 15}, env_labeler(env), rng);
  CHECK(o.steps == 2);
  CHECK(o.terminated_by == OptionEnd::kEpisodeEnd);
  CHECK(o.episode_done);
  CHECK_FALSE(o.terminal);
}

TEST_CASE("run_option stops on node change and never leaves the neighbourhood") {
  CartStemEnv env;
  std::mt19937_64 init(1);
  ExternalAgent a = make_external_agent(7, 1, 4, small_config(), init);
  const ConfigGraph g = cartstem_graph();
  std::mt19937_64 rng(0);
  int changes = 0;
  for (std::uint64_t ep = 0; ep < 200; ++ep) {
    env.reset(ep);
    const int start = env.oracle_label();
    const LearnedOption policy{&a, g.node(g.neighbors(start)[0]).identifier,
                               PolicyMode::kStochastic};
    const OptionOutcome o = run_option(env, policy, {{start}, g.neighbors(start)[0], 15},
                                       env_labeler(env), rng);
    const auto cands = g.candidate_set(start);
    CHECK(std::find(cands.begin(), cands.end(), o.reached_node) != cands.end());
    CHECK(o.steps <= 15);
    for (int t = 0; t + 1 < o.steps; ++t) CHECK(o.labels[t + 1] == start);
    if (o.terminated_by == OptionEnd::kNodeChange) ++changes;
  }
  CHECK(changes > 0);
}

TEST_CASE("her_relabel counts and rewards") {
  const ConfigGraph g = cartstem_graph();
  const OptionOutcome o = synthetic_outcome(3, 0);
  const auto tr = her_relabel(o, g);
  REQUIRE(tr.size() == 6);
  for (int t = 0; t < 3; ++t) {
    const Transition& pos = tr[t];
    const Transition& neg = tr[3 + t];
    CHECK(pos.s.tail(4) == g.node(0).identifier);
    CHECK(neg.s.tail(4) == g.node(2).identifier);
    CHECK(pos.s.head(7) == neg.s.head(7));
    CHECK(pos.a == neg.a);
    CHECK(pos.r == (t == 2 ? 1.0 : 0.0));
    CHECK(neg.r == (t == 2 ? -1.0 : 0.0));
    CHECK(pos.done == (t == 2));
    CHECK(neg.done == (t == 2));
    CHECK(pos.s_next.head(7) == o.states[t + 1]);
  }

  // one-neighbour start: no negative track
  OptionOutcome left = synthetic_outcome(4, 1);
  left.start_node = 0;
  CHECK(her_relabel(left, g).size() == 4);

  OptionOutcome no_change = synthetic_outcome(3, 1);
  no_change.terminated_by = OptionEnd::kTMax;
  CHECK(her_relabel(no_change, g).empty());
}

TEST_CASE("her_relabel emits T (1 + negatives) transitions") {
  ConfigGraph star = ConfigGraph::with_one_hot_identifiers({"c", "a", "b", "d", "e"});
  for (int j = 1; j < 5; ++j) star.add_edge(0, j);
  for (int T = 1; T <= 6; ++T) {
    OptionOutcome o = synthetic_outcome(T, 3);
    o.start_node = 0;
    for (auto& s : o.states) s = Eigen::VectorXd::Constant(7, 0.5);
    CHECK(her_relabel(o, star).size() == static_cast<std::size_t>(T * 4));
  }
}

TEST_CASE("external_update is sac_update on the augmented agent") {
  std::mt19937_64 init(1);
  ExternalAgent a = make_external_agent(7, 1, 4, small_config(), init);
  SacAgent plain = a.sac;
  const auto batch = her_relabel(synthetic_outcome(3, 0), cartstem_graph());
  std::mt19937_64 r1(4), r2(4);
  external_update(a, batch, r1);
  sac_update(plain, batch, r2);
  CHECK(a.sac.policy.values == plain.policy.values);
  auto bad = batch;
  bad[0].r = std::nan("");
  CHECK(external_update(a, bad, r1).skipped);
}
