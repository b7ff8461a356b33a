#include "cgrl/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cgrl/cartstem.hpp"
#include "cgrl/errors.hpp"
#include "cgrl/metrics.hpp"
#include "cgrl/rod.hpp"

namespace cgrl {

double ExplorationSchedule::floor_at(long iteration) const {
  if (iterations <= 0 || iteration >= iterations) return std_floor_end;
  const double f = static_cast<double>(iteration) / static_cast<double>(iterations);
  return std_floor_start + f * (std_floor_end - std_floor_start);
}

std::unique_ptr<Environment> make_environment(const RunConfig& config, bool for_evaluation) {
  if (config.env == "cartstem")
    return std::make_unique<CartStemEnv>(
        config.cartstem, for_evaluation ? config.training.eval_goal_mode : GoalMode::kMixed);
  if (config.env == "rod")
    return std::make_unique<RodEnv>(config.rod, config.mode == RunMode::kFlat);
  throw InvalidInput("unknown env '" + config.env + "'");
}

Agents make_agents(const RunConfig& config, const Environment& env, std::mt19937_64& rng) {
  Agents a;
  a.mode = config.mode;
  a.selector_source = config.selector_source;
  a.graph = build_graph(config);
  if (const auto problems = a.graph.validate(); !problems.empty())
    throw InvalidInput("graph: " + problems.front());
  for (const auto& name : env.node_names()) a.label_map.push_back(a.graph.id_of(name));
  a.option_t_max = config.option_t_max;
  a.penalty_internal = config.penalty_internal;
  a.penalty_external = config.penalty_external;

  const int od = env.observation_dim();
  const int ad = env.action_dim();
  if (config.mode == RunMode::kFlat) {
    a.flat = make_sac_agent(od, ad, config.sac, rng);
    a.flat_buffer = ReplayBuffer<Transition>(config.sac.buffer_capacity);
    return a;
  }

  for (int n = 0; n < static_cast<int>(a.graph.size()); ++n) {
    if (config.mode == RunMode::kGraphConvex) {
      if (env.name() != "cartstem") throw InvalidInput("convex internal agents need cartstem");
      a.internal.push_back(make_convex_internal(n, config.cartstem));
    } else {
      a.internal.push_back(make_learned_internal(n, od, ad, config.sac, rng));
    }
  }
  if (config.external_kind == ExternalKind::kLearned) {
    a.external = make_external_agent(od, ad, a.graph.identifier_dim(), config.sac, rng);
  } else {
    const auto names = env.expert_names();
    auto script = [&names](const std::string& s) {
      const auto it = std::find(names.begin(), names.end(), s);
      if (it == names.end()) throw InvalidInput("environment has no expert '" + s + "'");
      return static_cast<int>(it - names.begin());
    };
    if (env.name() != "rod") throw InvalidInput("expert options are only defined for the rod");
    a.expert_script[a.graph.id_of("FREE")] = script("grasp");
    a.expert_script[a.graph.id_of("HOLD")] = script("release");
  }
  a.evaluator = make_evaluator(a.graph, od, config.evaluator, rng);
  a.evaluator_buffer = ReplayBuffer<OptionTransition>(config.evaluator.buffer_capacity);
  return a;
}

namespace {

int oracle_node(const Agents& agents, const Environment& env, const Eigen::VectorXd& obs) {
  const int l = env.label_from_observation(obs);
  if (l < 0 || l >= static_cast<int>(agents.label_map.size()))
    throw InvalidInput("environment label " + std::to_string(l) + " has no graph node");
  return agents.label_map[l];
}

EpisodeTrace run_flat_episode(Environment& env, const Agents& agents, const EpisodeOptions& options,
                              std::mt19937_64& rng) {
  EpisodeTrace trace;
  trace.requires_contact = env.goal_requires_contact();
  Eigen::VectorXd s = env.observation();
  const PolicyMode mode = options.explore ? PolicyMode::kStochastic : PolicyMode::kDeterministic;
  for (;;) {
    StepRecord r;
    r.observation = s;
    r.action = policy_sample(*agents.flat, s, mode, rng).action;
    const EnvStep st = env.step(r.action);
    r.next_observation = st.observation;
    r.agent = AgentKind::kFlat;
    r.reward = st.reward;
    r.terminal = st.terminal;
    trace.reward_total += st.reward;
    trace.steps.push_back(std::move(r));
    s = st.observation;
    if (st.done) {
      trace.terminal = st.terminal;
      break;
    }
  }
  trace.episode_return = trace.reward_total;
  trace.success = env.success();
  return trace;
}

}  // namespace

EpisodeTrace run_episode(Environment& env, const Agents& agents, const EpisodeOptions& options,
                         std::uint64_t seed, std::mt19937_64& rng) {
  env.reset(seed);
  if (agents.mode == RunMode::kFlat) {
    if (!agents.flat) throw InvalidInput("flat mode without a flat agent");
    return run_flat_episode(env, agents, options, rng);
  }
  if (!agents.evaluator) throw InvalidInput("graph mode without an evaluator");
  const bool learned_routing = agents.selector_source == SelectorSource::kLearned;
  if (learned_routing && !agents.selector)
    throw InvalidInput("learned routing requested but no selector is loaded");

  EpisodeTrace trace;
  trace.requires_contact = env.goal_requires_contact();
  const NodeLabeler label = [&](const Eigen::VectorXd& obs) {
    return learned_routing ? selector_predict(*agents.selector, obs).label
                           : oracle_node(agents, env, obs);
  };
  const PolicyMode mode = options.explore ? PolicyMode::kStochastic : PolicyMode::kDeterministic;
  const ChoiceMode choice_mode = options.explore ? ChoiceMode::kExplore : ChoiceMode::kGreedy;

  Eigen::VectorXd s = env.observation();
  int node = label(s);
  bool done = false;
  while (!done) {
    if (agents.selector) {
      const int truth = oracle_node(agents, env, s);
      const int guess = learned_routing ? node : selector_predict(*agents.selector, s).label;
      ++trace.selector_checks;
      if (guess == truth) ++trace.selector_correct;
      else if (learned_routing) ++trace.mislabels;
    }
    if (node < 0 || node >= static_cast<int>(agents.internal.size()))
      throw InvalidInput("no internal agent for node " + std::to_string(node));
    const std::vector<int> cands = agents.graph.candidate_set(node);
    const int choice =
        evaluator_choose(*agents.evaluator, s, cands, choice_mode, rng, options.std_floor);

    Decision d;
    d.first_step = static_cast<int>(trace.steps.size());
    d.start_node = node;
    d.choice = choice;
    const int di = static_cast<int>(trace.decisions.size());

    if (choice == node) {
      StepRecord r;
      r.observation = s;
      r.action = internal_act(agents.internal[node], s, node, mode, rng);
      const EnvStep st = env.step(r.action);
      r.next_observation = st.observation;
      r.node = node;
      r.next_node = label(st.observation);
      r.agent = AgentKind::kInternal;
      r.decision = di;
      r.reward = st.reward;
      r.terminal = st.terminal;
      if (r.next_node != node) r.penalty = agents.penalty_internal;
      d.steps = 1;
      d.end_node = r.next_node;
      d.agent = AgentKind::kInternal;
      d.end = r.next_node != node ? OptionEnd::kNodeChange
                                  : (st.done ? OptionEnd::kEpisodeEnd : OptionEnd::kTMax);
      d.penalty = r.penalty;
      trace.reward_total += r.reward;
      trace.penalties_total += r.penalty;
      s = st.observation;
      node = r.next_node;
      done = st.done;
      trace.terminal = st.terminal;
      trace.steps.push_back(std::move(r));
    } else {
      OptionSpec spec{{node}, choice, agents.option_t_max};
      OptionPolicy policy;
      const auto script = agents.expert_script.find(node);
      if (script != agents.expert_script.end()) {
        policy = ScriptedOption{script->second};
        d.agent = AgentKind::kExpert;
        d.script = script->second;
        d.penalty = agents.penalty_external;
      } else if (agents.external) {
        policy = LearnedOption{&*agents.external, agents.graph.node(choice).identifier, mode};
        d.agent = AgentKind::kExternalLearned;
      } else {
        throw InvalidInput("no external agent can leave node " + std::to_string(node));
      }
      const OptionOutcome out = run_option(env, policy, spec, label, rng);
      for (int t = 0; t < out.steps; ++t) {
        StepRecord r;
        r.observation = out.states[t];
        r.action = out.actions[t];
        r.next_observation = out.states[t + 1];
        r.node = out.labels[t];
        r.next_node = out.labels[t + 1];
        r.agent = d.agent;
        r.decision = di;
        r.reward = out.rewards[t];
        r.terminal = t + 1 == out.steps && out.terminal;
        if (t == 0) r.penalty = d.penalty;
        trace.reward_total += r.reward;
        trace.penalties_total += r.penalty;
        trace.steps.push_back(std::move(r));
      }
      d.steps = out.steps;
      d.end_node = out.reached_node;
      d.end = out.terminated_by;
      s = out.states.back();
      node = out.reached_node;
      done = out.episode_done;
      trace.terminal = out.terminal;
    }
    trace.decisions.push_back(d);
  }
  trace.episode_return = trace.reward_total + trace.penalties_total;
  trace.success = env.success();
  return trace;
}

DispatchCounts dispatch_training(const EpisodeTrace& trace, Agents& agents) {
  DispatchCounts counts;
  if (trace.steps.empty()) throw InvalidInput("dispatch: empty trace");
  if (agents.mode == RunMode::kFlat) {
    for (const auto& r : trace.steps) {
      if (r.agent != AgentKind::kFlat) throw InvalidInput("dispatch: non-flat step in a flat trace");
    }
    for (const auto& r : trace.steps) {
      agents.flat_buffer.push(Transition{r.observation, r.action, r.reward, r.next_observation, r.terminal});
      ++counts.flat;
    }
    return counts;
  }

  // consistency first, so a bad trace leaves every buffer untouched
  int covered = 0;
  for (const auto& d : trace.decisions) {
    if (d.first_step != covered || d.steps < 1 ||
        d.first_step + d.steps > static_cast<int>(trace.steps.size()))
      throw InvalidInput("dispatch: decisions do not tile the trace");
    covered += d.steps;
  }
  if (covered != static_cast<int>(trace.steps.size()))
    throw InvalidInput("dispatch: decisions do not tile the trace");
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& r = trace.steps[i];
    if (!agents.graph.contains(r.node) || !agents.graph.contains(r.next_node))
      throw InvalidInput("dispatch: step label outside the graph");
    if (r.node != r.next_node) {
      const auto nb = agents.graph.neighbors(r.node);
      if (!std::binary_search(nb.begin(), nb.end(), r.next_node))
        throw InvalidInput("dispatch: step jumps between non-adjacent nodes");
    }
    if (i + 1 < trace.steps.size() && trace.steps[i + 1].node != r.next_node)
      throw InvalidInput("dispatch: labels of consecutive steps disagree");
  }

  for (const auto& d : trace.decisions) {
    std::vector<Eigen::VectorXd> states;
    std::vector<double> rewards;
    for (int t = d.first_step; t < d.first_step + d.steps; ++t) {
      states.push_back(trace.steps[t].observation);
      rewards.push_back(trace.steps[t].reward);
    }
    const auto& last = trace.steps[d.first_step + d.steps - 1];
    states.push_back(last.next_observation);
    for (auto& o : build_option_transitions(states, d.start_node, d.choice, rewards, d.end_node,
                                            last.terminal, d.penalty)) {
      agents.evaluator_buffer.push(std::move(o));
      ++counts.evaluator;
    }

    if (d.agent == AgentKind::kExternalLearned && agents.external) {
      OptionOutcome out;
      out.start_node = d.start_node;
      out.reached_node = d.end_node;
      out.steps = d.steps;
      out.terminated_by = d.end;
      for (int t = d.first_step; t < d.first_step + d.steps; ++t) {
        out.states.push_back(trace.steps[t].observation);
        out.actions.push_back(trace.steps[t].action);
        out.rewards.push_back(trace.steps[t].reward);
      }
      out.states.push_back(last.next_observation);
      for (auto& t : her_relabel(out, agents.graph)) agents.external->buffer.push(std::move(t));
      counts.external += d.steps;
    }
  }

  for (const auto& r : trace.steps) {
    if (r.agent != AgentKind::kInternal && r.agent != AgentKind::kExternalLearned) continue;
    InternalAgent& ia = agents.internal[r.node];
    if (ia.kind != InternalKind::kLearned) continue;
    ia.buffer.push(NodeTransition{
        Transition{r.observation, r.action, r.reward, r.next_observation, r.terminal}, r.node,
        r.next_node});
    ++counts.internal[r.node];
    if (r.node != r.next_node) ++counts.boundary;
  }
  return counts;
}

UpdateCounts run_updates(Agents& agents, const DispatchCounts& fresh, const UpdateSchedule& schedule,
                         std::map<std::string, long>& pending, long iteration, std::mt19937_64& rng) {
  UpdateCounts done;
  const bool warm = iteration >= schedule.warmup_steps;
  const auto batch = static_cast<std::size_t>(schedule.batch_size);
  auto owed = [&](const std::string& key, long add, std::size_t have, std::size_t need) {
    long& p = pending[key];
    p += add;
    const long n = p / schedule.update_every;
    p %= schedule.update_every;
    return (warm && have >= need) ? n : 0L;
  };

  if (agents.mode == RunMode::kFlat) {
    const long n = owed("flat", fresh.flat, agents.flat_buffer.size(), batch);
    for (long i = 0; i < n; ++i) {
      const auto b = agents.flat_buffer.sample(batch, rng);
      if (sac_update(*agents.flat, b, rng).skipped) ++done.skipped;
      ++done.flat;
    }
    return done;
  }

  // neighbours read from snapshots taken before this round
  std::map<int, SacAgent> snapshots;
  for (const auto& ia : agents.internal)
    if (ia.kind == InternalKind::kLearned) snapshots.emplace(ia.node, *ia.sac);
  std::map<int, const SacAgent*> neighbor_view;
  for (const auto& [n, sac] : snapshots) neighbor_view[n] = &sac;

  for (auto& ia : agents.internal) {
    if (ia.kind != InternalKind::kLearned) continue;
    const auto it = fresh.internal.find(ia.node);
    const long n = owed("internal/" + std::to_string(ia.node),
                        it == fresh.internal.end() ? 0 : it->second, ia.buffer.size(), batch);
    std::map<int, const SacAgent*> nb;
    for (int j : agents.graph.neighbors(ia.node))
      if (neighbor_view.count(j)) nb[j] = neighbor_view[j];
    for (long i = 0; i < n; ++i) {
      const auto b = ia.buffer.sample(batch, rng);
      const auto rep = internal_update(ia, b, nb, rng);
      if (rep.loss.skipped) ++done.skipped;
      done.boundary_skipped += rep.boundary_skipped;
      ++done.internal[ia.node];
    }
  }
  if (agents.external) {
    const long n = owed("external", fresh.external, agents.external->buffer.size(), batch);
    for (long i = 0; i < n; ++i) {
      const auto b = agents.external->buffer.sample(batch, rng);
      if (external_update(*agents.external, b, rng).skipped) ++done.skipped;
      ++done.external;
    }
  }
  {
    const auto eb = static_cast<std::size_t>(schedule.evaluator_batch_size);
    const long n = owed("evaluator", fresh.evaluator, agents.evaluator_buffer.size(), eb);
    for (long i = 0; i < n; ++i) {
      const auto b = agents.evaluator_buffer.sample(eb, rng);
      if (evaluator_update(*agents.evaluator, b, agents.graph).skipped) ++done.skipped;
      ++done.evaluator;
    }
  }
  return done;
}

EvalSummary evaluate(Environment& env, const Agents& agents, int n_episodes, std::uint64_t seed,
                     bool keep_traces) {
  if (n_episodes <= 0) throw InvalidInput("evaluation needs at least one episode");
  EvalSummary sum;
  sum.episodes = n_episodes;
  sum.node_visits.assign(agents.graph.size(), 0);
  sum.choice_histogram.assign(agents.graph.size(), 0);
  std::mt19937_64 rng(seed);  // unused by greedy choices and deterministic policies
  long checks = 0, correct = 0;
  int successes = 0;
  for (int i = 0; i < n_episodes; ++i) {
    EpisodeTrace tr = run_episode(env, agents, EpisodeOptions{false, 0.0},
                                  seed + static_cast<std::uint64_t>(i), rng);
    sum.mean_return += tr.episode_return;
    sum.mean_penalties += tr.penalties_total;
    if (tr.success) ++successes;
    if (agents.mode != RunMode::kFlat) {
      for (const auto& r : tr.steps) ++sum.node_visits[r.node];
      for (const auto& d : tr.decisions) ++sum.choice_histogram[d.choice];
    }
    checks += tr.selector_checks;
    correct += tr.selector_correct;
    if (keep_traces) sum.traces.push_back(std::move(tr));
  }
  sum.mean_return /= n_episodes;
  sum.mean_penalties /= n_episodes;
  sum.success_rate = static_cast<double>(successes) / n_episodes;
  if (checks > 0) sum.selector_accuracy = static_cast<double>(correct) / static_cast<double>(checks);
  return sum;
}

void use_convex_internals(Agents& agents, const CartStemParams& params) {
  if (agents.mode == RunMode::kFlat) throw InvalidInput("flat runs have no internal agents");
  for (auto& ia : agents.internal) ia = make_convex_internal(ia.node, params);
}

namespace {

std::string node_prefix(const Agents& a, int node) { return "internal/" + a.graph.node(node).name; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Checkpoint make_checkpoint(const Agents& agents, const RunConfig& config, long iteration,
                           const std::map<std::string, std::string>& extra_metadata) {
  Checkpoint ck;
  ck.graph_fingerprint = agents.graph.fingerprint();
  ck.metadata = extra_metadata;
  ck.metadata["env"] = config.env;
  ck.metadata["mode"] = to_string(agents.mode);
  ck.metadata["seed"] = std::to_string(config.seed);
  ck.metadata["iteration"] = std::to_string(iteration);
  std::string kinds;
  for (const auto& ia : agents.internal) {
    if (!kinds.empty()) kinds += ",";
    kinds += ia.kind == InternalKind::kLearned ? "learned" : "convex";
  }
  ck.metadata["internal_kinds"] = kinds;
  if (agents.flat) ck.add(export_sac(*agents.flat, "flat"));
  for (const auto& ia : agents.internal)
    if (ia.kind == InternalKind::kLearned) ck.add(export_sac(*ia.sac, node_prefix(agents, ia.node)));
  if (agents.external) ck.add(export_sac(agents.external->sac, "external"));
  if (agents.evaluator) ck.add(export_evaluator(*agents.evaluator, "evaluator"));
  if (agents.selector) ck.add(export_selector(*agents.selector));
  return ck;
}

void restore_checkpoint(Agents& agents, const Checkpoint& ck) {
  if (ck.graph_fingerprint != agents.graph.fingerprint())
    throw CheckpointError(CheckpointErrc::kFingerprintMismatch,
                          "checkpoint was trained on a different graph");
  try {
    if (agents.flat) import_sac(*agents.flat, ck.tensors, "flat");
    for (auto& ia : agents.internal)
      if (ia.kind == InternalKind::kLearned)
        import_sac(*ia.sac, ck.tensors, node_prefix(agents, ia.node));
    if (agents.external) import_sac(agents.external->sac, ck.tensors, "external");
    if (agents.evaluator) import_evaluator(*agents.evaluator, ck.tensors, "evaluator");
    if (agents.selector && ck.has("selector/input_mean")) import_selector(*agents.selector, ck.tensors);
  } catch (const InvalidInput& e) {
    throw CheckpointError(CheckpointErrc::kMissingTensor, e.what());
  }
}

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  if (const auto problems = validate_run_config(config); !problems.empty())
    throw InvalidInput("config: " + problems.front());
  auto log = [&options](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(config.seed);
  auto env = make_environment(config);
  auto eval_env = make_environment(config, true);

  TrainResult res;
  res.agents = make_agents(config, *env, rng);
  Agents& agents = res.agents;
  if (options.selector_checkpoint) {
    const Checkpoint sc = read_checkpoint(*options.selector_checkpoint, agents.graph.fingerprint());
    agents.selector = make_learned_selector(agents.graph, env->observation_dim(),
                                            config.selector.hidden, rng);
    try {
      import_selector(*agents.selector, sc.tensors);
    } catch (const InvalidInput& e) {
      throw CheckpointError(CheckpointErrc::kMissingTensor, e.what());
    }
  }
  if (config.mode != RunMode::kFlat && config.selector_source == SelectorSource::kLearned &&
      !agents.selector)
    throw InvalidInput("learned routing needs a trained selector (run selector-train first)");

  std::optional<MetricsWriter> metrics;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    write_file_atomic(*options.out_dir / "config.ini", format_run_config(config));
    std::vector<std::string> names;
    for (const auto& n : agents.graph.nodes()) names.push_back(n.name);
    metrics.emplace(*options.out_dir / "metrics.csv", names);
  }

  const ExplorationSchedule schedule{config.training.std_floor_start, config.training.std_floor_end,
                                     config.training.std_floor_iterations};
  const UpdateSchedule updates{config.sac.batch_size, config.evaluator.batch_size,
                               config.training.warmup_steps, config.training.update_every};
  std::map<std::string, long> pending;
  const TrainingConfig& tc = config.training;
  long next_eval = tc.eval_interval;
  long next_ckpt = tc.checkpoint_interval > 0 ? tc.checkpoint_interval : -1;

  auto ckpt_meta = [&](const EvalSummary& e) {
    return std::map<std::string, std::string>{{"eval_return", fmt(e.mean_return)},
                                              {"eval_success_rate", fmt(e.success_rate)},
                                              {"eval_episodes", std::to_string(e.episodes)},
                                              {"eval_seed", std::to_string(tc.eval_seed)}};
  };

  try {
    while (res.iterations < tc.iterations) {
      const std::uint64_t ep_seed = rng();
      const EpisodeOptions eo{true, schedule.floor_at(res.iterations)};
      const EpisodeTrace trace = run_episode(*env, agents, eo, ep_seed, rng);
      res.iterations += static_cast<long>(trace.steps.size());
      ++res.episodes;
      const DispatchCounts fresh = dispatch_training(trace, agents);
      run_updates(agents, fresh, updates, pending, res.iterations, rng);

      MetricsRow row;
      row.iteration = res.iterations;
      row.episode = res.episodes;
      row.mode = to_string(config.mode);
      row.train_return = trace.episode_return;
      row.penalties_total = trace.penalties_total;
      row.choice_histogram.assign(agents.graph.size(), 0);
      for (const auto& d : trace.decisions) ++row.choice_histogram[d.choice];
      if (trace.selector_checks > 0)
        row.selector_accuracy = static_cast<double>(trace.selector_correct) / trace.selector_checks;
      if (!std::isfinite(trace.episode_return))
        throw NonFiniteError("non-finite episode return at iteration " +
                             std::to_string(res.iterations));

      if (res.iterations >= next_eval || res.iterations >= tc.iterations) {
        EvalSummary e = evaluate(*eval_env, agents, tc.eval_episodes, tc.eval_seed);
        row.eval_return = e.mean_return;
        row.success_rate = e.success_rate;
        if (!res.first_success_iteration && e.success_rate >= tc.success_threshold)
          res.first_success_iteration = res.iterations;
        res.eval_iterations.push_back(res.iterations);
        res.evals.push_back(e);
        res.last_eval = e;
        while (next_eval <= res.iterations) next_eval += tc.eval_interval;
        char buf[160];
        std::snprintf(buf, sizeof buf, "iteration %ld eval_return %.4f success %.3f", res.iterations,
                      e.mean_return, e.success_rate);
        log(buf);
      }
      if (tc.record_wall_time)
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (metrics) metrics->append(row);
      if (options.out_dir && next_ckpt > 0 && res.iterations >= next_ckpt) {
        write_checkpoint(*options.out_dir / ("checkpoint_" + std::to_string(res.iterations) + ".cgrl"),
                         make_checkpoint(agents, config, res.iterations, ckpt_meta(res.last_eval)));
        while (next_ckpt <= res.iterations) next_ckpt += tc.checkpoint_interval;
      }
    }
  } catch (const NonFiniteError&) {
    if (options.out_dir)
      write_checkpoint(*options.out_dir / "halt_checkpoint.cgrl",
                       make_checkpoint(agents, config, res.iterations, {{"halted", "non-finite"}}));
    throw;
  }
  if (options.out_dir)
    write_checkpoint(*options.out_dir / "checkpoint.cgrl",
                     make_checkpoint(agents, config, res.iterations, ckpt_meta(res.last_eval)));
  return res;
}

}  // namespace cgrl
