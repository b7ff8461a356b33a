#include "cgrl/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "cgrl/checkpoint.hpp"
#include "cgrl/errors.hpp"
#include "cgrl/orchestrator.hpp"
#include "cgrl/plot.hpp"
#include "cgrl/run_config.hpp"
#include "cgrl/selector.hpp"

namespace cgrl {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string checkpoint;
  std::string env;
  std::string mode;
  std::string metrics;
  int episodes = 200;
  double window = 0.025;
  bool quiet = false;
};

RunConfig resolve_config(const Flags& f) {
  RunConfig c = f.config.empty() ? default_run_config(f.env.empty() ? "cartstem" : f.env)
                                 : load_run_config(f.config);
  if (!f.env.empty() && f.env != c.env)
    throw InvalidInput("--env " + f.env + " disagrees with the config's env " + c.env);
  if (!f.mode.empty()) c.mode = parse_run_mode(f.mode);
  if (f.seed) c.seed = *f.seed;
  return c;
}

fs::path out_dir(const Flags& f, const RunConfig& c, const std::string& stage) {
  if (!f.out.empty()) return f.out;
  const char* env_dir = std::getenv("CGRL_OUT_DIR");
  const fs::path base = env_dir && *env_dir ? fs::path(env_dir) : fs::path("runs");
  return base / (c.env + "-" + stage + "-" + std::to_string(c.seed));
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void check_config(const RunConfig& c) {
  const auto problems = validate_run_config(c);
  if (!problems.empty()) throw InvalidInput(problems.front());
}

int cmd_validate(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve_config(f);
  const auto problems = validate_run_config(c);
  if (problems.empty()) {
    const ConfigGraph g = build_graph(c);
    out << "ok env=" << c.env << " mode=" << to_string(c.mode) << " nodes=" << g.size()
        << " fingerprint=" << g.fingerprint() << "\n";
    return 0;
  }
  for (const auto& p : problems) out << "violation: " << p << "\n";
  throw InvalidInput(std::to_string(problems.size()) + " config violation(s), first: " +
                     problems.front());
}

int cmd_selector_train(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve_config(f);
  check_config(c);
  const fs::path dir = out_dir(f, c, "selector");
  fs::create_directories(dir);
  auto env = make_environment(c);
  const ConfigGraph graph = build_graph(c);
  std::vector<int> label_map;
  for (const auto& n : env->node_names()) label_map.push_back(graph.id_of(n));

  LabelledStateSet data = collect_labelled_states(*env, c.selector.samples, c.seed, label_map);
  data.split_fraction = c.selector.split_fraction;
  save_dataset(dir / "dataset.cgrl", data, graph.fingerprint());

  std::mt19937_64 rng(c.seed);
  SelectorModel model = make_learned_selector(graph, env->observation_dim(), c.selector.hidden, rng);
  SelectorTrainConfig tc = c.selector.train;
  tc.seed = c.seed;
  const SelectorTrainResult r = selector_train(std::move(model), data, tc);

  Checkpoint ck;
  ck.graph_fingerprint = graph.fingerprint();
  ck.metadata = {{"env", c.env},
                 {"seed", std::to_string(c.seed)},
                 {"train_accuracy", fmt(r.train_accuracy)},
                 {"validation_accuracy", fmt(r.validation_accuracy)}};
  ck.add(export_selector(r.model));
  write_checkpoint(dir / "selector.cgrl", ck);
  out << "samples " << data.states.size() << " train_accuracy " << fmt(r.train_accuracy)
      << " validation_accuracy " << fmt(r.validation_accuracy) << " selector "
      << (dir / "selector.cgrl").string() << "\n";
  return 0;
}

int cmd_train(const Flags& f, std::ostream& out) {
  const RunConfig c = resolve_config(f);
  check_config(c);
  TrainOptions opts;
  opts.out_dir = out_dir(f, c, to_string(c.mode));
  if (!f.checkpoint.empty()) opts.selector_checkpoint = f.checkpoint;
  if (!f.quiet) opts.log = [&out](const std::string& m) { out << m << "\n" << std::flush; };
  const TrainResult r = train(c, opts);
  out << "done iterations " << r.iterations << " episodes " << r.episodes << " eval_return "
      << fmt(r.last_eval.mean_return) << " success_rate " << fmt(r.last_eval.success_rate)
      << " first_success_iteration "
      << (r.first_success_iteration ? std::to_string(*r.first_success_iteration) : "none")
      << " out " << opts.out_dir->string() << "\n";
  return 0;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  if (f.checkpoint.empty()) throw InvalidInput("eval needs --checkpoint");
  const Checkpoint ck = read_checkpoint(f.checkpoint);
  Flags g = f;
  if (g.env.empty() && g.config.empty()) g.env = ck.meta("env");
  RunConfig c = resolve_config(g);
  if (c.env != ck.meta("env"))
    throw InvalidInput("checkpoint was trained on " + ck.meta("env") + ", config is " + c.env);
  const RunMode saved = parse_run_mode(ck.meta("mode"));
  if (f.mode.empty()) c.mode = saved;
  if ((saved == RunMode::kFlat) != (c.mode == RunMode::kFlat))
    throw InvalidInput("cannot evaluate a " + to_string(saved) + " checkpoint in " +
                       to_string(c.mode) + " mode");
  check_config(c);

  std::mt19937_64 rng(c.seed);
  auto env = make_environment(c, true);
  Agents agents = make_agents(c, *env, rng);
  if (ck.has("selector/input_mean"))
    agents.selector = make_learned_selector(agents.graph, env->observation_dim(), c.selector.hidden, rng);
  restore_checkpoint(agents, ck);
  const std::uint64_t seed = f.seed ? *f.seed : c.training.eval_seed;
  const EvalSummary e = evaluate(*env, agents, f.episodes, seed);
  std::vector<std::string> names;
  for (const auto& n : agents.graph.nodes()) names.push_back(n.name);
  out << "episodes " << e.episodes << "\nmean_return " << fmt(e.mean_return) << "\nsuccess_rate "
      << fmt(e.success_rate) << "\nmean_penalties " << fmt(e.mean_penalties) << "\nnodes ";
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << "\nnode_visits " << join(e.node_visits) << "\nchoice_histogram " << join(e.choice_histogram)
      << "\n";
  if (e.selector_accuracy >= 0) out << "selector_accuracy " << fmt(e.selector_accuracy) << "\n";
  return 0;
}

int cmd_plot(const Flags& f, std::ostream& out) {
  if (f.metrics.empty()) throw InvalidInput("plot needs --metrics");
  const fs::path dir = f.out.empty() ? fs::path(f.metrics).parent_path() : fs::path(f.out);
  if (!dir.empty()) fs::create_directories(dir);
  const fs::path svg = dir / "learning_curve.svg";
  emit_plot(f.metrics, svg, f.window);
  out << "wrote " << svg.string() << "\n";
  return 0;
}

std::string error_code(const std::exception& e) {
  if (const auto* ce = dynamic_cast<const CheckpointError*>(&e)) return std::string(to_string(ce->code()));
  const std::string what = e.what();
  if (what.rfind("config not found", 0) == 0) return "config_not_found";
  if (dynamic_cast<const NonFiniteError*>(&e)) return "non_finite";
  if (dynamic_cast<const OptionUnavailable*>(&e)) return "option_unavailable";
  if (dynamic_cast<const InvalidInput*>(&e)) return "invalid_input";
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return "io";
  return "internal";
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical RL over a graph of configuration spaces", "cgrl"};
  app.require_subcommand(1);
  Flags f;
  std::string seed_text;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "run configuration file");
    sub->add_option("--seed", seed_text, "overrides the config seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--checkpoint", f.checkpoint, "checkpoint to load");
    sub->add_option("--env", f.env, "environment")->check(CLI::IsMember({"cartstem", "rod"}));
    sub->add_option("--mode", f.mode, "run mode")
        ->check(CLI::IsMember({"graph", "flat", "graph-convex"}));
    sub->add_flag("--quiet", f.quiet, "no progress lines");
  };
  auto* validate = app.add_subcommand("validate", "check a configuration and its graph");
  auto* sel = app.add_subcommand("selector-train", "collect labelled states and train the selector");
  auto* tr = app.add_subcommand("train", "train agents; --checkpoint names a selector to load");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* pl = app.add_subcommand("plot", "learning curve from a metrics file");
  for (auto* s : {validate, sel, tr, ev, pl}) common(s);
  ev->add_option("--episodes", f.episodes, "evaluation episodes");
  pl->add_option("--metrics", f.metrics, "metrics.csv to plot");
  pl->add_option("--window", f.window, "smoothing window as a fraction of the rows");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << "\n" << app.help();
    return 2;
  }

  try {
    if (!seed_text.empty()) {
      std::uint64_t v = 0;
      const auto [end, ec] =
          std::from_chars(seed_text.data(), seed_text.data() + seed_text.size(), v);
      if (ec != std::errc{} || end != seed_text.data() + seed_text.size())
        throw InvalidInput("--seed must be a non-negative integer");
      f.seed = v;
    }
    if (validate->parsed()) return cmd_validate(f, out);
    if (sel->parsed()) return cmd_selector_train(f, out);
    if (tr->parsed()) return cmd_train(f, out);
    if (ev->parsed()) return cmd_eval(f, out);
    if (pl->parsed()) return cmd_plot(f, out);
  } catch (const std::exception& e) {
    err << "error: " << error_code(e) << ": " << one_line(e.what()) << "\n";
    return 1;
  }
  return 2;
}

}  // namespace cgrl
