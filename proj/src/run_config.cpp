#include "cgrl/run_config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cgrl/errors.hpp"

namespace cgrl {

namespace pt = boost::property_tree;

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kGraph:
      return "graph";
    case RunMode::kFlat:
      return "flat";
    case RunMode::kGraphConvex:
      return "graph-convex";
  }
  return "graph";
}

RunMode parse_run_mode(const std::string& text) {
  if (text == "graph") return RunMode::kGraph;
  if (text == "flat") return RunMode::kFlat;
  if (text == "graph-convex" || text == "graph_convex") return RunMode::kGraphConvex;
  throw InvalidInput("unknown mode '" + text + "' (graph, flat, graph-convex)");
}

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
  return boost::join(items, sep);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (in.fail() || !(in >> std::ws).eof())
    throw InvalidInput("config: bad value '" + text + "' for " + key);
  return v;
}

std::string selector_to_string(SelectorSource s) {
  return s == SelectorSource::kOracle ? "oracle" : "learned";
}
SelectorSource parse_selector(const std::string& t) {
  if (t == "oracle") return SelectorSource::kOracle;
  if (t == "learned") return SelectorSource::kLearned;
  throw InvalidInput("config: selector must be oracle or learned, got '" + t + "'");
}
std::string external_to_string(ExternalKind k) {
  return k == ExternalKind::kLearned ? "learned" : "expert";
}
ExternalKind parse_external(const std::string& t) {
  if (t == "learned") return ExternalKind::kLearned;
  if (t == "expert") return ExternalKind::kExpert;
  throw InvalidInput("config: external kind must be learned or expert, got '" + t + "'");
}
std::string goal_mode_to_string(GoalMode g) {
  switch (g) {
    case GoalMode::kMixed:
      return "mixed";
    case GoalMode::kContactOnly:
      return "contact";
    case GoalMode::kFreeOnly:
      return "free";
  }
  return "mixed";
}
GoalMode parse_goal_mode(const std::string& t) {
  if (t == "mixed") return GoalMode::kMixed;
  if (t == "contact") return GoalMode::kContactOnly;
  if (t == "free") return GoalMode::kFreeOnly;
  throw InvalidInput("config: eval_goals must be mixed, contact or free, got '" + t + "'");
}

// Reads into fields present in the tree, remembering which keys were seen.
struct Reader {
  const pt::ptree& tree;
  std::set<std::string> seen;

  const std::string* find(const std::string& section, const std::string& key) {
    const auto sec = tree.find(section);
    if (sec == tree.not_found()) return nullptr;
    const auto it = sec->second.find(key);
    if (it == sec->second.not_found()) return nullptr;
    seen.insert(section + "." + key);
    return &it->second.data();
  }

  template <class T>
  void num(const std::string& s, const std::string& k, T& v) {
    if (const auto* t = find(s, k)) v = parse_number<T>(s + "." + k, *t);
  }
  void flag(const std::string& s, const std::string& k, bool& v) {
    if (const auto* t = find(s, k)) {
      if (*t == "true" || *t == "1") v = true;
      else if (*t == "false" || *t == "0") v = false;
      else throw InvalidInput("config: bad boolean '" + *t + "' for " + s + "." + k);
    }
  }
  void text(const std::string& s, const std::string& k, std::string& v) {
    if (const auto* t = find(s, k)) v = *t;
  }
  void ints(const std::string& s, const std::string& k, std::vector<int>& v) {
    if (const auto* t = find(s, k)) {
      v.clear();
      for (const auto& p : split_list(*t)) v.push_back(parse_number<int>(s + "." + k, p));
    }
  }
  void angle(const std::string& s, const std::string& k, double& radians) {
    if (const auto* t = find(s, k)) radians = degrees(parse_number<double>(s + "." + k, *t));
  }
  template <class E, class From>
  void choice(const std::string& s, const std::string& k, E& v, From from) {
    if (const auto* t = find(s, k)) v = from(*t);
  }
};

struct Writer {
  pt::ptree tree;

  static std::string fmt(double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
  }
  void put(const std::string& s, const std::string& k, const std::string& v) {
    tree.put(pt::ptree::path_type(s + "/" + k, '/'), v);
  }
  template <class T>
  void num(const std::string& s, const std::string& k, T& v) {
    if constexpr (std::is_floating_point_v<T>) put(s, k, fmt(v));
    else put(s, k, std::to_string(v));
  }
  void flag(const std::string& s, const std::string& k, bool& v) { put(s, k, v ? "true" : "false"); }
  void text(const std::string& s, const std::string& k, std::string& v) { put(s, k, v); }
  void ints(const std::string& s, const std::string& k, std::vector<int>& v) {
    std::vector<std::string> parts;
    for (int x : v) parts.push_back(std::to_string(x));
    put(s, k, join(parts));
  }
  void angle(const std::string& s, const std::string& k, double& radians) {
    put(s, k, fmt(radians * 180.0 / std::numbers::pi));
  }
  template <class E, class From>
  void choice(const std::string& s, const std::string& k, E& v, From) {
    put(s, k, stringify(v));
  }
  static std::string stringify(RunMode m) { return to_string(m); }
  static std::string stringify(SelectorSource m) { return selector_to_string(m); }
  static std::string stringify(ExternalKind m) { return external_to_string(m); }
  static std::string stringify(GoalMode m) { return goal_mode_to_string(m); }
};

// Single field table shared by parsing and formatting.
template <class IO>
void visit(IO& io, RunConfig& c) {
  io.text("run", "env", c.env);
  io.choice("run", "mode", c.mode, parse_run_mode);
  io.num("run", "seed", c.seed);
  io.choice("run", "selector", c.selector_source, parse_selector);

  if (c.env == "cartstem") {
    CartStemParams& p = c.cartstem;
    io.num("env", "x_min", p.x_min);
    io.num("env", "x_max", p.x_max);
    io.num("env", "v_max", p.v_max);
    io.num("env", "contact_height", p.contact_height);
    io.num("env", "beam_height", p.beam_height);
    io.num("env", "obstacle_lx", p.obstacle_lx);
    io.num("env", "obstacle_lz", p.obstacle_lz);
    io.num("env", "left_centre_min", p.left_centre_min);
    io.num("env", "left_centre_max", p.left_centre_max);
    io.num("env", "right_centre_min", p.right_centre_min);
    io.num("env", "right_centre_max", p.right_centre_max);
    io.num("env", "contact_goal_probability", p.contact_goal_probability);
    io.num("env", "horizon", p.horizon);
    io.num("env", "success_tolerance", p.success_tolerance);
  } else {
    RodParams& p = c.rod;
    io.angle("env", "step_max_deg", p.step_max);
    io.angle("env", "articulation_max_deg", p.articulation_max);
    io.angle("env", "goal_min_deg", p.goal_min);
    io.angle("env", "goal_max_deg", p.goal_max);
    io.num("env", "goal_sign", p.goal_sign);
    io.num("env", "horizon", p.horizon);
    io.angle("env", "success_tolerance_deg", p.success_tolerance);
    io.angle("env", "grasp_window_deg", p.grasp_window);
    io.num("env", "success_bonus", p.success_bonus);
  }

  io.ints("sac", "hidden", c.sac.hidden);
  io.num("sac", "gamma", c.sac.gamma);
  io.num("sac", "polyak", c.sac.polyak);
  io.num("sac", "alpha", c.sac.alpha);
  io.num("sac", "learning_rate", c.sac.learning_rate);
  io.num("sac", "batch_size", c.sac.batch_size);
  io.num("sac", "buffer_capacity", c.sac.buffer_capacity);

  io.choice("external", "kind", c.external_kind, parse_external);
  io.num("external", "t_max", c.option_t_max);

  io.ints("evaluator", "hidden", c.evaluator.hidden);
  io.num("evaluator", "gamma", c.evaluator.gamma);
  io.num("evaluator", "polyak", c.evaluator.polyak);
  io.num("evaluator", "learning_rate", c.evaluator.learning_rate);
  io.num("evaluator", "temperature", c.evaluator.temperature);
  io.num("evaluator", "batch_size", c.evaluator.batch_size);
  io.num("evaluator", "buffer_capacity", c.evaluator.buffer_capacity);

  io.num("penalty", "internal", c.penalty_internal);
  io.num("penalty", "external", c.penalty_external);

  TrainingConfig& t = c.training;
  io.num("training", "iterations", t.iterations);
  io.num("training", "eval_interval", t.eval_interval);
  io.num("training", "eval_episodes", t.eval_episodes);
  io.num("training", "eval_seed", t.eval_seed);
  io.num("training", "checkpoint_interval", t.checkpoint_interval);
  io.num("training", "warmup_steps", t.warmup_steps);
  io.num("training", "update_every", t.update_every);
  io.num("training", "success_threshold", t.success_threshold);
  io.num("training", "std_floor_start", t.std_floor_start);
  io.num("training", "std_floor_end", t.std_floor_end);
  io.num("training", "std_floor_iterations", t.std_floor_iterations);
  if (c.env == "cartstem") io.choice("training", "eval_goals", t.eval_goal_mode, parse_goal_mode);
  io.flag("training", "record_wall_time", t.record_wall_time);

  io.num("selector", "samples", c.selector.samples);
  io.ints("selector", "hidden", c.selector.hidden);
  io.num("selector", "epochs", c.selector.train.epochs);
  io.num("selector", "batch_size", c.selector.train.batch_size);
  io.num("selector", "learning_rate", c.selector.train.learning_rate);
  io.num("selector", "split_fraction", c.selector.split_fraction);
}

}  // namespace

RunConfig default_run_config(const std::string& env) {
  RunConfig c;
  c.env = env;
  if (env == "cartstem") {
    c.graph.nodes = {"LEFT", "FREE", "RIGHT"};
    c.graph.edges = {{"LEFT", "FREE"}, {"FREE", "RIGHT"}};
    c.external_kind = ExternalKind::kLearned;
    c.option_t_max = 15;
    c.penalty_external = 0.0;
  } else if (env == "rod") {
    c.graph.nodes = {"FREE", "HOLD"};
    c.graph.edges = {{"FREE", "HOLD"}};
    c.graph.gathered = {"FREE"};
    c.external_kind = ExternalKind::kExpert;
    c.option_t_max = 20;
    c.penalty_external = -0.05;
    c.sac.alpha = 0.01;
    c.training.eval_goal_mode = GoalMode::kMixed;
  } else {
    throw InvalidInput("unknown env '" + env + "' (cartstem, rod)");
  }
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidInput(std::string("config: ") + e.message() + " at line " +
                       std::to_string(e.line()));
  }
  std::string env = "cartstem";
  if (auto r = tree.get_child_optional("run"))
    if (auto e = r->get_optional<std::string>("env")) env = *e;
  RunConfig c = default_run_config(env);

  Reader reader{tree, {}};
  visit(reader, c);

  if (auto g = tree.get_child_optional("graph")) {
    for (const auto& [key, value] : *g) {
      const std::string& v = value.data();
      if (key == "nodes") {
        c.graph.nodes = split_list(v);
      } else if (key == "edges") {
        c.graph.edges.clear();
        for (const auto& e : split_list(v)) {
          const auto dash = e.find('-');
          if (dash == std::string::npos)
            throw InvalidInput("config: edge '" + e + "' is not of the form A-B");
          c.graph.edges.emplace_back(boost::trim_copy(e.substr(0, dash)),
                                     boost::trim_copy(e.substr(dash + 1)));
        }
      } else if (key == "gathered") {
        c.graph.gathered = split_list(v);
      } else if (key.rfind("identifier.", 0) == 0) {
        std::vector<double> h;
        std::string flat = v;
        boost::replace_all(flat, ",", " ");
        std::istringstream in(flat);
        double x;
        while (in >> x) h.push_back(x);
        if (!in.eof()) throw InvalidInput("config: bad identifier for " + key);
        c.graph.identifiers[key.substr(11)] = h;
      } else {
        throw InvalidInput("config: unknown key graph." + key);
      }
    }
  }

  for (const auto& [section, body] : tree) {
    if (section == "graph") continue;
    if (body.empty() && !body.data().empty())
      throw InvalidInput("config: key '" + section + "' outside any section");
    for (const auto& kv : body)
      if (!reader.seen.count(section + "." + kv.first))
        throw InvalidInput("config: unknown key " + section + "." + kv.first);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config not found: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string format_run_config(const RunConfig& config) {
  RunConfig c = config;
  Writer w;
  visit(w, c);
  w.put("graph", "nodes", join(c.graph.nodes));
  std::vector<std::string> edges;
  for (const auto& [a, b] : c.graph.edges) edges.push_back(a + "-" + b);
  w.put("graph", "edges", join(edges));
  w.put("graph", "gathered", join(c.graph.gathered));
  for (const auto& [name, h] : c.graph.identifiers) {
    std::vector<std::string> parts;
    for (double x : h) parts.push_back(Writer::fmt(x));
    w.put("graph", "identifier." + name, join(parts, " "));
  }
  std::ostringstream out;
  pt::write_ini(out, w.tree);
  return out.str();
}

std::vector<std::string> validate_run_config(const RunConfig& c) {
  std::vector<std::string> v;
  auto need = [&v](bool ok, const std::string& msg) {
    if (!ok) v.push_back(msg);
  };
  need(c.env == "cartstem" || c.env == "rod", "run.env must be cartstem or rod");
  need(c.mode != RunMode::kGraphConvex || c.env == "cartstem",
       "graph-convex mode needs the cartstem environment");

  if (c.env == "cartstem") {
    const CartStemParams& p = c.cartstem;
    need(p.x_min < p.x_max, "env.x_min must be below env.x_max");
    need(p.v_max > 0, "env.v_max must be positive");
    need(p.contact_height > 0 && p.beam_height > p.contact_height,
         "env.beam_height must exceed env.contact_height > 0");
    need(p.obstacle_lx > 0 && p.obstacle_lz > 0, "obstacle sizes must be positive");
    need(p.left_centre_min <= p.left_centre_max && p.right_centre_min <= p.right_centre_max,
         "obstacle centre ranges must be ordered");
    need(p.left_centre_max + p.obstacle_lx / 2 < p.right_centre_min - p.obstacle_lx / 2,
         "obstacles may overlap");
    const double d = contact_clearance(p.obstacle_lx, p.obstacle_lz);
    need(p.x_min < p.left_centre_min + d && p.right_centre_max - d < p.x_max,
         "contact regions fall outside the workspace");
    need(p.contact_goal_probability >= 0 && p.contact_goal_probability <= 1,
         "env.contact_goal_probability must lie in [0, 1]");
    need(p.horizon >= 1, "env.horizon must be at least 1");
    need(p.success_tolerance > 0, "env.success_tolerance must be positive");
  } else if (c.env == "rod") {
    const RodParams& p = c.rod;
    need(p.step_max > 0 && p.articulation_max > 0, "rod step and articulation limits must be positive");
    need(p.goal_min > 0 && p.goal_min <= p.goal_max, "rod goal range must be positive and ordered");
    need(p.goal_sign == 1.0 || p.goal_sign == -1.0, "env.goal_sign must be 1 or -1");
    need(p.horizon >= 1, "env.horizon must be at least 1");
    need(p.success_tolerance > 0, "env.success_tolerance_deg must be positive");
    need(p.grasp_window >= 0, "env.grasp_window_deg must be non-negative");
    need(p.success_bonus >= 0, "env.success_bonus must be non-negative");
  }

  auto check_net = [&need](const std::vector<int>& hidden, const std::string& where) {
    for (int h : hidden) need(h > 0, where + ".hidden entries must be positive");
  };
  check_net(c.sac.hidden, "sac");
  need(c.sac.gamma >= 0 && c.sac.gamma < 1, "sac.gamma must lie in [0, 1)");
  need(c.sac.polyak >= 0 && c.sac.polyak <= 1, "sac.polyak must lie in [0, 1]");
  need(c.sac.alpha >= 0, "sac.alpha must be non-negative");
  need(c.sac.learning_rate > 0, "sac.learning_rate must be positive");
  need(c.sac.batch_size >= 1, "sac.batch_size must be at least 1");
  need(c.sac.buffer_capacity >= static_cast<std::size_t>(std::max(1, c.sac.batch_size)),
       "sac.buffer_capacity must hold a batch");
  need(c.option_t_max >= 1, "external.t_max must be at least 1");
  need(c.external_kind != ExternalKind::kExpert || c.env == "rod",
       "expert options are only provided by the rod environment");

  check_net(c.evaluator.hidden, "evaluator");
  need(c.evaluator.gamma >= 0 && c.evaluator.gamma < 1, "evaluator.gamma must lie in [0, 1)");
  need(c.evaluator.polyak >= 0 && c.evaluator.polyak <= 1, "evaluator.polyak must lie in [0, 1]");
  need(c.evaluator.learning_rate > 0, "evaluator.learning_rate must be positive");
  need(c.evaluator.temperature > 0, "evaluator.temperature must be positive");
  need(c.evaluator.batch_size >= 1, "evaluator.batch_size must be at least 1");
  need(c.evaluator.buffer_capacity >= static_cast<std::size_t>(std::max(1, c.evaluator.batch_size)),
       "evaluator.buffer_capacity must hold a batch");
  need(std::isfinite(c.penalty_internal) && std::isfinite(c.penalty_external),
       "penalties must be finite");

  const TrainingConfig& t = c.training;
  need(t.iterations > 0, "training.iterations must be positive");
  need(t.eval_interval > 0, "training.eval_interval must be positive");
  need(t.eval_episodes > 0, "training.eval_episodes must be positive");
  need(t.checkpoint_interval >= 0, "training.checkpoint_interval must be non-negative");
  need(t.warmup_steps >= 0, "training.warmup_steps must be non-negative");
  need(t.update_every >= 1, "training.update_every must be at least 1");
  need(t.success_threshold > 0 && t.success_threshold <= 1,
       "training.success_threshold must lie in (0, 1]");
  need(t.std_floor_start >= 0 && t.std_floor_end >= 0, "evaluator std floors must be non-negative");
  need(t.std_floor_iterations >= 0, "training.std_floor_iterations must be non-negative");

  check_net(c.selector.hidden, "selector");
  need(c.selector.samples >= 10, "selector.samples must be at least 10");
  need(c.selector.split_fraction > 0 && c.selector.split_fraction < 1,
       "selector.split_fraction must lie in (0, 1)");
  need(c.selector.train.epochs >= 1 && c.selector.train.batch_size >= 1 &&
           c.selector.train.learning_rate > 0,
       "selector training settings must be positive");

  // graph
  const GraphSpec& g = c.graph;
  need(!g.nodes.empty(), "graph.nodes is empty");
  std::set<std::string> names(g.nodes.begin(), g.nodes.end());
  bool refs_ok = true;
  for (const auto& [a, b] : g.edges)
    for (const auto& n : {a, b})
      if (!names.count(n)) {
        v.push_back("graph edge references unknown node " + n);
        refs_ok = false;
      }
  for (const auto& n : g.gathered)
    if (!names.count(n)) {
      v.push_back("graph.gathered references unknown node " + n);
      refs_ok = false;
    }
  for (const auto& [n, h] : g.identifiers) {
    if (!names.count(n)) {
      v.push_back("graph identifier for unknown node " + n);
      refs_ok = false;
    }
    (void)h;
  }
  if (!g.identifiers.empty() && g.identifiers.size() != g.nodes.size()) {
    v.push_back("graph identifiers must be given for every node or none");
    refs_ok = false;
  }
  if (refs_ok && !g.nodes.empty()) {
    try {
      for (const auto& msg : build_graph(c).validate()) v.push_back("graph: " + msg);
    } catch (const InvalidInput& e) {
      v.push_back(std::string("graph: ") + e.what());
    }
  }
  if (c.env == "cartstem" || c.env == "rod") {
    const std::vector<std::string> env_nodes =
        c.env == "cartstem" ? std::vector<std::string>{"LEFT", "FREE", "RIGHT"}
                            : std::vector<std::string>{"FREE", "HOLD"};
    for (const auto& n : env_nodes)
      need(names.count(n) == 1, "graph lacks environment node " + n);
    need(names.size() == env_nodes.size(), "graph nodes must match the environment's configurations");
  }
  return v;
}

ConfigGraph build_graph(const RunConfig& config) {
  const GraphSpec& g = config.graph;
  ConfigGraph graph;
  if (g.identifiers.empty()) {
    graph = ConfigGraph::with_one_hot_identifiers(g.nodes, g.gathered);
  } else {
    std::vector<ConfigSpace> nodes;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto it = g.identifiers.find(g.nodes[i]);
      if (it == g.identifiers.end())
        throw InvalidInput("no identifier for node " + g.nodes[i]);
      ConfigSpace s;
      s.id = static_cast<int>(i);
      s.name = g.nodes[i];
      s.identifier = Eigen::Map<const Eigen::VectorXd>(it->second.data(),
                                                       static_cast<Eigen::Index>(it->second.size()));
      s.is_gathered = std::find(g.gathered.begin(), g.gathered.end(), g.nodes[i]) != g.gathered.end();
      nodes.push_back(std::move(s));
    }
    graph = ConfigGraph(std::move(nodes));
  }
  for (const auto& [a, b] : g.edges) graph.add_edge(a, b);
  return graph;
}

}  // namespace cgrl
