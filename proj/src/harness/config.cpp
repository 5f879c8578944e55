#include "margop/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "margop/harness/csv.hpp"

namespace margop::harness {

namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config field '" + key + "': " + why);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) fail(key, "expected a number, got '" + v + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) fail(key, "expected an integer, got '" + v + "'");
  return out;
}

int parse_int32(const std::string& key, const std::string& v) {
  long long x = parse_int(key, v);
  if (x < -2147483647LL || x > 2147483647LL) fail(key, "integer out of range");
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) fail(key, "expected an unsigned integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(key, "expected true/false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

OperatorKind parse_operator(const std::string& key, const std::string& v) {
  if (v == "one_step") return OperatorKind::kOneStep;
  if (v == "retrace") return OperatorKind::kRetrace;
  if (v == "marginalized_exact") return OperatorKind::kMarginalizedExact;
  if (v == "marginalized_estimated") return OperatorKind::kMarginalizedEstimated;
  fail(key, "unknown operator '" + v + "'");
}

std::string join_ints(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

}  // namespace

std::string operator_name(OperatorKind op) {
  switch (op) {
    case OperatorKind::kOneStep: return "one_step";
    case OperatorKind::kRetrace: return "retrace";
    case OperatorKind::kMarginalizedExact: return "marginalized_exact";
    case OperatorKind::kMarginalizedEstimated: return "marginalized_estimated";
  }
  return "unknown";
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "environment") {
    if (v == "chain") c.environment = EnvironmentKind::kChain;
    else if (v == "openworld") c.environment = EnvironmentKind::kOpenWorld;
    else fail(key, "expected chain or openworld, got '" + v + "'");
  } else if (key == "chain.n_actions") c.chain.n_actions = parse_int32(key, v);
  else if (key == "chain.horizon") c.chain.horizon = parse_int32(key, v);
  else if (key == "chain.off_policy_level") c.chain.off_policy_level = parse_double(key, v);
  else if (key == "chain.noise_std") c.chain.noise_std = parse_double(key, v);
  else if (key == "chain.optimal_action") c.chain.optimal_action = parse_int32(key, v);
  else if (key == "chain.discount") c.chain.discount = parse_double(key, v);
  else if (key == "openworld.side") c.openworld.side = parse_int32(key, v);
  else if (key == "openworld.discount") c.openworld.discount = parse_double(key, v);
  else if (key == "operators" || key == "operator") {
    c.operators.clear();
    for (const auto& s : split(v, ',')) c.operators.push_back(parse_operator(key, s));
    if (c.operators.empty()) fail(key, "no operator given");
  } else if (key == "retrace.lambda") c.retrace_lambda = parse_double(key, v);
  else if (key == "retrace.cbar") c.retrace_cbar = parse_double(key, v);
  else if (key == "weights.exact") {
    if (v == "trace") c.exact_weights = ExactWeights::kTrace;
    else if (v == "importance") c.exact_weights = ExactWeights::kImportance;
    else fail(key, "expected trace or importance, got '" + v + "'");
  } else if (key == "weights.estimator") {
    if (v == "alg2" || v == "tabular") c.estimator = WeightEstimatorKind::kTabular;
    else if (v == "gda") c.estimator = WeightEstimatorKind::kGda;
    else fail(key, "expected alg2 or gda, got '" + v + "'");
  } else if (key == "weights.starts") {
    c.weight_starts.clear();
    for (const auto& s : split(v, ';')) {
      auto parts = split(s, ':');
      if (parts.size() != 2) fail(key, "expected state:action pairs separated by ';'");
      c.weight_starts.push_back({parse_int32(key, parts[0]), parse_int32(key, parts[1])});
    }
  } else if (key == "alg2.alpha") c.tabular.alpha = parse_double(key, v);
  else if (key == "alg2.schedule") {
    if (v == "harmonic") c.tabular.harmonic = true;
    else if (v == "constant") c.tabular.harmonic = false;
    else fail(key, "expected harmonic or constant, got '" + v + "'");
  } else if (key == "alg2.normalization") {
    if (v == "estimated") c.tabular.exact_normalization = false;
    else if (v == "exact") c.tabular.exact_normalization = true;
    else fail(key, "expected estimated or exact, got '" + v + "'");
  } else if (key == "gda.lr_w") c.gda.lr_w = parse_double(key, v);
  else if (key == "gda.lr_q") c.gda.lr_q = parse_double(key, v);
  else if (key == "gda.steps") c.gda.steps = parse_int32(key, v);
  else if (key == "gda.refresh") c.gda.refresh = parse_int32(key, v);
  else if (key == "n_iterations") c.n_iterations = parse_int32(key, v);
  else if (key == "n_seeds") c.n_seeds = parse_int32(key, v);
  else if (key == "q_step_size") c.q_step_size = parse_double(key, v);
  else if (key == "metric") {
    if (v == "per_action_sum") c.metric = MetricKind::kPerActionSum;
    else if (v == "relative_norm") c.metric = MetricKind::kRelativeNorm;
    else fail(key, "expected per_action_sum or relative_norm, got '" + v + "'");
  } else if (key == "targets") {
    if (v == "sampled") c.targets = TargetMode::kSampled;
    else if (v == "expected") c.targets = TargetMode::kExpected;
    else fail(key, "expected sampled or expected, got '" + v + "'");
  } else if (key == "max_steps") c.max_steps = parse_int32(key, v);
  else if (key == "target_window") c.target_window = parse_int32(key, v);
  else if (key == "record_every") c.record_every = parse_int32(key, v);
  else if (key == "threads") c.threads = parse_int32(key, v);
  else if (key == "seed") c.seed = parse_u64(key, v);
  else if (key == "output") c.output = v;
  else if (key == "checkpoints") {
    c.checkpoints.clear();
    for (const auto& s : split(v, ',')) c.checkpoints.push_back(parse_int32(key, s));
  } else if (key == "pi.mode") {
    if (v == "soft") c.pi.mode = PolicyIterationMode::kSoft;
    else if (v == "hard") c.pi.mode = PolicyIterationMode::kHard;
    else fail(key, "expected soft or hard, got '" + v + "'");
  } else if (key == "pi.iterations") c.pi.iterations = parse_int32(key, v);
  else if (key == "pi.alpha") c.pi.alpha = parse_double(key, v);
  else if (key == "pi.eval_iterations") c.pi.eval_iterations = parse_int32(key, v);
  else if (key == "pi.episodes") c.pi.episodes = parse_int32(key, v);
  else if (key == "pi.exact_q") c.pi.exact_q = parse_bool(key, v);
  else fail(key, "unknown key");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    try {
      set_config_value(c, key, line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

double ExperimentConfig::discount() const {
  return environment == EnvironmentKind::kChain ? chain.discount : openworld.discount;
}

Benchmark ExperimentConfig::build_benchmark() const {
  return environment == EnvironmentKind::kChain ? build_chain(chain) : build_open_world(openworld);
}

void ExperimentConfig::validate() const {
  if (n_seeds < 1) fail("n_seeds", "must be >= 1");
  if (n_iterations < 0) fail("n_iterations", "must be >= 0");
  if (!(q_step_size > 0.0 && q_step_size <= 1.0)) fail("q_step_size", "must lie in (0,1]");
  if (operators.empty()) fail("operators", "no operator given");
  if (!(retrace_lambda >= 0.0 && retrace_lambda <= 1.0)) fail("retrace.lambda", "must lie in [0,1]");
  if (!(retrace_cbar >= 0.0)) fail("retrace.cbar", "must be >= 0");
  if (!(tabular.alpha > 0.0 && tabular.alpha <= 1.0)) fail("alg2.alpha", "must lie in (0,1]");
  if (!(gda.lr_w > 0.0)) fail("gda.lr_w", "must be > 0");
  if (!(gda.lr_q > 0.0)) fail("gda.lr_q", "must be > 0");
  if (gda.steps < 1) fail("gda.steps", "must be >= 1");
  if (gda.refresh < 1) fail("gda.refresh", "must be >= 1");
  if (max_steps < 0) fail("max_steps", "must be >= 0");
  if (target_window < 0) fail("target_window", "must be >= 0");
  if (record_every < 1) fail("record_every", "must be >= 1");
  if (threads < 0) fail("threads", "must be >= 0");
  for (int k : checkpoints)
    if (k < 0) fail("checkpoints", "must be >= 0");
  if (pi.iterations < 0) fail("pi.iterations", "must be >= 0");
  if (!(pi.alpha > 0.0 && pi.alpha <= 1.0)) fail("pi.alpha", "must lie in (0,1]");
  if (pi.eval_iterations < 0) fail("pi.eval_iterations", "must be >= 0");
  if (pi.episodes < 1) fail("pi.episodes", "must be >= 1");
  if (output.empty()) fail("output", "must not be empty");
  // environment fields carry their own names
  try {
    if (environment == EnvironmentKind::kChain) chain.validate();
    else openworld.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config field ") + e.what());
  }
  Benchmark b = build_benchmark();
  for (const SaPair& s : weight_starts) {
    if (s.state < 0 || s.state >= b.mdp.n_states() || s.action < 0 || s.action >= b.mdp.n_actions()) {
      fail("weights.starts", "pair out of range");
    }
  }
}

std::string dump_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "environment = " << (c.environment == EnvironmentKind::kChain ? "chain" : "openworld") << '\n';
  o << "chain.n_actions = " << c.chain.n_actions << '\n';
  o << "chain.horizon = " << c.chain.horizon << '\n';
  o << "chain.off_policy_level = " << format_double(c.chain.off_policy_level) << '\n';
  o << "chain.noise_std = " << format_double(c.chain.noise_std) << '\n';
  o << "chain.optimal_action = " << c.chain.optimal_action << '\n';
  o << "chain.discount = " << format_double(c.chain.discount) << '\n';
  o << "openworld.side = " << c.openworld.side << '\n';
  o << "openworld.discount = " << format_double(c.openworld.discount) << '\n';
  o << "operators = ";
  for (std::size_t i = 0; i < c.operators.size(); ++i) o << (i ? "," : "") << operator_name(c.operators[i]);
  o << '\n';
  o << "retrace.lambda = " << format_double(c.retrace_lambda) << '\n';
  o << "retrace.cbar = " << format_double(c.retrace_cbar) << '\n';
  o << "weights.exact = " << (c.exact_weights == ExactWeights::kTrace ? "trace" : "importance") << '\n';
  o << "weights.estimator = " << (c.estimator == WeightEstimatorKind::kTabular ? "alg2" : "gda") << '\n';
  o << "weights.starts = ";
  for (std::size_t i = 0; i < c.weight_starts.size(); ++i)
    o << (i ? ";" : "") << c.weight_starts[i].state << ':' << c.weight_starts[i].action;
  o << '\n';
  o << "alg2.alpha = " << format_double(c.tabular.alpha) << '\n';
  o << "alg2.schedule = " << (c.tabular.harmonic ? "harmonic" : "constant") << '\n';
  o << "alg2.normalization = " << (c.tabular.exact_normalization ? "exact" : "estimated") << '\n';
  o << "gda.lr_w = " << format_double(c.gda.lr_w) << '\n';
  o << "gda.lr_q = " << format_double(c.gda.lr_q) << '\n';
  o << "gda.steps = " << c.gda.steps << '\n';
  o << "gda.refresh = " << c.gda.refresh << '\n';
  o << "n_iterations = " << c.n_iterations << '\n';
  o << "n_seeds = " << c.n_seeds << '\n';
  o << "q_step_size = " << format_double(c.q_step_size) << '\n';
  o << "metric = " << (c.metric == MetricKind::kPerActionSum ? "per_action_sum" : "relative_norm") << '\n';
  o << "targets = " << (c.targets == TargetMode::kSampled ? "sampled" : "expected") << '\n';
  o << "max_steps = " << c.max_steps << '\n';
  o << "target_window = " << c.target_window << '\n';
  o << "record_every = " << c.record_every << '\n';
  o << "threads = " << c.threads << '\n';
  o << "seed = " << c.seed << '\n';
  o << "output = " << c.output << '\n';
  o << "checkpoints = " << join_ints(c.checkpoints) << '\n';
  o << "pi.mode = " << (c.pi.mode == PolicyIterationMode::kSoft ? "soft" : "hard") << '\n';
  o << "pi.iterations = " << c.pi.iterations << '\n';
  o << "pi.alpha = " << format_double(c.pi.alpha) << '\n';
  o << "pi.eval_iterations = " << c.pi.eval_iterations << '\n';
  o << "pi.episodes = " << c.pi.episodes << '\n';
  o << "pi.exact_q = " << (c.pi.exact_q ? "true" : "false") << '\n';
  return o.str();
}

}  // namespace margop::harness
