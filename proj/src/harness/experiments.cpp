#include "margop/harness/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "margop/estimation.hpp"
#include "margop/harness/csv.hpp"
#include "margop/operators.hpp"
#include "margop/saddle.hpp"

namespace margop::harness {

namespace {

// Read-only pieces shared by every seed for one (target, operator) choice.
struct Evaluator {
  const ExperimentConfig& cfg;
  const TabularMdp& mdp;
  Policy target;
  const Policy& behavior;
  OperatorKind op;
  Vec c;          // one_step: zeros, otherwise the Retrace traces
  TdWeights w;    // marginalized_exact
  Matrix dmu;     // exact behavior visitation
  Matrix mixing;  // expected mode: T Q = Q + mixing * Delta(Q), fixed-weight operators only
  int max_steps;

  Evaluator(const ExperimentConfig& config, const TabularMdp& m, Policy tgt, const Policy& beh, OperatorKind o)
      : cfg(config), mdp(m), target(std::move(tgt)), behavior(beh), op(o) {
    max_steps = cfg.max_steps > 0 ? cfg.max_steps : horizon_for_tolerance(mdp.discount());
    if (op == OperatorKind::kOneStep) {
      c.assign(mdp.n_pairs(), 0.0);
    } else {
      c = materialize_traces(Retrace{cfg.retrace_lambda, cfg.retrace_cbar}, target, behavior);
    }
    const bool need_dmu = cfg.targets == TargetMode::kExpected ||
                          op == OperatorKind::kMarginalizedEstimated || op == OperatorKind::kMarginalizedExact;
    if (need_dmu) dmu = visitation_matrix(mdp, behavior);
    if (op == OperatorKind::kMarginalizedExact) {
      w = cfg.exact_weights == ExactWeights::kTrace ? trace_to_weights(mdp, behavior, c)
                                                     : importance_weights(mdp, target, behavior);
    }
    if (cfg.targets == TargetMode::kExpected && op != OperatorKind::kMarginalizedEstimated) {
      // multistep resolvent equals w^c * d^mu / (1-gamma) by construction of w^c
      TdWeights k = op == OperatorKind::kMarginalizedExact ? w : trace_to_weights(mdp, behavior, c);
      const std::size_t n = mdp.n_pairs();
      mixing = Matrix(n, n);
      const double inv = 1.0 / (1.0 - mdp.discount());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) mixing(i, j) = k(i, j) * dmu(i, j) * inv;
    }
  }
};

// Mutable per-seed state.
struct RunState {
  QFunction q;
  std::optional<TabularWeightEstimator> tabular;
  // gda
  Matrix gda_w;
  std::vector<char> gda_seen;
  std::vector<Trajectory> replay;
};

RunState make_state(const Evaluator& ev, QFunction q0) {
  RunState st;
  st.q = std::move(q0);
  if (ev.op == OperatorKind::kMarginalizedEstimated) {
    if (ev.cfg.estimator == WeightEstimatorKind::kTabular) {
      WeightEstimatorOptions o;
      o.alpha = ev.cfg.tabular.alpha;
      o.schedule = ev.cfg.tabular.harmonic ? StepSchedule::kSampleAverage : StepSchedule::kConstant;
      st.tabular.emplace(ev.mdp, ev.c, o);
    } else {
      st.gda_w = Matrix(ev.mdp.n_pairs(), ev.mdp.n_pairs());
      st.gda_seen.assign(ev.mdp.n_pairs(), 0);
    }
  }
  return st;
}

void weight_row(const Evaluator& ev, const RunState& st, int i, std::span<double> out) {
  switch (ev.op) {
    case OperatorKind::kMarginalizedExact: {
      auto r = ev.w.row(i);
      std::copy(r.begin(), r.end(), out.begin());
      return;
    }
    case OperatorKind::kMarginalizedEstimated:
      if (st.tabular) {
        st.tabular->normalized_row(i, ev.cfg.tabular.exact_normalization ? &ev.dmu : nullptr, out);
      } else {
        auto r = st.gda_w.row(i);
        std::copy(r.begin(), r.end(), out.begin());
      }
      return;
    default:
      throw std::logic_error("weight_row: not a marginalized operator");
  }
}

Vec sampled_targets(const Evaluator& ev, const RunState& st, const Trajectory& traj, const std::vector<int>& ids) {
  Vec td = sampled_td_errors(traj, ev.mdp, ev.target, st.q);
  if (ev.op == OperatorKind::kOneStep || ev.op == OperatorKind::kRetrace) {
    return multistep_targets(traj, ev.mdp, td, ev.c, st.q);
  }
  const std::size_t L = ids.size();
  const std::size_t window = ev.cfg.target_window > 0 ? static_cast<std::size_t>(ev.cfg.target_window) : L;
  const double g = ev.mdp.discount();
  Vec out(L), row(ev.mdp.n_pairs());
  int cached = -1;
  for (std::size_t k = 0; k < L; ++k) {
    if (ids[k] != cached) {
      weight_row(ev, st, ids[k], row);
      cached = ids[k];
    }
    double acc = 0.0, disc = 1.0;
    const std::size_t end = std::min(L, k + window);
    for (std::size_t t = k; t < end; ++t) {
      acc += disc * row[ids[t]] * td[t];
      disc *= g;
    }
    out[k] = st.q[ids[k]] + acc;
  }
  return out;
}

Vec expected_targets(const Evaluator& ev, const RunState& st, const std::vector<int>& ids) {
  Vec delta = bellman_error_vector(ev.mdp, ev.target, st.q);
  const std::size_t n = ev.mdp.n_pairs();
  Vec out(ids.size()), row(n);
  const double inv = 1.0 / (1.0 - ev.mdp.discount());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const int i = ids[k];
    double acc = 0.0;
    if (ev.op == OperatorKind::kMarginalizedEstimated) {
      weight_row(ev, st, i, row);
      for (std::size_t j = 0; j < n; ++j) acc += ev.dmu(i, j) * row[j] * delta[j];
      acc *= inv;
    } else {
      auto m = ev.mixing.row(i);
      for (std::size_t j = 0; j < n; ++j) acc += m[j] * delta[j];
    }
    out[k] = st.q[i] + acc;
  }
  return out;
}

void refresh_gda(const Evaluator& ev, RunState& st) {
  TabularMdp emp = empirical_mdp(st.replay, ev.mdp);
  GdaOptions o;
  o.lr_w = ev.cfg.gda.lr_w;
  o.lr_q = ev.cfg.gda.lr_q;
  o.n_steps = ev.cfg.gda.steps;
  for (int i = 0; i < ev.mdp.n_pairs(); ++i) {
    if (!st.gda_seen[i]) continue;
    auto prev = st.gda_w.row(i);
    o.initial_w.assign(prev.begin(), prev.end());
    SaddleState s = gda_estimate_weights(emp, ev.behavior, ev.c, ev.mdp.pair(i), o);
    std::copy(s.w.begin(), s.w.end(), prev.begin());
  }
}

// One iteration: sample, build targets from the pre-update Q, EMA step, feed estimators.
void iterate(const Evaluator& ev, RunState& st, int t, SaPair start, std::mt19937_64& rng) {
  Trajectory traj = sample_trajectory(ev.mdp, ev.behavior, start, ev.max_steps, rng);
  std::vector<int> ids(traj.length());
  for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = ev.mdp.index(traj.steps[k].state, traj.steps[k].action);
  Vec targets = ev.cfg.targets == TargetMode::kSampled ? sampled_targets(ev, st, traj, ids)
                                                        : expected_targets(ev, st, ids);
  const double a = ev.cfg.q_step_size;
  for (std::size_t k = 0; k < ids.size(); ++k) st.q[ids[k]] = (1.0 - a) * st.q[ids[k]] + a * targets[k];

  if (st.tabular) {
    st.tabular->observe(traj);
  } else if (!st.gda_seen.empty()) {
    for (int i : ids) st.gda_seen[i] = 1;
    st.replay.push_back(std::move(traj));
    if (t % ev.cfg.gda.refresh == 0) refresh_gda(ev, st);
  }
}

SaPair draw_start(const Policy& behavior, int state, std::mt19937_64& rng) {
  return {state, behavior.sample(state, rng)};
}

std::vector<int> non_terminal_states(const TabularMdp& mdp) {
  std::vector<int> xs;
  for (int x = 0; x < mdp.n_states(); ++x)
    if (!mdp.is_terminal(x)) xs.push_back(x);
  return xs;
}

std::string json_dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void ensure_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

std::mt19937_64 seed_generator(std::uint64_t master, int seed_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master & 0xffffffffu), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(seed_index)};
  return std::mt19937_64(seq);
}

void for_each_seed(int n_seeds, int threads, const std::function<void(int)>& fn) {
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n_seeds);
  std::vector<std::exception_ptr> errors(n_seeds);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int s; (s = next.fetch_add(1)) < n_seeds;) {
      try {
        fn(s);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

MetricSeries reduce_series(const std::vector<int>& iterations, const std::vector<std::vector<double>>& per_seed) {
  MetricSeries out;
  out.iterations = iterations;
  out.n_seeds = static_cast<int>(per_seed.size());
  const std::size_t m = iterations.size();
  out.mean.assign(m, 0.0);
  out.std_error.assign(m, 0.0);
  for (const auto& s : per_seed) {
    if (s.size() != m) throw std::invalid_argument("reduce_series: series lengths differ");
    for (std::size_t t = 0; t < m; ++t) out.mean[t] += s[t];
  }
  const double n = static_cast<double>(per_seed.size());
  if (n == 0) return out;
  for (double& v : out.mean) v /= n;
  if (per_seed.size() > 1) {
    for (std::size_t t = 0; t < m; ++t) {
      double ss = 0.0;
      for (const auto& s : per_seed) ss += (s[t] - out.mean[t]) * (s[t] - out.mean[t]);
      out.std_error[t] = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
  }
  for (const auto& s : per_seed) out.final_per_seed.push_back(m ? s.back() : 0.0);
  return out;
}

double relative_error(MetricKind metric, const QFunction& q, const QFunction& qpi, int start_state) {
  if (metric == MetricKind::kPerActionSum) {
    double e = 0.0;
    for (int a = 0; a < q.n_actions(); ++a) {
      const double d = std::fabs(qpi(start_state, a));
      if (d > 0.0) e += std::fabs(q(start_state, a) - qpi(start_state, a)) / d;
    }
    return e;
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < q.values().size(); ++i) {
    num += (q[i] - qpi[i]) * (q[i] - qpi[i]);
    den += qpi[i] * qpi[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

std::vector<int> recorded_iterations(const ExperimentConfig& config) {
  std::vector<int> its;
  for (int t = 0; t <= config.n_iterations; t += config.record_every) its.push_back(t);
  if (its.back() != config.n_iterations) its.push_back(config.n_iterations);
  return its;
}

namespace {

std::vector<double> evaluate_seed(const ExperimentConfig& config, const Benchmark& b, const Evaluator& ev,
                                  const QFunction& qpi, std::mt19937_64& rng, const QHook& hook, QFunction* final_q) {
  RunState st = make_state(ev, QFunction::zeros(b.mdp.n_states(), b.mdp.n_actions()));
  std::vector<double> out;
  auto record = [&](int t) {
    if (t % config.record_every == 0 || t == config.n_iterations)
      out.push_back(relative_error(config.metric, st.q, qpi, b.start_state));
  };
  if (hook) hook(0, st.q);
  record(0);
  for (int t = 1; t <= config.n_iterations; ++t) {
    iterate(ev, st, t, draw_start(b.behavior, b.start_state, rng), rng);
    if (hook) hook(t, st.q);
    record(t);
  }
  if (final_q) *final_q = st.q;
  return out;
}

}  // namespace

std::vector<double> run_single_evaluation(const ExperimentConfig& config, OperatorKind op, std::mt19937_64& rng,
                                          const QHook& hook, QFunction* final_q) {
  config.validate();
  Benchmark b = config.build_benchmark();
  Evaluator ev(config, b.mdp, b.target, b.behavior, op);
  return evaluate_seed(config, b, ev, exact_q(b.mdp, b.target), rng, hook, final_q);
}

MetricSeries run_evaluation(const ExperimentConfig& config, OperatorKind op, const QHook& hook) {
  config.validate();
  Benchmark b = config.build_benchmark();
  Evaluator ev(config, b.mdp, b.target, b.behavior, op);
  QFunction qpi = exact_q(b.mdp, b.target);
  std::vector<std::vector<double>> per_seed(config.n_seeds);
  for_each_seed(config.n_seeds, config.threads, [&](int s) {
    std::mt19937_64 rng = seed_generator(config.seed, s);
    per_seed[s] = evaluate_seed(config, b, ev, qpi, rng, hook, nullptr);
  });
  return reduce_series(recorded_iterations(config), per_seed);
}

std::string series_csv(const MetricSeries& series) {
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < series.iterations.size(); ++t)
    rows.push_back({static_cast<double>(series.iterations[t]), series.mean[t], series.std_error[t]});
  return csv_text({"iteration", "mean_error", "stderr"}, rows);
}

Matrix value_grid(const ExperimentConfig& config, const QFunction& q) {
  if (config.environment != EnvironmentKind::kOpenWorld) {
    throw std::invalid_argument("value_grid: environment must be openworld");
  }
  Benchmark b = config.build_benchmark();
  const int n = config.openworld.side;
  Matrix g(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) g(r, c) = q.expected(open_world_state(n, r, c), b.target);
  return g;
}

Matrix exact_value_grid(const ExperimentConfig& config) {
  Benchmark b = config.build_benchmark();
  return value_grid(config, exact_q(b.mdp, b.target));
}

HeatmapResult run_openworld_heatmap(const ExperimentConfig& config, OperatorKind op) {
  config.validate();
  if (config.environment != EnvironmentKind::kOpenWorld) {
    throw std::invalid_argument("config field 'environment': heatmaps need openworld");
  }
  for (int k : config.checkpoints)
    if (k > config.n_iterations) throw std::invalid_argument("config field 'checkpoints': beyond n_iterations");
  Benchmark b = config.build_benchmark();
  const int n = config.openworld.side;
  const std::size_t m = config.checkpoints.size();
  ExperimentConfig quiet = config;
  quiet.record_every = std::max(1, config.n_iterations);
  Evaluator ev(quiet, b.mdp, b.target, b.behavior, op);
  QFunction qpi = exact_q(b.mdp, b.target);
  std::vector<std::vector<Matrix>> per_seed(config.n_seeds, std::vector<Matrix>(m));
  for_each_seed(config.n_seeds, config.threads, [&](int s) {
    std::mt19937_64 rng = seed_generator(config.seed, s);
    auto hook = [&](int t, QFunction& q) {
      for (std::size_t k = 0; k < m; ++k)
        if (config.checkpoints[k] == t) {
          Matrix g(n, n);
          for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) g(r, c) = q.expected(open_world_state(n, r, c), b.target);
          per_seed[s][k] = std::move(g);
        }
    };
    evaluate_seed(quiet, b, ev, qpi, rng, hook, nullptr);
  });
  HeatmapResult res{op, config.checkpoints, {}};
  for (std::size_t k = 0; k < m; ++k) {
    Matrix mean(n, n);
    for (const auto& seed_grids : per_seed)
      for (std::size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += seed_grids[k].data()[i];
    for (double& v : mean.data()) v /= config.n_seeds;
    res.grids.push_back(std::move(mean));
  }
  return res;
}

Policy greedy_policy(const TabularMdp& mdp, const QFunction& q) {
  std::vector<int> acts(mdp.n_states());
  for (int x = 0; x < mdp.n_states(); ++x) {
    int best = 0;
    for (int a = 1; a < mdp.n_actions(); ++a)
      if (q(x, a) > q(x, best)) best = a;
    acts[x] = best;
  }
  return Policy::deterministic(mdp.n_states(), mdp.n_actions(), acts);
}

double monte_carlo_return(const TabularMdp& mdp, const Policy& policy, int episodes, int max_steps,
                          std::mt19937_64& rng) {
  std::vector<int> starts = non_terminal_states(mdp);
  if (starts.empty()) return 0.0;
  std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const int x0 = starts[pick(rng)];
    Trajectory traj = sample_trajectory(mdp, policy, {x0, policy.sample(x0, rng)}, max_steps, rng);
    double g = 0.0, disc = 1.0;
    for (const Step& s : traj.steps) {
      g += disc * s.reward;
      disc *= mdp.discount();
    }
    total += g;
  }
  return total / episodes;
}

PolicyIterationResult run_policy_iteration(const ExperimentConfig& config, OperatorKind op) {
  config.validate();
  if (config.environment != EnvironmentKind::kOpenWorld) {
    throw std::invalid_argument("config field 'environment': policy iteration needs openworld");
  }
  Benchmark b = config.build_benchmark();
  const TabularMdp& mdp = b.mdp;
  const int horizon = config.max_steps > 0 ? config.max_steps : horizon_for_tolerance(mdp.discount());
  const double step = config.pi.mode == PolicyIterationMode::kHard ? 1.0 : config.pi.alpha;
  const std::vector<int> starts = non_terminal_states(mdp);

  std::vector<std::vector<double>> per_seed(config.n_seeds);
  for_each_seed(config.n_seeds, config.threads, [&](int s) {
    std::mt19937_64 rng = seed_generator(config.seed, s);
    std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
    Policy pi = b.behavior;
    QFunction q = QFunction::zeros(mdp.n_states(), mdp.n_actions());
    std::vector<double> returns{monte_carlo_return(mdp, pi, config.pi.episodes, horizon, rng)};
    for (int it = 1; it <= config.pi.iterations; ++it) {
      if (config.pi.exact_q) {
        q = exact_q(mdp, pi);
      } else {
        Evaluator ev(config, mdp, pi, b.behavior, op);
        RunState st = make_state(ev, q);
        for (int t = 1; t <= config.pi.eval_iterations; ++t) {
          const int x0 = starts[pick(rng)];
          iterate(ev, st, t, draw_start(b.behavior, x0, rng), rng);
        }
        q = st.q;
      }
      Policy greedy = greedy_policy(mdp, q);
      Vec mixed(pi.probs().size());
      for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = (1.0 - step) * pi.probs()[i] + step * greedy.probs()[i];
      pi = Policy(mdp.n_states(), mdp.n_actions(), std::move(mixed), 1e-9);
      returns.push_back(monte_carlo_return(mdp, pi, config.pi.episodes, horizon, rng));
    }
    per_seed[s] = std::move(returns);
  });
  std::vector<int> its(config.pi.iterations + 1);
  for (int i = 0; i <= config.pi.iterations; ++i) its[i] = i;

  // exact optimum by policy iteration on the true model
  Policy opt = b.behavior;
  for (int k = 0; k <= mdp.n_states() + 1; ++k) {
    Policy next = greedy_policy(mdp, exact_q(mdp, opt));
    if (k > 0 && next.probs() == opt.probs()) break;
    opt = std::move(next);
  }
  ValueFunction vstar = exact_v(mdp, opt);
  double mean_v = 0.0;
  for (int x : starts) mean_v += vstar.values[x];
  return {op, reduce_series(its, per_seed), mean_v / static_cast<double>(starts.size())};
}

std::vector<WeightGrid> export_weights(const ExperimentConfig& config, bool estimated) {
  config.validate();
  Benchmark b = config.build_benchmark();
  const TabularMdp& mdp = b.mdp;
  Vec c = materialize_traces(Retrace{config.retrace_lambda, config.retrace_cbar}, b.target, b.behavior);
  TdWeights w;
  if (estimated) {
    WeightEstimationOptions o;
    o.n_iterations = std::max(1, config.n_iterations);
    o.alpha = config.tabular.alpha;
    o.schedule = config.tabular.harmonic ? StepSchedule::kSampleAverage : StepSchedule::kConstant;
    o.normalization = config.tabular.exact_normalization ? WeightNormalization::kExactVisitation
                                                          : WeightNormalization::kEstimatedVisitation;
    o.start_states.clear();
    for (const SaPair& p : config.weight_starts) o.start_states.push_back(p.state);
    std::mt19937_64 rng = seed_generator(config.seed, 0);
    o.seed = rng();
    w = tabular_weight_estimation(mdp, b.behavior, c, o).normalized;
  } else {
    w = config.exact_weights == ExactWeights::kTrace ? trace_to_weights(mdp, b.behavior, c)
                                                     : importance_weights(mdp, b.target, b.behavior);
  }
  return weight_grids(config, w);
}

std::vector<WeightGrid> weight_grids(const ExperimentConfig& config, const TdWeights& w) {
  config.validate();
  Benchmark b = config.build_benchmark();
  const TabularMdp& mdp = b.mdp;
  if (w.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("weight_grids: weight matrix has wrong size");
  }
  Matrix dmu = visitation_matrix(mdp, b.behavior);
  const bool grid2d = config.environment == EnvironmentKind::kOpenWorld;
  const int rows = grid2d ? config.openworld.side : 1;
  const int cols = grid2d ? config.openworld.side : mdp.n_states();
  std::vector<WeightGrid> out;
  for (const SaPair& start : config.weight_starts) {
    const int i = mdp.index(start.state, start.action);
    WeightGrid g{start, Matrix(rows, cols), Matrix(rows, cols)};
    for (int x = 0; x < mdp.n_states(); ++x) {
      double mean = 0.0, mass = 0.0;
      for (int a = 0; a < mdp.n_actions(); ++a) {
        const int j = mdp.index(x, a);
        mean += w(i, j);
        mass += w(i, j) * dmu(i, j);
      }
      g.grid.data()[x] = mean / mdp.n_actions();
      g.mass.data()[x] = mass;
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<std::string> write_evaluation(const ExperimentConfig& config) {
  ensure_dir(config.output);
  std::vector<std::string> files;
  nlohmann::json summary;
  summary["config"] = dump_config(config);
  for (OperatorKind op : config.operators) {
    MetricSeries s = run_evaluation(config, op);
    std::string path = join(config.output, "eval_" + operator_name(op) + ".csv");
    write_text_file(path, series_csv(s));
    files.push_back(path);
    summary["operators"][operator_name(op)] = {{"final_mean_error", s.mean.back()},
                                               {"final_stderr", s.std_error.back()},
                                               {"n_seeds", s.n_seeds}};
  }
  std::string path = join(config.output, "summary_eval.json");
  write_text_file(path, json_dump(summary));
  files.push_back(path);
  return files;
}

std::vector<std::string> write_openworld(const ExperimentConfig& config) {
  ensure_dir(config.output);
  std::vector<std::string> files;
  Matrix exact = exact_value_grid(config);
  std::string ep = join(config.output, "heatmap_exact.csv");
  write_text_file(ep, grid_csv_text(exact));
  files.push_back(ep);
  nlohmann::json summary;
  summary["config"] = dump_config(config);
  for (OperatorKind op : config.operators) {
    HeatmapResult h = run_openworld_heatmap(config, op);
    for (std::size_t k = 0; k < h.checkpoints.size(); ++k) {
      std::string p = join(config.output, "heatmap_" + operator_name(op) + "_" + std::to_string(h.checkpoints[k]) + ".csv");
      write_text_file(p, grid_csv_text(h.grids[k]));
      files.push_back(p);
      double err = 0.0;
      for (std::size_t i = 0; i < exact.data().size(); ++i)
        err = std::max(err, std::fabs(h.grids[k].data()[i] - exact.data()[i]));
      summary["operators"][operator_name(op)]["max_abs_error"][std::to_string(h.checkpoints[k])] = err;
    }
  }
  std::string path = join(config.output, "summary_openworld.json");
  write_text_file(path, json_dump(summary));
  files.push_back(path);
  return files;
}

std::vector<std::string> write_policy_iteration(const ExperimentConfig& config) {
  ensure_dir(config.output);
  std::vector<std::string> files;
  nlohmann::json summary;
  summary["config"] = dump_config(config);
  const std::string mode = config.pi.mode == PolicyIterationMode::kHard ? "hard" : "soft";
  for (OperatorKind op : config.operators) {
    PolicyIterationResult r = run_policy_iteration(config, op);
    std::vector<std::vector<double>> rows;
    for (std::size_t t = 0; t < r.returns.iterations.size(); ++t)
      rows.push_back({static_cast<double>(r.returns.iterations[t]), r.returns.mean[t], r.returns.std_error[t]});
    std::string p = join(config.output, "pi_" + mode + "_" + operator_name(op) + ".csv");
    write_text_file(p, csv_text({"iteration", "mean_return", "stderr"}, rows));
    files.push_back(p);
    summary["operators"][operator_name(op)] = {{"final_mean_return", r.returns.mean.back()},
                                               {"optimal_mean_value", r.optimal_return}};
  }
  std::string path = join(config.output, "summary_pi_" + mode + ".json");
  write_text_file(path, json_dump(summary));
  files.push_back(path);
  return files;
}

std::vector<std::string> write_weights(const ExperimentConfig& config, bool estimated) {
  ensure_dir(config.output);
  std::vector<std::string> files;
  const std::string tag = estimated ? "estimated" : "exact";
  for (const WeightGrid& g : export_weights(config, estimated)) {
    const std::string id = std::to_string(g.start.state) + "_" + std::to_string(g.start.action);
    std::string p = join(config.output, "weights_" + tag + "_" + id + ".csv");
    write_text_file(p, grid_csv_text(g.grid));
    files.push_back(p);
    std::string pm = join(config.output, "weight_mass_" + tag + "_" + id + ".csv");
    write_text_file(pm, grid_csv_text(g.mass));
    files.push_back(pm);
  }
  return files;
}

}  // namespace margop::harness
