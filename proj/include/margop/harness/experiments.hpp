#pragma once

#include <functional>
#include <string>
#include <vector>

#include "margop/harness/config.hpp"
#include "margop/linalg/matrix.hpp"
#include "margop/mdp.hpp"
#include "margop/operators.hpp"

namespace margop::harness {

struct MetricSeries {
  std::vector<int> iterations;
  std::vector<double> mean;
  std::vector<double> std_error;  // sample std over seeds / sqrt(n_seeds)
  int n_seeds = 0;
  std::vector<double> final_per_seed;  // metric at the last recorded iteration, seed order
};

// Reduces per-seed series (all the same length) in seed order.
MetricSeries reduce_series(const std::vector<int>& iterations, const std::vector<std::vector<double>>& per_seed);

// Relative error of q at the start state (or over all pairs) against qpi.
double relative_error(MetricKind metric, const QFunction& q, const QFunction& qpi, int start_state);

// Runs fn(seed_index) for every seed on `threads` workers; results land by index.
void for_each_seed(int n_seeds, int threads, const std::function<void(int)>& fn);

// Generator for seed s under master seed m; independent of thread scheduling.
std::mt19937_64 seed_generator(std::uint64_t master, int seed_index);

// Hook called after every Q update with (iteration, q); may overwrite q.
using QHook = std::function<void(int, QFunction&)>;

// One evaluation run: per iteration one behavior trajectory from the start
// state, targets built from the pre-update Q, EMA step of size q_step_size on
// every visited pair. Returns the metric at each recorded iteration
// (0, record_every, ..., n_iterations).
std::vector<double> run_single_evaluation(const ExperimentConfig& config, OperatorKind op, std::mt19937_64& rng,
                                          const QHook& hook = {}, QFunction* final_q = nullptr);

std::vector<int> recorded_iterations(const ExperimentConfig& config);

MetricSeries run_evaluation(const ExperimentConfig& config, OperatorKind op, const QHook& hook = {});

std::string series_csv(const MetricSeries& series);

struct HeatmapResult {
  OperatorKind op;
  std::vector<int> checkpoints;
  std::vector<Matrix> grids;  // mean over runs of V(x) = sum_a pi(a|x) Q(x,a), side x side
};

// Exact V^pi as a side x side grid.
Matrix exact_value_grid(const ExperimentConfig& config);
Matrix value_grid(const ExperimentConfig& config, const QFunction& q);

HeatmapResult run_openworld_heatmap(const ExperimentConfig& config, OperatorKind op);

struct PolicyIterationResult {
  OperatorKind op;
  MetricSeries returns;  // mean MC return after each improvement step (index 0 = initial policy)
  double optimal_return = 0.0;  // MC return of the exact optimal policy, same episode seeds
};

// Greedy policy on q; ties go to the lowest action index.
Policy greedy_policy(const TabularMdp& mdp, const QFunction& q);

// Mean discounted return over `episodes` rollouts from uniformly random non-terminal states.
double monte_carlo_return(const TabularMdp& mdp, const Policy& policy, int episodes, int max_steps,
                          std::mt19937_64& rng);

PolicyIterationResult run_policy_iteration(const ExperimentConfig& config, OperatorKind op);

struct WeightGrid {
  SaPair start;
  Matrix grid;  // mean over a' of w_start(x', a')
  Matrix mass;  // sum over a' of w_start(x', a') d^mu_start(x', a'); totals 1 for ratio weights
};

// Grids for every configured start pair from a given weight matrix.
std::vector<WeightGrid> weight_grids(const ExperimentConfig& config, const TdWeights& w);

// Exact weights (per exact_weights) or tabular estimates when `estimated`.
std::vector<WeightGrid> export_weights(const ExperimentConfig& config, bool estimated);

// Runs the configured subcommand workload and writes CSV/JSON under config.output.
// Returns the list of written files.
std::vector<std::string> write_evaluation(const ExperimentConfig& config);
std::vector<std::string> write_openworld(const ExperimentConfig& config);
std::vector<std::string> write_policy_iteration(const ExperimentConfig& config);
std::vector<std::string> write_weights(const ExperimentConfig& config, bool estimated);

}  // namespace margop::harness
