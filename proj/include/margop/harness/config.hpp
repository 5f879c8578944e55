#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "margop/envs.hpp"

namespace margop::harness {

enum class EnvironmentKind { kChain, kOpenWorld };

enum class OperatorKind { kOneStep, kRetrace, kMarginalizedExact, kMarginalizedEstimated };

// Which exact weights marginalized_exact uses: w^c for the Retrace traces, or d^pi / d^mu.
enum class ExactWeights { kTrace, kImportance };

enum class WeightEstimatorKind { kTabular, kGda };

enum class MetricKind {
  kPerActionSum,  // sum_a |Q(x0,a) - Qpi(x0,a)| / Qpi(x0,a)
  kRelativeNorm,  // ||Q - Qpi||_2 / ||Qpi||_2 over all pairs
};

// Sampled: trajectory estimates of the operator. Expected: exact operator values at visited pairs.
enum class TargetMode { kSampled, kExpected };

enum class PolicyIterationMode { kSoft, kHard };

struct TabularEstimatorConfig {
  double alpha = 0.1;
  bool harmonic = true;             // 1/n step per row instead of constant alpha
  bool exact_normalization = false;  // divide by exact d^mu instead of the c = 1 estimate
};

struct GdaConfig {
  double lr_w = 0.5;
  double lr_q = 0.5;
  int steps = 200;     // per refresh, warm-started
  int refresh = 50;    // iterations between refreshes
};

struct PolicyIterationConfig {
  PolicyIterationMode mode = PolicyIterationMode::kSoft;
  int iterations = 30;
  double alpha = 0.1;
  int eval_iterations = 200;  // evaluation-loop iterations per improvement step
  int episodes = 200;         // Monte-Carlo episodes for the reported return
  bool exact_q = false;       // use Q^pi instead of the sampled evaluation
};

struct ExperimentConfig {
  EnvironmentKind environment = EnvironmentKind::kChain;
  ChainSpec chain;
  OpenWorldSpec openworld;

  std::vector<OperatorKind> operators = {OperatorKind::kOneStep, OperatorKind::kRetrace,
                                         OperatorKind::kMarginalizedExact};
  double retrace_lambda = 1.0;
  double retrace_cbar = 1.0;
  ExactWeights exact_weights = ExactWeights::kTrace;
  WeightEstimatorKind estimator = WeightEstimatorKind::kTabular;
  TabularEstimatorConfig tabular;
  GdaConfig gda;

  int n_iterations = 1000;
  int n_seeds = 100;
  double q_step_size = 0.1;
  MetricKind metric = MetricKind::kPerActionSum;
  TargetMode targets = TargetMode::kSampled;
  int max_steps = 0;      // 0: horizon for a 1e-12 discount tail
  int target_window = 0;  // lookahead cap for marginalized targets, 0 = none
  int record_every = 1;
  int threads = 0;        // 0: hardware concurrency
  std::uint64_t seed = 0;
  std::string output = "out";

  std::vector<int> checkpoints = {0, 100, 1000};
  PolicyIterationConfig pi;
  std::vector<SaPair> weight_starts = {{0, 0}};

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  Benchmark build_benchmark() const;
  double discount() const;
};

std::string operator_name(OperatorKind op);

// Flat `key = value` text, '#' starts a comment. Unknown keys and bad values
// throw std::invalid_argument with the key (and line) in the message.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Applies one key/value pair; used by the parser and for CLI overrides.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);
// Round-trippable text form of every field.
std::string dump_config(const ExperimentConfig& config);

}  // namespace margop::harness
