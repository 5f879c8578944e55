#include "margop/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "margop/simd/kernels.hpp"

namespace margop {

int sample_random_time(double discount, std::mt19937_64& rng) {
  if (!(discount >= 0.0 && discount < 1.0)) {
    throw std::invalid_argument("sample_random_time: discount must lie in [0,1)");
  }
  if (discount == 0.0) return 0;
  std::geometric_distribution<int> geo(1.0 - discount);
  return geo(rng);
}

int sample_random_time(double discount, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_random_time(discount, rng);
}

Vec sampled_td_errors(const Trajectory& traj, const TabularMdp& mdp, const Policy& target,
                      const QFunction& q) {
  check_compatible(mdp, target);
  check_compatible(mdp, q);
  check_zero_on_terminals(mdp, q);
  const double g = mdp.discount();
  const std::size_t L = traj.length();
  Vec td(L);
  for (std::size_t t = 0; t < L; ++t) {
    const Step& s = traj.steps[t];
    td[t] = s.reward + g * q.expected(traj.state_after(t), target) - q(s.state, s.action);
  }
  return td;
}

EstimatorSample estimate_operator(const Trajectory& traj, const TabularMdp& mdp, const Policy& target,
                                  const QFunction& q, const EstimatorParams& params, std::size_t offset) {
  const std::size_t L = traj.length();
  if (offset >= L) throw std::invalid_argument("estimate_operator: offset beyond trajectory end");
  const SaPair start{traj.steps[offset].state, traj.steps[offset].action};
  if (params.start && !(*params.start == start)) {
    throw std::invalid_argument("estimate_operator: trajectory does not start at the requested pair");
  }
  if (params.coefficients.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("estimate_operator: coefficient vector has wrong size");
  }
  if (params.kind == EstimateKind::kRandomTime && params.random_time < 0) {
    throw std::invalid_argument("estimate_operator: random time must be >= 0");
  }
  const Vec td = sampled_td_errors(traj, mdp, target, q);
  const double g = mdp.discount();
  const auto& coef = params.coefficients;
  const bool multistep = params.family == OperatorFamily::kMultistep;
  auto idx = [&](std::size_t t) { return mdp.index(traj.steps[t].state, traj.steps[t].action); };

  double value = q[mdp.index(start)];
  if (params.kind == EstimateKind::kTrajectory) {
    double weight = 1.0;
    double disc = 1.0;
    double acc = 0.0;
    for (std::size_t t = offset; t < L; ++t) {
      if (t > offset) {
        disc *= g;
        if (multistep) weight *= coef[idx(t)];
      }
      acc += disc * (multistep ? weight : coef[idx(t)]) * td[t];
    }
    value += acc;
  } else {
    const std::size_t t = offset + static_cast<std::size_t>(params.random_time);
    if (t >= L) {
      if (!traj.terminated) {
        throw std::invalid_argument("estimate_operator: random time " + std::to_string(params.random_time) +
                                    " exceeds a truncated trajectory");
      }
      // Past absorption the Bellman error is zero.
    } else {
      double weight = 1.0;
      if (multistep) {
        for (std::size_t s = offset + 1; s <= t; ++s) weight *= coef[idx(s)];
      } else {
        weight = coef[idx(t)];
      }
      value += weight * td[t] / (1.0 - g);
    }
  }
  return {value, start, params.kind, params.family};
}

Vec multistep_targets(const Trajectory& traj, const TabularMdp& mdp, std::span<const double> td,
                      std::span<const double> c, const QFunction& q) {
  const std::size_t L = traj.length();
  if (td.size() != L) throw std::invalid_argument("multistep_targets: td length mismatch");
  if (c.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("multistep_targets: trace vector has wrong size");
  }
  const double g = mdp.discount();
  Vec out(L);
  double tail = 0.0;
  for (std::size_t k = L; k-- > 0;) {
    double carry = 0.0;
    if (k + 1 < L) carry = g * c[mdp.index(traj.steps[k + 1].state, traj.steps[k + 1].action)] * tail;
    tail = td[k] + carry;
    out[k] = q(traj.steps[k].state, traj.steps[k].action) + tail;
  }
  return out;
}

Vec marginalized_targets(const Trajectory& traj, const TabularMdp& mdp, std::span<const double> td,
                         const TdWeights& w, const QFunction& q) {
  const std::size_t L = traj.length();
  if (td.size() != L) throw std::invalid_argument("marginalized_targets: td length mismatch");
  if (w.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("marginalized_targets: weight matrix has wrong size");
  }
  const double g = mdp.discount();
  std::vector<int> ids(L);
  for (std::size_t t = 0; t < L; ++t) ids[t] = mdp.index(traj.steps[t].state, traj.steps[t].action);
  Vec out(L);
  for (std::size_t k = 0; k < L; ++k) {
    auto row = w.row(ids[k]);
    double acc = 0.0;
    double disc = 1.0;
    for (std::size_t t = k; t < L; ++t) {
      acc += disc * row[ids[t]] * td[t];
      disc *= g;
    }
    out[k] = q[ids[k]] + acc;
  }
  return out;
}

TabularWeightEstimator::TabularWeightEstimator(const TabularMdp& mdp, Vec c, WeightEstimatorOptions options)
    : n_actions_(mdp.n_actions()),
      discount_(mdp.discount()),
      c_(std::move(c)),
      options_(options),
      raw_(mdp.n_pairs(), mdp.n_pairs()),
      visit_(mdp.n_pairs(), mdp.n_pairs()),
      updates_(mdp.n_pairs(), 0),
      sum_c_(mdp.n_pairs(), 0.0),
      sum_one_(mdp.n_pairs(), 0.0),
      count_(mdp.n_pairs(), 0.0) {
  if (c_.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("TabularWeightEstimator: trace vector has wrong size");
  }
  if (!(options_.alpha > 0.0 && options_.alpha <= 1.0)) {
    throw std::invalid_argument("TabularWeightEstimator: alpha must lie in (0,1]");
  }
  touched_.reserve(mdp.n_pairs());
}

void TabularWeightEstimator::observe(const Trajectory& traj) {
  const std::size_t L = traj.length();
  std::vector<int> ids(L);
  for (std::size_t t = 0; t < L; ++t) ids[t] = traj.steps[t].state * n_actions_ + traj.steps[t].action;
  for (std::size_t k = 0; k < L; ++k) {
    const int row = ids[k];
    double prod = 1.0;
    double disc = 1.0 - discount_;
    for (std::size_t t = k; t < L; ++t) {
      const int j = ids[t];
      if (t > k) {
        prod *= c_[j];
        disc *= discount_;
      }
      if (count_[j] == 0.0) touched_.push_back(j);
      sum_c_[j] += disc * prod;
      sum_one_[j] += disc;
      count_[j] += 1.0;
    }
    const long long n = ++updates_[row];
    const double alpha =
        options_.schedule == StepSchedule::kConstant ? options_.alpha : 1.0 / static_cast<double>(n);
    auto raw_row = raw_.row(row);
    auto vis_row = visit_.row(row);
    simd::scale(1.0 - alpha, raw_row);
    simd::scale(1.0 - alpha, vis_row);
    for (int j : touched_) {
      const double denom = options_.average_over_visits ? count_[j] : 1.0;
      raw_row[j] += alpha * sum_c_[j] / denom;
      vis_row[j] += alpha * sum_one_[j] / denom;
      sum_c_[j] = sum_one_[j] = count_[j] = 0.0;
    }
    touched_.clear();
  }
}

void TabularWeightEstimator::normalized_row(std::size_t i, const Matrix* visitation, std::span<double> out) const {
  const std::size_t n = raw_.cols();
  if (out.size() != n) throw std::invalid_argument("normalized_row: output has wrong size");
  auto r = raw_.row(i);
  for (std::size_t j = 0; j < n; ++j) {
    double den = visitation ? (*visitation)(i, j) : visit_(i, j);
    double floor = visitation ? kZeroVisitation : 0.0;
    out[j] = den > floor ? r[j] / den : 0.0;
  }
}

TdWeights TabularWeightEstimator::normalized_by_estimate() const {
  Matrix m(raw_.rows(), raw_.cols());
  for (std::size_t i = 0; i < raw_.rows(); ++i) normalized_row(i, nullptr, m.row(i));
  return TdWeights(std::move(m));
}

TdWeights TabularWeightEstimator::normalized_by(const Matrix& visitation) const {
  if (visitation.rows() != raw_.rows() || visitation.cols() != raw_.cols()) {
    throw std::invalid_argument("normalized_by: visitation matrix has wrong shape");
  }
  Matrix m(raw_.rows(), raw_.cols());
  for (std::size_t i = 0; i < raw_.rows(); ++i) normalized_row(i, &visitation, m.row(i));
  return TdWeights(std::move(m));
}

WeightEstimate tabular_weight_estimation(const TabularMdp& mdp, const Policy& behavior,
                                         std::span<const double> c, const WeightEstimationOptions& options) {
  check_compatible(mdp, behavior);
  if (options.n_iterations < 1) throw std::invalid_argument("tabular_weight_estimation: n_iterations must be >= 1");
  if (options.start_states.empty()) throw std::invalid_argument("tabular_weight_estimation: no start states");
  for (int x : options.start_states) mdp.check_pair({x, 0});
  TabularWeightEstimator est(mdp, Vec(c.begin(), c.end()),
                             {options.alpha, options.schedule, options.average_over_visits});
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, options.start_states.size() - 1);
  const int horizon = horizon_for_tolerance(mdp.discount());
  for (int it = 0; it < options.n_iterations; ++it) {
    int x0 = options.start_states[pick(rng)];
    int a0 = behavior.sample(x0, rng);
    est.observe(sample_trajectory(mdp, behavior, {x0, a0}, horizon, rng));
  }
  TdWeights normalized = options.normalization == WeightNormalization::kExactVisitation
                             ? est.normalized_by(visitation_matrix(mdp, behavior))
                             : est.normalized_by_estimate();
  return {est.raw(), std::move(normalized), est.row_updates()};
}

ConditionalIsEstimate conditional_is_oracle(const TabularMdp& mdp, const Policy& behavior,
                                            std::span<const double> c, SaPair start,
                                            long long n_trajectories, std::uint64_t seed) {
  check_compatible(mdp, behavior);
  mdp.check_pair(start);
  if (n_trajectories < 1) throw std::invalid_argument("conditional_is_oracle: need at least one trajectory");
  if (c.size() != static_cast<std::size_t>(mdp.n_pairs())) {
    throw std::invalid_argument("conditional_is_oracle: trace vector has wrong size");
  }
  const std::size_t n = static_cast<std::size_t>(mdp.n_pairs());
  Vec sum(n, 0.0), sumsq(n, 0.0);
  std::vector<long long> count(n, 0);
  std::mt19937_64 rng(seed);
  for (long long i = 0; i < n_trajectories; ++i) {
    int tau = sample_random_time(mdp.discount(), rng);
    int x = start.state;
    int a = start.action;
    double prod = 1.0;
    for (int s = 1; s <= tau; ++s) {
      x = sample_next_state(mdp, x, a, rng);
      a = behavior.sample(x, rng);
      prod *= c[mdp.index(x, a)];
    }
    const int j = mdp.index(x, a);
    sum[j] += prod;
    sumsq[j] += prod * prod;
    ++count[j];
  }
  ConditionalIsEstimate out{Vec(n, 0.0), Vec(n, 0.0), count};
  for (std::size_t j = 0; j < n; ++j) {
    if (count[j] == 0) continue;
    const double m = sum[j] / count[j];
    out.mean[j] = m;
    if (count[j] > 1) {
      double var = std::max(0.0, (sumsq[j] - count[j] * m * m) / (count[j] - 1));
      out.std_error[j] = std::sqrt(var / count[j]);
    }
  }
  return out;
}

}  // namespace margop
