#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "margop/envs.hpp"
#include "margop/harness/config.hpp"
#include "margop/harness/experiments.hpp"
#include "margop/lp_eval.hpp"
#include "margop/operators.hpp"
#include "margop/simd/kernels.hpp"
#include "margop/simplex.hpp"

using namespace margop;
using namespace margop::harness;

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::string simd;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "Config file (flat key = value)");
  app->add_option("--out", c.out, "Output directory (overrides 'output')");
  app->add_option("--seed", c.seed, "Master seed (overrides 'seed')")->each([&](const std::string&) { c.seed_set = true; });
  app->add_option("--set", c.overrides, "Extra key=value override, repeatable");
  app->add_option("--simd", c.simd, "Kernel backend: scalar, avx2 or neon");
}

ExperimentConfig resolve(const Common& c) {
  if (!c.simd.empty()) simd::set_backend(simd::parse_backend(c.simd));
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  for (const std::string& kv : c.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.out.empty()) cfg.output = c.out;
  if (c.seed_set) cfg.seed = c.seed;
  cfg.validate();
  return cfg;
}

void print_files(const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << f << '\n';
}

// Quick consistency checks on small problems; returns the number of failures.
int selftest() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << '\n';
    failures += !ok;
  };

  // SIMD kernels against the scalar reference
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec a(37), b(37);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = u(rng), b[i] = u(rng);
  const auto& ref = simd::kernels_for(simd::Backend::kScalar);
  bool simd_ok = true;
  for (auto be : {simd::Backend::kAvx2, simd::Backend::kNeon}) {
    if (!simd::backend_available(be)) continue;
    const auto& k = simd::kernels_for(be);
    simd_ok &= std::fabs(k.dot(a.data(), b.data(), a.size()) - ref.dot(a.data(), b.data(), a.size())) < 1e-12;
    simd_ok &= std::fabs(k.abs_sum(a.data(), a.size()) - ref.abs_sum(a.data(), a.size())) < 1e-12;
  }
  check("simd kernels match scalar", simd_ok);

  ChainSpec spec;
  spec.horizon = 5;
  spec.n_actions = 3;
  Benchmark chain = build_chain(spec);
  Vec c = materialize_traces(Retrace{1.0, 1.0}, chain.target, chain.behavior);
  QFunction q = QFunction::zeros(chain.mdp.n_states(), chain.mdp.n_actions());
  for (int x = 0; x + 1 < chain.mdp.n_states(); ++x)
    for (int a2 = 0; a2 < chain.mdp.n_actions(); ++a2) q(x, a2) = u(rng);
  QFunction m1 = apply_multistep(chain.mdp, chain.target, chain.behavior, c, q);
  QFunction m2 = apply_marginalized(chain.mdp, chain.target, chain.behavior,
                                    trace_to_weights(chain.mdp, chain.behavior, c), q);
  check("multistep equals marginalized with trace weights", max_abs_diff(m1.values(), m2.values()) < 1e-8);

  QFunction qpi = exact_q(chain.mdp, chain.target);
  LpSolution s = simplex_solve(build_dual_lp(chain.mdp, chain.target, {0, 0}));
  check("dual LP recovers Q^pi", s.status == LpStatus::kOptimal && std::fabs(s.objective_value - qpi(0, 0)) < 1e-8);

  ExperimentConfig cfg;
  cfg.chain = spec;
  cfg.n_seeds = 2;
  cfg.n_iterations = 20;
  cfg.threads = 1;
  cfg.operators = {OperatorKind::kRetrace};
  MetricSeries r1 = run_evaluation(cfg, OperatorKind::kRetrace);
  MetricSeries r2 = run_evaluation(cfg, OperatorKind::kRetrace);
  check("evaluation is reproducible", series_csv(r1) == series_csv(r2));
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular off-policy evaluation experiments"};
  app.require_subcommand(1);
  Common ce, co, cp, cw;
  auto* eval = app.add_subcommand("eval", "Relative-error curves for each configured operator");
  add_common(eval, ce);
  auto* ow = app.add_subcommand("openworld", "Value heatmaps at the configured checkpoints");
  add_common(ow, co);
  auto* pi = app.add_subcommand("pi", "Policy iteration with sampled evaluation");
  add_common(pi, cp);
  std::string pi_mode;
  pi->add_option("--mode", pi_mode, "soft or hard (overrides 'pi.mode')");
  auto* wt = app.add_subcommand("weights", "Export per-state TD-weight grids");
  add_common(wt, cw);
  bool estimated = false;
  wt->add_flag("--estimated", estimated, "Use tabular estimates instead of exact weights");
  auto* st = app.add_subcommand("selftest", "Run built-in consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*eval) print_files(write_evaluation(resolve(ce)));
    else if (*ow) print_files(write_openworld(resolve(co)));
    else if (*pi) {
      if (!pi_mode.empty()) cp.overrides.push_back("pi.mode=" + pi_mode);
      print_files(write_policy_iteration(resolve(cp)));
    } else if (*wt) print_files(write_weights(resolve(cw), estimated));
    else if (*st) {
      int f = selftest();
      std::cout << (f == 0 ? "selftest passed" : "selftest failed") << '\n';
      return f == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
