//------------------------------------------------------------------------------
//
//   Copyright 2026 The lprobe Authors
//
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.
//
//------------------------------------------------------------------------------

// Acceptance gate: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include "lprobe/analysis.hpp"
#include "lprobe/measures.hpp"
#include "lprobe/objectives.hpp"

#include "../support/properties.hpp"
#include "../support/random_graphs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace {

using namespace lprobe;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and thresholds.
constexpr double      kOracleRelTol        = 1e-12;
constexpr double      kAlphaOracleTol      = 1e-6;
constexpr double      kGradientRelTol      = 1e-4;
constexpr double      kFiniteDiffStep      = 1e-4;
constexpr std::size_t kGradientGraphs      = 100;
constexpr double      kMarginMinR          = 0.5;
constexpr double      kSharpnessMaxR       = -0.2;
constexpr std::size_t kSignSeedsRequired   = 6;
constexpr double      kSpeedRatio          = 3.0;
constexpr int         kSpeedTrials         = 5;
constexpr std::size_t kPropertyCases       = 1000;
constexpr double      kTimeBudgetSeconds   = 600.0;

int failures = 0;

void report(bool pass, std::string const &name, std::string const &detail, double seconds)
{
  std::printf("%s  %-28s %s [%.1fs]\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str(),
              seconds);
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

double since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(char const *format, double a, double b = 0.0, double c = 0.0)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

void algorithm_oracle()
{
  auto const                  t0 = Clock::now();
  proptest::QuadraticLoss const loss({2.0}, {0.0});  // L(w) = w^2
  SharpnessConfig             cfg;
  cfg.ascent_coeff  = 0.05;
  cfg.radius_lambda = 0.05;
  std::vector<double> const w0{0.0};
  std::vector<double> const eps{0.1};
  double const phi      = phi_difference_with_noise(w0, loss, cfg, eps).phi;
  double const expected = 3.025e-5;
  double const rel      = std::abs(phi - expected) / expected;
  report(rel <= kOracleRelTol, "difference_sharpness_oracle",
         fmt("phi=%.17g expected=%.17g rel=%.3g", phi, expected, rel), since(t0));
}

void alpha_oracle()
{
  auto const t0 = Clock::now();
  // L(u) = 1/2 (u - 1)^2 around W = 1, W0 = 0: worst case in the box is
  // alpha^2 / 2, target 0.1 gives alpha* = sqrt(0.2) and phi = 1 / (4 * 0.2).
  proptest::QuadraticLoss const loss({1.0}, {1.0});
  AlphaSharpnessConfig        cfg;
  cfg.binary_search_iters = 40;
  auto const   r          = phi_alpha(std::vector<double>{1.0}, std::vector<double>{0.0}, loss, cfg);
  double const phi        = r.phi.value_or(NAN);
  bool const   ok = r.phi && std::abs(r.alpha - std::sqrt(0.2)) <= kAlphaOracleTol &&
                  std::abs(phi - 1.25) <= kAlphaOracleTol;
  report(ok, "alpha_sharpness_oracle",
         fmt("alpha=%.10f phi=%.10f (expected %.10f, 1.25)", r.alpha, phi, std::sqrt(0.2)),
         since(t0));
}

void gradient_suite()
{
  auto const       t0 = Clock::now();
  std::size_t      bad = 0;
  double           worst = 0.0;
  std::set<OpKind> kinds;
  for (std::size_t s = 0; s < kGradientGraphs; ++s)
  {
    auto const g   = proptest::make_random_graph(1000 + s);
    double const e = proptest::gradient_relative_error(g, kFiniteDiffStep);
    worst          = std::max(worst, e);
    bad += e <= kGradientRelTol ? 0 : 1;
    kinds.insert(g.kinds.begin(), g.kinds.end());
  }
  bool const all_kinds = kinds.size() == 15;
  report(bad == 0 && all_kinds, "gradient_suite",
         fmt("%g graphs, %g failures, worst rel err %.3g", double(kGradientGraphs), double(bad),
             worst) +
             (all_kinds ? ", all op kinds" : ", missing op kinds"),
         since(t0));
}

void properties()
{
  struct Entry
  {
    char const                                                     *name;
    std::function<proptest::PropertyResult(std::size_t, std::uint64_t)> check;
  };
  Entry const entries[] = {
      {"prop_margin_shift", proptest::check_margin_shift_invariance},
      {"prop_projection_bound", proptest::check_projection_bound},
      {"prop_weight_restoration", proptest::check_weight_restoration},
      {"prop_pearson", proptest::check_pearson_properties},
      {"prop_kl_self_zero", proptest::check_kl_self_zero},
  };
  for (auto const &e : entries)
  {
    auto const t0 = Clock::now();
    auto const r  = e.check(kPropertyCases, 20260101);
    report(r.ok() && r.cases >= kPropertyCases, e.name,
           fmt("%g cases, %g failures", double(r.cases), double(r.failures)) +
               (r.first_failure.empty() ? "" : " first: " + r.first_failure),
           since(t0));
  }
}

void experiment_criteria()
{
  ExperimentPlan const plan = default_plan();

  auto const t0     = Clock::now();
  auto const first  = run_experiment(plan);
  double const run1 = since(t0);
  std::printf("info  experiment: %zu reports in %.1fs\n", first.reports.size(), run1);

  // Sign reproduction: baseline, per seed, across domains.
  {
    std::map<std::string, std::map<std::string, std::optional<double>>> by_model;
    for (auto const &c : first.correlations)
    {
      if (c.group.rfind("model:baseline-", 0) == 0)
      {
        by_model[c.group][c.measure] = c.r;
      }
    }
    std::size_t good = 0;
    std::string detail;
    for (auto const &[group, rs] : by_model)
    {
      auto const   m  = rs.at("margin");
      auto const   p  = rs.at("phi_difference");
      bool const   ok = m && p && *m >= kMarginMinR && *p <= kSharpnessMaxR;
      good += ok ? 1 : 0;
      std::printf("info  %s r(margin)=%+.3f r(phi_difference)=%+.3f %s\n", group.c_str(),
                  m.value_or(NAN), p.value_or(NAN), ok ? "ok" : "miss");
    }
    detail = fmt("%g of %g baseline seeds with r(margin)>=0.5 and r(phi_diff)<=-0.2", double(good),
                 double(by_model.size()));
    report(good >= kSignSeedsRequired && by_model.size() == 8, "sign_reproduction", detail, run1);
  }

  // Sharpness ordering at sigma_n = 0.01.
  {
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (auto const &r : first.reports)
    {
      if (r.error.empty())
      {
        sums[r.objective].first += r.phi_difference;
        sums[r.objective].second += 1;
      }
    }
    auto mean = [&](char const *o) { return sums[o].first / double(sums[o].second); };
    double const base = mean("baseline"), sam = mean("sam"), fisher = mean("fisher");
    std::printf("info  mean phi_difference: baseline=%.6g sam=%.6g fisher=%.6g consistency=%.6g\n",
                base, sam, fisher, mean("consistency"));
    bool const ok = plan.measures.sharpness.noise_scale == 0.01 && sam < base && fisher < base;
    report(ok, "sharpness_ordering", fmt("baseline=%.6g sam=%.6g fisher=%.6g", base, sam, fisher),
           run1);
  }

  report(run1 <= kTimeBudgetSeconds, "experiment_time_budget",
         fmt("%.1fs for the full plan (budget %.0fs)", run1, kTimeBudgetSeconds), run1);

  // Determinism: a second execution of the same plan.
  {
    auto const t1     = Clock::now();
    auto const second = run_experiment(plan);
    bool const same_reports =
        reports_csv(first.reports, plan.measures.noise_sweep) ==
        reports_csv(second.reports, plan.measures.noise_sweep);
    bool const same_corr =
        correlations_csv(first.correlations) == correlations_csv(second.correlations);
    report(same_reports && same_corr, "determinism",
           std::string("reports.csv ") + (same_reports ? "identical" : "DIFFERS") +
               ", correlations.csv " + (same_corr ? "identical" : "DIFFERS"),
           since(t1));
  }
}

void speed_criterion()
{
  auto const        t0    = Clock::now();
  ExperimentPlan    plan  = default_plan();
  DomainSuite const suite = make_domain_suite(plan.suite);
  ModelSpec         spec  = plan.model;
  spec.init_seed          = plan.seeds.front();
  TrainConfig tc          = plan.trainings.front();
  tc.seed                 = plan.seeds.front();
  Model const model       = train(Model(spec), suite.anchor, tc).model;

  SharpnessConfig sc = plan.measures.sharpness;
  sc.batch_size      = 8;
  sc.seed            = 1;
  AlphaSharpnessConfig ac = plan.measures.alpha;
  ac.seed                 = 1;
  auto const batch        = sharpness_batch(suite.shifted.front().eval, sc);
  auto const loss         = cross_entropy_loss(spec, batch);

  auto median_seconds = [](std::function<void()> const &f) {
    std::vector<double> ts;
    for (int i = 0; i < kSpeedTrials; ++i)
    {
      auto const s = Clock::now();
      f();
      ts.push_back(since(s));
    }
    std::sort(ts.begin(), ts.end());
    return ts[ts.size() / 2];
  };
  volatile double sink = 0.0;
  double const    td   = median_seconds([&] { sink = phi_difference(model, loss, sc); });
  double const    ta   = median_seconds([&] { sink = phi_alpha(model, loss, ac).alpha; });
  (void)sink;
  report(td <= ta / kSpeedRatio, "speed_ratio",
         fmt("phi_difference %.3gs, phi_alpha %.3gs, ratio %.1fx", td, ta, ta / td), since(t0));
}

}  // namespace

int main()
{
  algorithm_oracle();
  alpha_oracle();
  gradient_suite();
  properties();
  speed_criterion();
  experiment_criteria();
  std::printf("%s  %d criteria failed\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
