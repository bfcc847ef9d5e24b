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

#include "lprobe/analysis.hpp"

#include "lprobe/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace lprobe {
namespace {

std::string fmt17(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(std::filesystem::path const &path, std::string const &text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out)
  {
    throw Error("failed writing " + path.string());
  }
}

}  // namespace

double accuracy_from_logits(Tensor const &logits, std::span<int const> labels)
{
  if (labels.empty())
  {
    throw InvalidArgument("accuracy of an empty dataset");
  }
  std::size_t const rows = logits.rows();
  std::size_t const k    = logits.cols();
  if (rows != labels.size())
  {
    throw ShapeError("accuracy: " + std::to_string(rows) + " logit rows for " +
                     std::to_string(labels.size()) + " labels");
  }
  auto const  f       = logits.data();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows; ++i)
  {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
    {
      if (f[i * k + j] > f[i * k + best])
      {
        best = j;
      }
    }
    correct += static_cast<int>(best) == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(rows);
}

double accuracy(Model const &model, Dataset const &data)
{
  if (data.empty())
  {
    throw InvalidArgument("accuracy of an empty dataset");
  }
  return accuracy_from_logits(model.forward(data.features()), data.labels());
}

double pearson(std::span<double const> xs, std::span<double const> ys)
{
  if (xs.size() != ys.size())
  {
    throw InvalidArgument("pearson: inputs differ in length");
  }
  if (xs.size() < 3)
  {
    throw InvalidArgument("pearson: need at least 3 points");
  }
  auto constant = [](std::span<double const> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
  };
  if (constant(xs) || constant(ys))
  {
    throw InvalidArgument("undefined correlation: constant input");
  }
  double const n  = static_cast<double>(xs.size());
  double       mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    double const dx = xs[i] - mx;
    double const dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
  {
    throw InvalidArgument("undefined correlation: zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string_view to_string(Grouping grouping)
{
  switch (grouping)
  {
  case Grouping::kPerModel:
    return "model";
  case Grouping::kPerObjective:
    return "objective";
  case Grouping::kPooled:
    return "pooled";
  }
  return "unknown";
}

std::vector<CorrelationResult> correlate_measures(std::span<MeasureReport const> reports,
                                                  Grouping grouping)
{
  // Groups keep first-appearance order so output follows the input order.
  std::vector<std::string>                                 order;
  std::map<std::string, std::vector<MeasureReport const *>> groups;
  for (auto const &r : reports)
  {
    std::string key;
    switch (grouping)
    {
    case Grouping::kPerModel:
      key = "model:" + r.model_id;
      break;
    case Grouping::kPerObjective:
      key = "objective:" + r.objective;
      break;
    case Grouping::kPooled:
      key = "pooled:all";
      break;
    }
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted)
    {
      order.push_back(key);
    }
    it->second.push_back(&r);
  }

  std::vector<CorrelationResult> out;
  for (auto const &key : order)
  {
    auto const &rows = groups[key];
    for (auto measure : kMeasureNames)
    {
      CorrelationResult   res{key, std::string(measure), std::nullopt, 0, 0, {}};
      std::vector<double> xs, ys;
      for (auto const *r : rows)
      {
        if (!r->error.empty())
        {
          ++res.excluded;
          continue;
        }
        double x = 0.0;
        if (measure == "margin")
        {
          x = r->margin;
        }
        else if (measure == "phi_difference")
        {
          x = r->phi_difference;
        }
        else if (measure == "phi_alpha")
        {
          if (!r->phi_alpha)
          {
            ++res.excluded;
            continue;
          }
          x = *r->phi_alpha;
        }
        else
        {
          x = r->frobenius_distance;
        }
        xs.push_back(x);
        ys.push_back(r->accuracy);
      }
      res.n = xs.size();
      if (xs.size() < 3)
      {
        res.note = "fewer than 3 usable rows";
      }
      else
      {
        try
        {
          res.r = pearson(xs, ys);
        }
        catch (InvalidArgument const &e)
        {
          res.note = e.what();
        }
      }
      out.push_back(std::move(res));
    }
  }
  return out;
}

std::string correlations_csv(std::span<CorrelationResult const> results)
{
  std::string out = "group,measure,r,n\n";
  for (auto const &c : results)
  {
    out += c.group + "," + c.measure + "," + (c.r ? fmt17(*c.r) : "") + "," + std::to_string(c.n) +
           "\n";
  }
  return out;
}

// --- experiments ---------------------------------------------------------------

ExperimentPlan default_plan()
{
  ExperimentPlan plan;
  for (auto o : {Objective::kBaseline, Objective::kSam, Objective::kFisher, Objective::kConsistency})
  {
    TrainConfig c;
    c.objective = o;
    plan.trainings.push_back(c);
  }
  for (std::uint64_t s = 1; s <= 8; ++s)
  {
    plan.seeds.push_back(s);
  }
  return plan;
}

void validate(ExperimentPlan const &plan)
{
  validate(plan.suite);
  validate(plan.model);
  if (plan.model.input_dim != plan.suite.input_dim || plan.model.num_classes != plan.suite.num_classes)
  {
    throw InvalidArgument("model input_dim/num_classes must match the suite");
  }
  if (plan.trainings.empty())
  {
    throw InvalidArgument("experiment needs at least one training objective");
  }
  if (plan.seeds.empty())
  {
    throw InvalidArgument("experiment needs at least one seed");
  }
  for (auto const &t : plan.trainings)
  {
    validate(t);
  }
  validate(plan.measures.sharpness);
  validate(plan.measures.alpha);
  if (plan.jobs < 1)
  {
    throw InvalidArgument("jobs must be >= 1");
  }
}

namespace {

nlohmann::json train_json(TrainConfig const &c)
{
  return {{"objective", std::string(to_string(c.objective))},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"sam_rho", c.sam_rho},
          {"fisher_lambda", c.fisher_lambda},
          {"consistency_lambda", c.consistency_lambda},
          {"view_noise_sigma", c.view_noise_sigma}};
}

std::vector<std::string> run_ids(ExperimentPlan const &plan)
{
  std::map<Objective, int> per_objective;
  for (auto const &t : plan.trainings)
  {
    ++per_objective[t.objective];
  }
  std::map<Objective, int> seen;
  std::vector<std::string> ids;
  for (auto const &t : plan.trainings)
  {
    std::string base = std::string(to_string(t.objective));
    int const   k    = seen[t.objective]++;
    if (per_objective[t.objective] > 1)
    {
      base += "-v" + std::to_string(k);
    }
    for (auto s : plan.seeds)
    {
      ids.push_back(base + "-s" + std::to_string(s));
    }
  }
  return ids;
}

}  // namespace

std::string plan_json(ExperimentPlan const &plan)
{
  nlohmann::json j;
  j["suite"]          = nlohmann::json::parse(suite_manifest_json(plan.suite));
  j["model"]          = {{"input_dim", plan.model.input_dim},
                         {"hidden_dims", plan.model.hidden_dims},
                         {"num_classes", plan.model.num_classes},
                         {"activation", "relu"}};
  j["trainings"]      = nlohmann::json::array();
  for (auto const &t : plan.trainings)
  {
    j["trainings"].push_back(train_json(t));
  }
  j["seeds"]          = plan.seeds;
  auto const &m       = plan.measures;
  j["measure"]        = {{"noise_scale", m.sharpness.noise_scale},
                         {"ascent_coeff", m.sharpness.ascent_coeff},
                         {"radius_lambda", m.sharpness.radius_lambda},
                         {"batch_size", m.sharpness.batch_size},
                         {"alpha_target_offset", m.alpha.loss_target_offset},
                         {"alpha_ascent_steps", m.alpha.ascent_steps},
                         {"alpha_search_iters", m.alpha.binary_search_iters},
                         {"alpha_lo", m.alpha.alpha_lo},
                         {"alpha_hi", m.alpha.alpha_hi},
                         {"noise_sweep", m.noise_sweep}};
  j["seed_usage"]     = "each run seed sets model init_seed, train seed and measure seeds";
  return j.dump(2) + "\n";
}

bool ExperimentBundle::partial() const
{
  return std::any_of(runs.begin(), runs.end(), [](RunStatus const &r) { return !r.ok; });
}

std::vector<StabilityRow> stability_table(std::span<MeasureReport const> reports)
{
  // objective -> model_id -> accuracies, in first-appearance order
  std::vector<std::string>                                        objectives;
  std::map<std::string, std::vector<std::string>>                 models;
  std::map<std::string, std::pair<double, std::size_t>>           per_model;
  for (auto const &r : reports)
  {
    if (!r.error.empty())
    {
      continue;
    }
    if (std::find(objectives.begin(), objectives.end(), r.objective) == objectives.end())
    {
      objectives.push_back(r.objective);
    }
    auto &ids = models[r.objective];
    if (std::find(ids.begin(), ids.end(), r.model_id) == ids.end())
    {
      ids.push_back(r.model_id);
    }
    auto &acc = per_model[r.model_id];
    acc.first += r.accuracy;
    acc.second += 1;
  }
  std::vector<StabilityRow> out;
  for (auto const &o : objectives)
  {
    std::vector<double> means;
    for (auto const &id : models[o])
    {
      auto const &[sum, n] = per_model[id];
      means.push_back(sum / static_cast<double>(n));
    }
    double mean = 0.0;
    for (double m : means)
    {
      mean += m;
    }
    mean /= static_cast<double>(means.size());
    double var = 0.0;
    for (double m : means)
    {
      var += (m - mean) * (m - mean);
    }
    double const sd = means.size() > 1 ? std::sqrt(var / static_cast<double>(means.size() - 1)) : 0.0;
    out.push_back({o, mean, sd, means.size()});
  }
  return out;
}

std::string stability_csv(std::span<StabilityRow const> rows)
{
  std::string out = "objective,mean_acc,std_acc\n";
  for (auto const &r : rows)
  {
    out += r.objective + "," + fmt17(r.mean_accuracy) + "," + fmt17(r.std_accuracy) + "\n";
  }
  return out;
}

ExperimentBundle run_experiment(ExperimentPlan const &plan, ProgressCallback progress)
{
  validate(plan);
  DomainSuite const suite = make_domain_suite(plan.suite);
  auto const        ids   = run_ids(plan);

  struct Job
  {
    TrainConfig   config;
    std::uint64_t seed;
    std::string   id;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < plan.trainings.size(); ++t)
  {
    for (std::size_t s = 0; s < plan.seeds.size(); ++s)
    {
      TrainConfig c = plan.trainings[t];
      c.seed        = plan.seeds[s];
      jobs.push_back({c, plan.seeds[s], ids[t * plan.seeds.size() + s]});
    }
  }

  struct Outcome
  {
    RunStatus                  status;
    std::vector<MeasureReport> reports;
    std::string                history;
  };
  std::vector<Outcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex               progress_mutex;

  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
    {
      auto const &job = jobs[i];
      Outcome     out;
      out.status.run_id    = job.id;
      out.status.objective = std::string(to_string(job.config.objective));
      out.status.seed      = job.seed;
      try
      {
        ModelSpec spec = plan.model;
        spec.init_seed = job.seed;
        auto result    = train(Model(spec), suite.anchor, job.config);

        MeasureConfigs mc  = plan.measures;
        mc.sharpness.seed  = job.seed;
        mc.alpha.seed      = job.seed;
        out.reports        = measure_all(result.model, suite, mc,
                                         RunLabel{job.id, out.status.objective, job.seed});
        out.history        = history_csv(result);
        out.status.ok      = true;
        out.status.best_epoch = result.best_epoch;
        out.status.best_val_accuracy =
            result.history[static_cast<std::size_t>(result.best_epoch - 1)].val_accuracy;
        out.status.message = "ok";
      }
      catch (std::exception const &e)
      {
        out.status.ok      = false;
        out.status.message = e.what();
      }
      if (progress)
      {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(out.status);
      }
      outcomes[i] = std::move(out);
    }
  };

  std::size_t const        threads = std::min<std::size_t>(static_cast<std::size_t>(plan.jobs), jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t)
  {
    pool.emplace_back(worker);
  }
  worker();
  for (auto &th : pool)
  {
    th.join();
  }

  ExperimentBundle bundle;
  for (auto &o : outcomes)
  {
    bundle.runs.push_back(o.status);
    bundle.histories.push_back(std::move(o.history));
    for (auto &r : o.reports)
    {
      if (!r.error.empty())
      {
        bundle.warnings.push_back(r.model_id + "/" + r.domain + ": " + r.error);
      }
      bundle.reports.push_back(std::move(r));
    }
  }
  for (auto g : {Grouping::kPerModel, Grouping::kPerObjective, Grouping::kPooled})
  {
    auto rows = correlate_measures(bundle.reports, g);
    for (auto &c : rows)
    {
      if (!c.r && c.note.find("fewer than 3") != std::string::npos)
      {
        bundle.warnings.push_back(c.group + "/" + c.measure + ": skipped, " + c.note);
      }
      bundle.correlations.push_back(std::move(c));
    }
  }
  bundle.stability = stability_table(bundle.reports);
  return bundle;
}

void write_bundle(ExperimentBundle const &bundle, ExperimentPlan const &plan,
                  std::filesystem::path const &dir)
{
  std::filesystem::create_directories(dir / "history");
  write_text(dir / "plan.json", plan_json(plan));
  write_text(dir / "reports.csv", reports_csv(bundle.reports, plan.measures.noise_sweep));
  write_text(dir / "correlations.csv", correlations_csv(bundle.correlations));
  write_text(dir / "stability.csv", stability_csv(bundle.stability));
  for (std::size_t i = 0; i < bundle.runs.size(); ++i)
  {
    if (bundle.runs[i].ok)
    {
      write_text(dir / "history" / (bundle.runs[i].run_id + ".csv"), bundle.histories[i]);
    }
  }

  nlohmann::json meta;
  meta["groupings"] = {
      {"model", "across shifted domains within one trained model (one objective, one seed)"},
      {"objective", "all seeds of one objective pooled"},
      {"pooled", "every report of every run"}};
  meta["note"] =
      "per-model coefficients use a single seed; objective and pooled groups mix seeds. "
      "Both views are emitted because either may correspond to a per-objective table.";
  meta["runs"] = nlohmann::json::array();
  for (auto const &r : bundle.runs)
  {
    meta["runs"].push_back({{"run_id", r.run_id},
                            {"objective", r.objective},
                            {"seed", r.seed},
                            {"ok", r.ok},
                            {"best_epoch", r.best_epoch},
                            {"message", r.message}});
  }
  meta["exclusions"] = nlohmann::json::array();
  for (auto const &c : bundle.correlations)
  {
    if (c.excluded > 0)
    {
      meta["exclusions"].push_back({{"group", c.group}, {"measure", c.measure}, {"excluded", c.excluded}});
    }
  }
  meta["warnings"] = bundle.warnings;
  meta["partial"]  = bundle.partial();
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
}

}  // namespace lprobe
