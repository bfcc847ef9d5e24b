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
#include "lprobe/config.hpp"
#include "lprobe/datagen.hpp"
#include "lprobe/error.hpp"
#include "lprobe/measures.hpp"
#include "lprobe/model.hpp"
#include "lprobe/objectives.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace lprobe;
namespace fs = std::filesystem;

enum ExitCode
{
  kOk            = 0,
  kFailure       = 1,
  kConfigError   = 2,
  kDivergence    = 3,
  kArtifactError = 4,
  kPartial       = 5,
};

/// Artifact on disk is missing, malformed or inconsistent with the request.
class ArtifactError : public Error
{
public:
  using Error::Error;
};

struct Common
{
  std::string   config_path;
  std::uint64_t seed = 0;
  CLI::Option  *seed_option = nullptr;
};

Config read_config(Common const &common)
{
  Config cfg = common.config_path.empty() ? default_config() : load_config(common.config_path);
  std::optional<std::uint64_t> flag;
  if (common.seed_option != nullptr && common.seed_option->count() > 0)
  {
    flag = common.seed;
  }
  if (auto const seed = resolve_seed_override(flag, std::getenv("LPROBE_SEED")))
  {
    apply_seed(cfg, *seed);
    cfg.experiment.first_seed = *seed;
  }
  return cfg;
}

DomainSuite read_suite(std::string const &dir)
{
  try
  {
    return load_suite(dir);
  }
  catch (Error const &e)
  {
    throw ArtifactError(std::string("cannot load suite: ") + e.what());
  }
}

void write_file(fs::path const &path, std::string const &text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out)
  {
    throw Error("failed writing " + path.string());
  }
}

/// Body lines of one section of a serialized config.
std::string section_text(std::string const &text, std::string const &section)
{
  auto const start = text.find("[" + section + "]\n");
  auto const body  = start + section.size() + 3;
  auto const end   = text.find("\n[", body);
  return text.substr(body, end == std::string::npos ? std::string::npos : end - body);
}

std::vector<std::string> split_lines(std::string const &text)
{
  std::vector<std::string> out;
  std::size_t              pos = 0;
  while (pos < text.size())
  {
    auto const nl = text.find('\n', pos);
    auto const line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    if (!line.empty())
    {
      out.push_back(line);
    }
    pos = nl == std::string::npos ? text.size() : nl + 1;
  }
  return out;
}

int cmd_gen_data(Common const &common, std::string const &out)
{
  Config const cfg = read_config(common);
  require_section(cfg, "suite");
  validate(cfg);
  DomainSuite const suite = make_domain_suite(suite_spec(cfg));
  write_suite(suite, out);
  auto const &c = suite.spec.counts;
  std::printf("anchor: train=%zu val=%zu test=%zu\n", c.train, c.val, c.test);
  std::printf("shifted domains: %zu (eval=%zu each)\n", suite.shifted.size(), c.eval);
  for (auto const &d : suite.shifted)
  {
    std::printf("  %-10s theta=%.4f\n", d.spec.name.c_str(), d.spec.shift_angle);
  }
  return kOk;
}

int cmd_train(Common const &common, std::string const &suite_dir, std::string const &out,
              CLI::App const &sub, std::string const &objective, int epochs, std::size_t batch_size)
{
  Config cfg = read_config(common);
  require_section(cfg, "model");
  require_section(cfg, "train");
  if (sub.count("--objective") > 0)
  {
    cfg.train.objective = parse_objective(objective);
  }
  if (sub.count("--epochs") > 0)
  {
    cfg.train.epochs = epochs;
  }
  if (sub.count("--batch-size") > 0)
  {
    cfg.train.batch_size = batch_size;
  }
  DomainSuite const suite = read_suite(suite_dir);
  cfg.suite.input_dim     = suite.spec.input_dim;
  cfg.suite.num_classes   = suite.spec.num_classes;
  cfg.model.input_dim     = suite.spec.input_dim;
  cfg.model.num_classes   = suite.spec.num_classes;
  validate(cfg.model);
  validate(cfg.train);

  auto const result = train(Model(cfg.model), suite.anchor, cfg.train);
  fs::create_directories(out);
  CheckpointMetadata meta;
  for (auto const &line : split_lines(section_text(serialize_config(cfg), "train")))
  {
    auto const eq = line.find(" = ");
    meta["train." + line.substr(0, eq)] = line.substr(eq + 3);
  }
  meta["objective"]  = std::string(to_string(cfg.train.objective));
  meta["best_epoch"] = std::to_string(result.best_epoch);
  save_checkpoint(result.model, fs::path(out) / "checkpoint.lpk", meta);
  write_history_csv(fs::path(out) / "history.csv", result);
  auto const &best = result.history[static_cast<std::size_t>(result.best_epoch - 1)];
  std::printf("best epoch %d, val accuracy %.4f\n", result.best_epoch, best.val_accuracy);
  return kOk;
}

int cmd_measure(Common const &common, std::string const &checkpoint_path,
                std::string const &suite_dir, std::string const &out, bool sweep)
{
  Config cfg = read_config(common);
  validate(cfg.measure.sharpness);
  validate(cfg.measure.alpha);
  Checkpoint ck = [&] {
    try
    {
      return load_checkpoint(checkpoint_path);
    }
    catch (Error const &e)
    {
      throw ArtifactError(std::string("cannot load checkpoint: ") + e.what());
    }
  }();
  DomainSuite const suite = read_suite(suite_dir);
  auto const       &spec  = ck.model.spec();
  if (spec.input_dim != suite.spec.input_dim || spec.num_classes != suite.spec.num_classes)
  {
    throw ArtifactError("checkpoint expects input_dim=" + std::to_string(spec.input_dim) +
                        " num_classes=" + std::to_string(spec.num_classes) + ", suite has " +
                        std::to_string(suite.spec.input_dim) + "/" +
                        std::to_string(suite.spec.num_classes));
  }
  if (sweep)
  {
    cfg.measure.noise_sweep.assign(kNoiseScaleCandidates.begin(), kNoiseScaleCandidates.end());
  }
  RunLabel label{fs::path(checkpoint_path).stem().string(), "unknown", cfg.measure.sharpness.seed};
  if (auto it = ck.metadata.find("objective"); it != ck.metadata.end())
  {
    label.objective = it->second;
  }
  auto const reports = measure_all(ck.model, suite, cfg.measure, label);
  if (fs::path(out).has_parent_path())
  {
    fs::create_directories(fs::path(out).parent_path());
  }
  write_file(out, reports_csv(reports, cfg.measure.noise_sweep));
  std::size_t failed = 0;
  for (auto const &r : reports)
  {
    failed += r.phi_alpha ? 0 : 1;
  }
  std::printf("%zu reports written to %s (%zu alpha-sharpness failures)\n", reports.size(),
              out.c_str(), failed);
  return kOk;
}

int cmd_experiment(Common const &common, std::string const &out, CLI::App const &sub, int jobs,
                   std::size_t seeds)
{
  Config cfg = read_config(common);
  if (sub.count("--jobs") > 0)
  {
    cfg.experiment.jobs = jobs;
  }
  if (sub.count("--seeds") > 0)
  {
    cfg.experiment.seeds = seeds;
  }
  validate(cfg);
  ExperimentPlan const plan = experiment_plan(cfg);
  auto const bundle = run_experiment(plan, [](RunStatus const &s) {
    std::fprintf(stderr, "run %-24s %s\n", s.run_id.c_str(), s.ok ? "ok" : s.message.c_str());
  });
  write_bundle(bundle, plan, out);

  std::printf("%-28s %-20s %10s %5s\n", "group", "measure", "r", "n");
  for (auto const &c : bundle.correlations)
  {
    if (c.group.rfind("objective:", 0) != 0)
    {
      continue;
    }
    std::string const r = c.r ? [&] {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%+.4f", *c.r);
      return std::string(buf);
    }()
                              : std::string("n/a");
    std::printf("%-28s %-20s %10s %5zu\n", c.group.c_str(), c.measure.c_str(), r.c_str(), c.n);
  }
  for (auto const &w : bundle.warnings)
  {
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  }
  if (bundle.partial())
  {
    std::fprintf(stderr, "partial failure:\n");
    for (auto const &s : bundle.runs)
    {
      std::fprintf(stderr, "  %-24s %s\n", s.run_id.c_str(), s.ok ? "ok" : s.message.c_str());
    }
    return kPartial;
  }
  return kOk;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"lprobe: flatness and margin probes for zero-shot transfer"};
  app.require_subcommand(1);

  Common common;
  auto   add_common = [&](CLI::App *sub) {
    sub->add_option("-c,--config", common.config_path, "configuration file")
        ->check(CLI::ExistingFile);
    common.seed_option = nullptr;
    return sub->add_option("--seed", common.seed, "seed override (beats LPROBE_SEED and the file)");
  };

  std::string out, suite_dir, checkpoint, objective;
  int         epochs = 0, jobs = 1;
  std::size_t batch_size = 0, seeds = 0;
  bool        sweep      = false;

  auto *gen           = app.add_subcommand("gen-data", "generate the domain suite");
  auto *gen_seed      = add_common(gen);
  gen->add_option("-o,--out", out, "output directory")->required();

  auto *tr       = app.add_subcommand("train", "train one model on the anchor domain");
  auto *tr_seed  = add_common(tr);
  tr->add_option("-s,--suite", suite_dir, "suite directory")->required();
  tr->add_option("-o,--out", out, "output directory")->required();
  tr->add_option("--objective", objective, "baseline, sam, fisher or consistency");
  tr->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
  tr->add_option("--batch-size", batch_size)->check(CLI::PositiveNumber);

  auto *me      = app.add_subcommand("measure", "measure a checkpoint on every shifted domain");
  auto *me_seed = add_common(me);
  me->add_option("-m,--checkpoint", checkpoint, "checkpoint file")->required();
  me->add_option("-s,--suite", suite_dir, "suite directory")->required();
  me->add_option("-o,--out", out, "reports CSV path")->required();
  me->add_flag("--sweep-noise", sweep, "repeat phi_difference for every candidate noise scale");

  auto *ex      = app.add_subcommand("experiment", "train and measure every objective and seed");
  auto *ex_seed = add_common(ex);
  ex->add_option("-o,--out", out, "output directory")->required();
  ex->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);
  ex->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);

  auto *df = app.add_subcommand("defaults", "print the defaults table as a configuration file");

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::ParseError const &e)
  {
    int const code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try
  {
    if (*gen)
    {
      common.seed_option = gen_seed;
      return cmd_gen_data(common, out);
    }
    if (*tr)
    {
      common.seed_option = tr_seed;
      return cmd_train(common, suite_dir, out, *tr, objective, epochs, batch_size);
    }
    if (*me)
    {
      common.seed_option = me_seed;
      return cmd_measure(common, checkpoint, suite_dir, out, sweep);
    }
    if (*ex)
    {
      common.seed_option = ex_seed;
      return cmd_experiment(common, out, *ex, jobs, seeds);
    }
    if (*df)
    {
      std::fputs(serialize_config(default_config()).c_str(), stdout);
      return kOk;
    }
  }
  catch (DivergenceError const &e)
  {
    std::fprintf(stderr, "diverged: %s (epoch %d, step %ld)\n", e.what(), e.epoch(), e.step());
    return kDivergence;
  }
  catch (ArtifactError const &e)
  {
    std::fprintf(stderr, "artifact error: %s\n", e.what());
    return kArtifactError;
  }
  catch (InvalidArgument const &e)
  {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  }
  catch (std::exception const &e)
  {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
