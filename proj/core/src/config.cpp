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

#include "lprobe/config.hpp"

#include "lprobe/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace lprobe {
namespace {

char const *const kSectionOrder[] = {"suite", "model", "train", "measure", "experiment"};

std::string trim(std::string const &s)
{
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
  {
    return {};
  }
  auto const e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string const &value)
{
  std::vector<std::string> out;
  if (trim(value).empty())
  {
    return out;
  }
  std::stringstream ss(value);
  std::string       item;
  while (std::getline(ss, item, ','))
  {
    out.push_back(trim(item));
  }
  return out;
}

std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename Int>
Int to_int(std::string const &s)
{
  Int         v{};
  auto const  r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size())
  {
    throw InvalidArgument("expected an integer, got '" + s + "'");
  }
  return v;
}

double to_double(std::string const &s)
{
  double     v = 0.0;
  auto const r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
  {
    throw InvalidArgument("expected a finite number, got '" + s + "'");
  }
  return v;
}

template <typename T>
std::string join(std::vector<T> const &xs, std::function<std::string(T const &)> const &f)
{
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    out += (i ? "," : "") + f(xs[i]);
  }
  return out;
}

struct Field
{
  std::function<void(Config &, std::string const &)> set;
  std::function<std::string(Config const &)>         get;
};

using FieldTable = std::vector<std::pair<std::string, Field>>;

template <typename Get>
Field size_field(Get ref)
{
  return {[ref](Config &c, std::string const &v) { ref(c) = to_int<std::size_t>(v); },
          [ref](Config const &c) { return std::to_string(ref(const_cast<Config &>(c))); }};
}

template <typename Get>
Field u64_field(Get ref)
{
  return {[ref](Config &c, std::string const &v) { ref(c) = to_int<std::uint64_t>(v); },
          [ref](Config const &c) { return std::to_string(ref(const_cast<Config &>(c))); }};
}

template <typename Get>
Field int_field(Get ref)
{
  return {[ref](Config &c, std::string const &v) { ref(c) = to_int<int>(v); },
          [ref](Config const &c) { return std::to_string(ref(const_cast<Config &>(c))); }};
}

template <typename Get>
Field double_field(Get ref)
{
  return {[ref](Config &c, std::string const &v) { ref(c) = to_double(v); },
          [ref](Config const &c) { return fmt(ref(const_cast<Config &>(c))); }};
}

#define LPROBE_REF(expr) [](Config & c) -> auto & { return c.expr; }

std::map<std::string, FieldTable> const &field_tables()
{
  static std::map<std::string, FieldTable> const tables = [] {
    std::map<std::string, FieldTable> t;
    t["suite"] = {
        {"num_classes", size_field(LPROBE_REF(suite.num_classes))},
        {"input_dim", size_field(LPROBE_REF(suite.input_dim))},
        {"prototypes_seed", u64_field(LPROBE_REF(suite.prototypes_seed))},
        {"gen_seed", u64_field(LPROBE_REF(suite.gen_seed))},
        {"train_count", size_field(LPROBE_REF(suite.counts.train))},
        {"val_count", size_field(LPROBE_REF(suite.counts.val))},
        {"test_count", size_field(LPROBE_REF(suite.counts.test))},
        {"eval_count", size_field(LPROBE_REF(suite.counts.eval))},
        {"noise_sigma", double_field(LPROBE_REF(suite.noise_sigma))},
        {"shifted_domains", size_field(LPROBE_REF(suite.shifted_domains))},
        {"shift_step", double_field(LPROBE_REF(suite.shift_step))},
        {"shift_bias_norm", double_field(LPROBE_REF(suite.shift_bias_norm))},
    };
    t["model"] = {
        {"hidden_dims",
         {[](Config &c, std::string const &v) {
            c.model.hidden_dims.clear();
            for (auto const &x : split_list(v))
            {
              c.model.hidden_dims.push_back(to_int<std::size_t>(x));
            }
          },
          [](Config const &c) {
            return join<std::size_t>(c.model.hidden_dims,
                                     [](std::size_t const &x) { return std::to_string(x); });
          }}},
        {"activation",
         {[](Config &, std::string const &v) {
            if (v != "relu")
            {
              throw InvalidArgument("unsupported activation '" + v + "' (only relu)");
            }
          },
          [](Config const &) { return std::string("relu"); }}},
        {"init_seed", u64_field(LPROBE_REF(model.init_seed))},
    };
    t["train"] = {
        {"objective",
         {[](Config &c, std::string const &v) { c.train.objective = parse_objective(v); },
          [](Config const &c) { return std::string(to_string(c.train.objective)); }}},
        {"epochs", int_field(LPROBE_REF(train.epochs))},
        {"batch_size", size_field(LPROBE_REF(train.batch_size))},
        {"learning_rate", double_field(LPROBE_REF(train.learning_rate))},
        {"weight_decay", double_field(LPROBE_REF(train.weight_decay))},
        {"beta1", double_field(LPROBE_REF(train.beta1))},
        {"beta2", double_field(LPROBE_REF(train.beta2))},
        {"eps", double_field(LPROBE_REF(train.eps))},
        {"seed", u64_field(LPROBE_REF(train.seed))},
        {"sam_rho", double_field(LPROBE_REF(train.sam_rho))},
        {"fisher_lambda", double_field(LPROBE_REF(train.fisher_lambda))},
        {"consistency_lambda", double_field(LPROBE_REF(train.consistency_lambda))},
        {"view_noise_sigma", double_field(LPROBE_REF(train.view_noise_sigma))},
    };
    t["measure"] = {
        {"noise_scale", double_field(LPROBE_REF(measure.sharpness.noise_scale))},
        {"ascent_coeff", double_field(LPROBE_REF(measure.sharpness.ascent_coeff))},
        {"radius_lambda", double_field(LPROBE_REF(measure.sharpness.radius_lambda))},
        {"batch_size", size_field(LPROBE_REF(measure.sharpness.batch_size))},
        {"seed",
         {[](Config &c, std::string const &v) {
            c.measure.sharpness.seed = to_int<std::uint64_t>(v);
            c.measure.alpha.seed     = c.measure.sharpness.seed;
          },
          [](Config const &c) { return std::to_string(c.measure.sharpness.seed); }}},
        {"alpha_target_offset", double_field(LPROBE_REF(measure.alpha.loss_target_offset))},
        {"alpha_ascent_steps", int_field(LPROBE_REF(measure.alpha.ascent_steps))},
        {"alpha_search_iters", int_field(LPROBE_REF(measure.alpha.binary_search_iters))},
        {"alpha_lo", double_field(LPROBE_REF(measure.alpha.alpha_lo))},
        {"alpha_hi", double_field(LPROBE_REF(measure.alpha.alpha_hi))},
        {"noise_sweep",
         {[](Config &c, std::string const &v) {
            c.measure.noise_sweep.clear();
            for (auto const &x : split_list(v))
            {
              c.measure.noise_sweep.push_back(to_double(x));
            }
          },
          [](Config const &c) {
            return join<double>(c.measure.noise_sweep, [](double const &x) { return fmt(x); });
          }}},
    };
    t["experiment"] = {
        {"objectives",
         {[](Config &c, std::string const &v) {
            c.experiment.objectives.clear();
            for (auto const &x : split_list(v))
            {
              c.experiment.objectives.push_back(parse_objective(x));
            }
          },
          [](Config const &c) {
            return join<Objective>(c.experiment.objectives,
                                   [](Objective const &o) { return std::string(to_string(o)); });
          }}},
        {"seeds", size_field(LPROBE_REF(experiment.seeds))},
        {"first_seed", u64_field(LPROBE_REF(experiment.first_seed))},
        {"jobs", int_field(LPROBE_REF(experiment.jobs))},
    };
    return t;
  }();
  return tables;
}

#undef LPROBE_REF

void sync_model(Config &c)
{
  c.model.input_dim   = c.suite.input_dim;
  c.model.num_classes = c.suite.num_classes;
}

}  // namespace

Config default_config()
{
  Config c;
  sync_model(c);
  return c;
}

Config parse_config(std::string const &text)
{
  Config                                             c = default_config();
  auto const                                        &tables = field_tables();
  std::string                                        section;
  std::map<std::string, std::map<std::string, int>>  seen;
  std::istringstream                                 in(text);
  std::string                                        raw;
  int                                                line_no = 0;
  while (std::getline(in, raw))
  {
    ++line_no;
    auto const hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty() || line[0] == ';')
    {
      continue;
    }
    if (line.front() == '[')
    {
      if (line.back() != ']')
      {
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header", line_no);
      }
      section = trim(line.substr(1, line.size() - 2));
      if (tables.count(section) == 0)
      {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section + "]",
                          line_no);
      }
      if (!c.sections.insert(section).second)
      {
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate section [" + section + "]",
                          line_no);
      }
      continue;
    }
    auto const eq = line.find('=');
    if (eq == std::string::npos)
    {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'", line_no);
    }
    std::string const key   = trim(line.substr(0, eq));
    std::string const value = trim(line.substr(eq + 1));
    if (section.empty())
    {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' outside any section",
                        line_no, key);
    }
    auto const &table = tables.at(section);
    auto        it    = std::find_if(table.begin(), table.end(),
                                     [&](auto const &f) { return f.first == key; });
    if (it == table.end())
    {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "' in [" +
                            section + "]",
                        line_no, key);
    }
    if (auto [prev, inserted] = seen[section].emplace(key, line_no); !inserted)
    {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key +
                            "' (first on line " + std::to_string(prev->second) + ")",
                        line_no, key);
    }
    try
    {
      it->second.set(c, value);
    }
    catch (InvalidArgument const &e)
    {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "': " + e.what(),
                        line_no, key);
    }
  }
  sync_model(c);
  return c;
}

Config load_config(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(Config const &config)
{
  auto const &tables = field_tables();
  std::string out;
  for (auto const *section : kSectionOrder)
  {
    if (!out.empty())
    {
      out += "\n";
    }
    out += "[" + std::string(section) + "]\n";
    for (auto const &[key, field] : tables.at(section))
    {
      out += key + " = " + field.get(config) + "\n";
    }
  }
  return out;
}

void validate(Config const &config)
{
  try
  {
    validate(suite_spec(config));
    validate(config.model);
    validate(config.train);
    validate(config.measure.sharpness);
    validate(config.measure.alpha);
    for (double s : config.measure.noise_sweep)
    {
      if (!(s > 0.0))
      {
        throw InvalidArgument("noise_sweep entries must be > 0");
      }
    }
    if (config.experiment.objectives.empty() || config.experiment.seeds == 0 ||
        config.experiment.jobs < 1)
    {
      throw InvalidArgument("experiment needs >= 1 objective, >= 1 seed and jobs >= 1");
    }
  }
  catch (ConfigError const &)
  {
    throw;
  }
  catch (InvalidArgument const &e)
  {
    throw ConfigError(e.what());
  }
}

void require_section(Config const &config, std::string const &section)
{
  if (config.sections.count(section) == 0)
  {
    throw ConfigError("missing required section [" + section + "]", 0, section);
  }
}

SuiteSpec suite_spec(Config const &config)
{
  auto const &p = config.suite;
  SuiteSpec   s;
  s.num_classes       = p.num_classes;
  s.input_dim         = p.input_dim;
  s.prototypes_seed   = p.prototypes_seed;
  s.gen_seed          = p.gen_seed;
  s.counts            = p.counts;
  s.anchor.noise_sigma = p.noise_sigma;
  s.shifted = evenly_shifted_domains(p.shifted_domains, p.shift_step, p.noise_sigma,
                                     p.shift_bias_norm, p.input_dim, p.gen_seed);
  return s;
}

ExperimentPlan experiment_plan(Config const &config)
{
  ExperimentPlan plan;
  plan.suite = suite_spec(config);
  plan.model = config.model;
  for (auto o : config.experiment.objectives)
  {
    TrainConfig t = config.train;
    t.objective   = o;
    plan.trainings.push_back(t);
  }
  plan.seeds.clear();
  for (std::size_t i = 0; i < config.experiment.seeds; ++i)
  {
    plan.seeds.push_back(config.experiment.first_seed + i);
  }
  plan.measures = config.measure;
  plan.jobs     = config.experiment.jobs;
  return plan;
}

std::optional<std::uint64_t> resolve_seed_override(std::optional<std::uint64_t> flag,
                                                   char const *env_value)
{
  if (flag)
  {
    return flag;
  }
  if (env_value != nullptr && *env_value != '\0')
  {
    try
    {
      return to_int<std::uint64_t>(trim(env_value));
    }
    catch (InvalidArgument const &e)
    {
      throw ConfigError(std::string("LPROBE_SEED: ") + e.what(), 0, "LPROBE_SEED");
    }
  }
  return std::nullopt;
}

void apply_seed(Config &config, std::uint64_t seed)
{
  config.train.seed             = seed;
  config.model.init_seed        = seed;
  config.measure.sharpness.seed = seed;
  config.measure.alpha.seed     = seed;
}

}  // namespace lprobe
