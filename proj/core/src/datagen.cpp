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

#include "lprobe/datagen.hpp"

#include "lprobe/error.hpp"
#include "lprobe/rng.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace lprobe {
namespace {

constexpr double      kPrototypeRadius = 3.0;
constexpr char const *kManifestFormat  = "lprobe-suite-1";

void validate_domain(DomainSpec const &d, std::size_t input_dim)
{
  if (d.name.empty())
  {
    throw InvalidArgument("domain name must not be empty");
  }
  if (!(d.shift_angle >= 0.0) || !std::isfinite(d.shift_angle))
  {
    throw InvalidArgument("domain '" + d.name + "': shift angle must be >= 0");
  }
  if (!(d.noise_sigma > 0.0) || !std::isfinite(d.noise_sigma))
  {
    throw InvalidArgument("domain '" + d.name + "': noise_sigma must be > 0");
  }
  if (!d.shift_bias.empty() && d.shift_bias.size() != input_dim)
  {
    throw InvalidArgument("domain '" + d.name + "': shift_bias must have " +
                          std::to_string(input_dim) + " entries");
  }
  for (double b : d.shift_bias)
  {
    if (!std::isfinite(b))
    {
      throw InvalidArgument("domain '" + d.name + "': non-finite shift_bias");
    }
  }
}

std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw FormatError("cannot open " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string_view s)
{
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
  {
    return {};
  }
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<DomainSpec> evenly_shifted_domains(std::size_t count, double angle_step,
                                               double noise_sigma, double bias_norm,
                                               std::size_t input_dim, std::uint64_t seed)
{
  std::vector<DomainSpec> out;
  for (std::size_t m = 1; m <= count; ++m)
  {
    char name[16];
    std::snprintf(name, sizeof name, "shift%02zu", m);
    DomainSpec d{name, angle_step * static_cast<double>(m), {}, noise_sigma};
    if (bias_norm > 0.0)
    {
      Rng                 rng(derive_seed(seed, {hash_name(name), 7}));
      std::vector<double> dir(input_dim);
      double              norm = 0.0;
      for (auto &x : dir)
      {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
      // Bias magnitude grows with the shift index, like the angle.
      double const mag = bias_norm * static_cast<double>(m) / static_cast<double>(count);
      for (auto &x : dir)
      {
        x = x / norm * mag;
      }
      d.shift_bias = std::move(dir);
    }
    out.push_back(std::move(d));
  }
  return out;
}

SuiteSpec default_suite_spec()
{
  SuiteSpec spec;
  spec.shifted = evenly_shifted_domains(14, 0.1, spec.anchor.noise_sigma, 0.0, spec.input_dim,
                                        spec.gen_seed);
  return spec;
}

void validate(SuiteSpec const &spec)
{
  if (spec.num_classes < 2)
  {
    throw InvalidArgument("suite needs at least 2 classes");
  }
  if (spec.input_dim < 2)
  {
    throw InvalidArgument("suite input_dim must be at least 2");
  }
  auto const &c = spec.counts;
  if (c.train == 0 || c.val == 0 || c.test == 0 || c.eval == 0)
  {
    throw InvalidArgument("suite split counts must be positive");
  }
  if (spec.shifted.empty())
  {
    throw InvalidArgument("suite needs at least one shifted domain");
  }
  validate_domain(spec.anchor, spec.input_dim);
  if (spec.anchor.shift_angle != 0.0)
  {
    throw InvalidArgument("anchor domain must have shift angle 0");
  }
  for (double b : spec.anchor.shift_bias)
  {
    if (b != 0.0)
    {
      throw InvalidArgument("anchor domain must have zero shift bias");
    }
  }
  std::set<std::string> names{spec.anchor.name};
  for (auto const &d : spec.shifted)
  {
    validate_domain(d, spec.input_dim);
    if (!names.insert(d.name).second)
    {
      throw InvalidArgument("duplicate domain name '" + d.name + "'");
    }
  }
}

Tensor givens_rotation(std::size_t dim, double angle, std::uint64_t seed)
{
  std::vector<std::size_t> order(dim);
  for (std::size_t i = 0; i < dim; ++i)
  {
    order[i] = i;
  }
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<double> r(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i)
  {
    r[i * dim + i] = 1.0;
  }
  double const c = std::cos(angle);
  double const s = std::sin(angle);
  for (std::size_t k = 0; k + 1 < dim; k += 2)
  {
    std::size_t const i = order[k], j = order[k + 1];
    r[i * dim + i] = c;
    r[i * dim + j] = -s;
    r[j * dim + i] = s;
    r[j * dim + j] = c;
  }
  return Tensor({dim, dim}, std::move(r));
}

Tensor make_prototypes(std::size_t num_classes, std::size_t input_dim, std::uint64_t seed)
{
  Rng                 rng(seed);
  std::vector<double> p(num_classes * input_dim);
  for (std::size_t k = 0; k < num_classes; ++k)
  {
    double norm = 0.0;
    for (std::size_t j = 0; j < input_dim; ++j)
    {
      p[k * input_dim + j] = rng.normal();
      norm += p[k * input_dim + j] * p[k * input_dim + j];
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < input_dim; ++j)
    {
      p[k * input_dim + j] *= kPrototypeRadius / norm;
    }
  }
  return Tensor({num_classes, input_dim}, std::move(p));
}

Dataset draw_samples(Tensor const &prototypes, DomainSpec const &domain, Tensor const &rotation,
                     std::size_t count, std::uint64_t seed)
{
  std::size_t const k = prototypes.rows();
  std::size_t const d = prototypes.cols();
  if (rotation.rows() != d || rotation.cols() != d)
  {
    throw ShapeError("rotation must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  validate_domain(domain, d);

  Rng              rng(seed);
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i)
  {
    labels[i] = static_cast<int>(i % k);
  }
  rng.shuffle(labels);

  auto const          proto = prototypes.data();
  auto const          rot   = rotation.data();
  std::vector<double> features(count * d);
  std::vector<double> raw(d);
  for (std::size_t i = 0; i < count; ++i)
  {
    auto const y = static_cast<std::size_t>(labels[i]);
    for (std::size_t j = 0; j < d; ++j)
    {
      raw[j] = proto[y * d + j] + domain.noise_sigma * rng.normal();
    }
    for (std::size_t r = 0; r < d; ++r)
    {
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j)
      {
        acc += rot[r * d + j] * raw[j];
      }
      if (!domain.shift_bias.empty())
      {
        acc += domain.shift_bias[r];
      }
      features[i * d + r] = acc;
    }
  }
  return Dataset(Tensor({count, d}, std::move(features)), std::move(labels), k);
}

std::uint64_t domain_sample_seed(std::uint64_t gen_seed, std::string const &name,
                                 std::uint64_t split)
{
  return derive_seed(gen_seed, {hash_name(name), split});
}

std::uint64_t domain_rotation_seed(std::uint64_t gen_seed, std::string const &name)
{
  return derive_seed(gen_seed, {hash_name(name), 0x726f74ULL});
}

DomainSuite make_domain_suite(SuiteSpec const &spec)
{
  validate(spec);
  DomainSuite suite;
  suite.spec       = spec;
  suite.prototypes = make_prototypes(spec.num_classes, spec.input_dim, spec.prototypes_seed);

  Tensor const identity = givens_rotation(spec.input_dim, 0.0, 0);
  auto const  &a        = spec.anchor;
  suite.anchor.train    = draw_samples(suite.prototypes, a, identity, spec.counts.train,
                                       domain_sample_seed(spec.gen_seed, a.name, kTrainSplit));
  suite.anchor.val      = draw_samples(suite.prototypes, a, identity, spec.counts.val,
                                       domain_sample_seed(spec.gen_seed, a.name, kValSplit));
  suite.anchor.test     = draw_samples(suite.prototypes, a, identity, spec.counts.test,
                                       domain_sample_seed(spec.gen_seed, a.name, kTestSplit));

  for (auto const &d : spec.shifted)
  {
    Tensor rot = givens_rotation(spec.input_dim, d.shift_angle,
                                 domain_rotation_seed(spec.gen_seed, d.name));
    Dataset eval = draw_samples(suite.prototypes, d, rot, spec.counts.eval,
                                domain_sample_seed(spec.gen_seed, d.name, kEvalSplit));
    suite.shifted.push_back({d, std::move(rot), std::move(eval)});
  }
  return suite;
}

// --- CSV ---------------------------------------------------------------------

void write_csv(std::filesystem::path const &path, Dataset const &data, bool header)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw Error("cannot open " + path.string() + " for writing");
  }
  std::size_t const d = data.input_dim();
  if (header)
  {
    for (std::size_t j = 0; j < d; ++j)
    {
      out << "x" << j << ",";
    }
    out << "label\n";
  }
  auto const x = data.features().data();
  for (std::size_t i = 0; i < data.size(); ++i)
  {
    for (std::size_t j = 0; j < d; ++j)
    {
      out << format_double(x[i * d + j]) << ",";
    }
    out << data.labels()[i] << "\n";
  }
  if (!out)
  {
    throw Error("failed writing " + path.string());
  }
}

Dataset parse_csv(std::string const &text, bool has_header)
{
  std::istringstream  in(text);
  std::string         line;
  std::size_t         row_no = 0;
  std::size_t         width  = 0;
  std::vector<double> features;
  std::vector<int>    labels;
  bool                skip   = has_header;
  while (std::getline(in, line))
  {
    ++row_no;
    line = trim(line);
    if (line.empty())
    {
      continue;
    }
    if (skip)
    {
      skip = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream        ss(line);
    for (std::string cell; std::getline(ss, cell, ',');)
    {
      cells.push_back(trim(cell));
    }
    if (!line.empty() && line.back() == ',')
    {
      cells.emplace_back();
    }
    if (cells.size() < 2)
    {
      throw FormatError("row " + std::to_string(row_no) + ": need at least one feature and a label");
    }
    if (width == 0)
    {
      width = cells.size();
    }
    else if (cells.size() != width)
    {
      throw FormatError("row " + std::to_string(row_no) + ": expected " + std::to_string(width) +
                        " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j + 1 < cells.size(); ++j)
    {
      double      v   = 0.0;
      auto const &c   = cells[j];
      auto [ptr, ec]  = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(v))
      {
        throw FormatError("row " + std::to_string(row_no) + ", column " + std::to_string(j + 1) +
                          ": not a finite number: '" + c + "'");
      }
      features.push_back(v);
    }
    auto const &lc    = cells.back();
    long long   label = 0;
    auto [ptr, ec]    = std::from_chars(lc.data(), lc.data() + lc.size(), label);
    if (ec != std::errc() || ptr != lc.data() + lc.size())
    {
      throw FormatError("row " + std::to_string(row_no) + ": label is not an integer: '" + lc + "'");
    }
    if (label < 0)
    {
      throw FormatError("row " + std::to_string(row_no) + ": negative label " + std::to_string(label));
    }
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty())
  {
    throw FormatError("CSV contains no data rows");
  }
  int max_label = 0;
  for (int y : labels)
  {
    max_label = std::max(max_label, y);
  }
  std::size_t const n = labels.size();
  return Dataset(Tensor({n, width - 1}, std::move(features)), std::move(labels),
                 std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1));
}

Dataset load_csv(std::filesystem::path const &path, bool has_header)
{
  try
  {
    return parse_csv(read_file(path), has_header);
  }
  catch (FormatError const &e)
  {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// --- manifest ------------------------------------------------------------------

namespace {

nlohmann::json domain_json(DomainSpec const &d)
{
  return {{"name", d.name},
          {"shift_angle", d.shift_angle},
          {"shift_bias", d.shift_bias},
          {"noise_sigma", d.noise_sigma}};
}

DomainSpec domain_from_json(nlohmann::json const &j)
{
  DomainSpec d;
  d.name        = j.at("name").get<std::string>();
  d.shift_angle = j.at("shift_angle").get<double>();
  d.shift_bias  = j.value("shift_bias", std::vector<double>{});
  d.noise_sigma = j.at("noise_sigma").get<double>();
  return d;
}

std::string csv_name(std::string const &domain)
{
  return domain + ".csv";
}

}  // namespace

std::string suite_manifest_json(SuiteSpec const &spec)
{
  nlohmann::json j;
  j["format"]          = kManifestFormat;
  j["num_classes"]     = spec.num_classes;
  j["input_dim"]       = spec.input_dim;
  j["prototypes_seed"] = spec.prototypes_seed;
  j["gen_seed"]        = spec.gen_seed;
  j["counts"]          = {{"train", spec.counts.train},
                          {"val", spec.counts.val},
                          {"test", spec.counts.test},
                          {"eval", spec.counts.eval}};
  j["anchor"]          = domain_json(spec.anchor);
  j["shifted"]         = nlohmann::json::array();
  for (auto const &d : spec.shifted)
  {
    j["shifted"].push_back(domain_json(d));
  }
  nlohmann::json files = {{"anchor_train", "anchor_train.csv"},
                          {"anchor_val", "anchor_val.csv"},
                          {"anchor_test", "anchor_test.csv"}};
  for (auto const &d : spec.shifted)
  {
    files[d.name] = csv_name(d.name);
  }
  j["files"] = files;
  return j.dump(2) + "\n";
}

SuiteSpec parse_suite_manifest(std::string const &text)
{
  try
  {
    auto const j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kManifestFormat)
    {
      throw FormatError("unsupported suite manifest format");
    }
    SuiteSpec s;
    s.num_classes     = j.at("num_classes").get<std::size_t>();
    s.input_dim       = j.at("input_dim").get<std::size_t>();
    s.prototypes_seed = j.at("prototypes_seed").get<std::uint64_t>();
    s.gen_seed        = j.at("gen_seed").get<std::uint64_t>();
    auto const &c     = j.at("counts");
    s.counts          = {c.at("train").get<std::size_t>(), c.at("val").get<std::size_t>(),
                         c.at("test").get<std::size_t>(), c.at("eval").get<std::size_t>()};
    s.anchor          = domain_from_json(j.at("anchor"));
    for (auto const &d : j.at("shifted"))
    {
      s.shifted.push_back(domain_from_json(d));
    }
    validate(s);
    return s;
  }
  catch (nlohmann::json::exception const &e)
  {
    throw FormatError(std::string("suite manifest: ") + e.what());
  }
  catch (InvalidArgument const &e)
  {
    throw FormatError(std::string("suite manifest: ") + e.what());
  }
}

void write_suite(DomainSuite const &suite, std::filesystem::path const &dir)
{
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << suite_manifest_json(suite.spec);
    if (!out)
    {
      throw Error("failed writing " + (dir / "manifest.json").string());
    }
  }
  write_csv(dir / "anchor_train.csv", suite.anchor.train);
  write_csv(dir / "anchor_val.csv", suite.anchor.val);
  write_csv(dir / "anchor_test.csv", suite.anchor.test);
  for (auto const &d : suite.shifted)
  {
    write_csv(dir / csv_name(d.spec.name), d.eval);
  }
}

DomainSuite load_suite(std::filesystem::path const &dir)
{
  DomainSuite suite;
  suite.spec       = parse_suite_manifest(read_file(dir / "manifest.json"));
  auto const &spec = suite.spec;
  suite.prototypes = make_prototypes(spec.num_classes, spec.input_dim, spec.prototypes_seed);

  auto load = [&](std::string const &file) {
    Dataset raw = load_csv(dir / file, true);
    if (raw.input_dim() != spec.input_dim || raw.num_classes() > spec.num_classes)
    {
      throw FormatError(file + ": shape disagrees with the manifest");
    }
    return Dataset(raw.features(), raw.labels(), spec.num_classes);
  };
  suite.anchor.train = load("anchor_train.csv");
  suite.anchor.val   = load("anchor_val.csv");
  suite.anchor.test  = load("anchor_test.csv");
  for (auto const &d : spec.shifted)
  {
    suite.shifted.push_back({d,
                             givens_rotation(spec.input_dim, d.shift_angle,
                                             domain_rotation_seed(spec.gen_seed, d.name)),
                             load(csv_name(d.name))});
  }
  return suite;
}

}  // namespace lprobe
