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

#include "lprobe/measures.hpp"

#include "lprobe/analysis.hpp"
#include "lprobe/error.hpp"
#include "lprobe/objectives.hpp"
#include "lprobe/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace lprobe {
namespace {

double norm2(std::span<double const> v)
{
  double s = 0.0;
  for (double x : v)
  {
    s += x * x;
  }
  return std::sqrt(s);
}

double finite_loss(WeightLoss const &loss, std::span<double const> w, char const *where)
{
  double const v = loss.value(w);
  if (!std::isfinite(v))
  {
    throw NumericError(std::string("non-finite loss ") + where);
  }
  return v;
}

std::string fmt17(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate(SharpnessConfig const &c)
{
  if (!(c.noise_scale > 0.0))
  {
    throw InvalidArgument("sharpness noise_scale must be > 0");
  }
  if (!(c.ascent_coeff > 0.0))
  {
    throw InvalidArgument("sharpness ascent_coeff must be > 0");
  }
  if (!(c.radius_lambda > 0.0 && c.radius_lambda < 1.0))
  {
    throw InvalidArgument("sharpness radius_lambda must lie in (0, 1)");
  }
  if (c.batch_size < 1)
  {
    throw InvalidArgument("sharpness batch_size must be >= 1");
  }
}

void validate(AlphaSharpnessConfig const &c)
{
  if (!(c.alpha_lo > 0.0) || !(c.alpha_lo < c.alpha_hi))
  {
    throw InvalidArgument("alpha bounds must satisfy 0 < lo < hi");
  }
  if (c.binary_search_iters < 1)
  {
    throw InvalidArgument("alpha binary_search_iters must be >= 1");
  }
  if (c.ascent_steps < 0)
  {
    throw InvalidArgument("alpha ascent_steps must be >= 0");
  }
  if (!(c.loss_target_offset > 0.0))
  {
    throw InvalidArgument("alpha loss_target_offset must be > 0");
  }
}

// --- margin ------------------------------------------------------------------

double margin_from_logits(Tensor const &logits, std::span<int const> labels)
{
  if (labels.empty())
  {
    throw InvalidArgument("margin of an empty dataset");
  }
  std::size_t const rows = logits.rows();
  std::size_t const k    = logits.cols();
  if (rows != labels.size() || k < 2)
  {
    throw ShapeError("margin: logits " + to_string(logits.shape()) + " incompatible with " +
                     std::to_string(labels.size()) + " labels");
  }
  auto const f     = logits.data();
  double     total = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
  {
    auto const y    = static_cast<std::size_t>(labels[i]);
    double     best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j)
    {
      if (j != y)
      {
        best = std::max(best, f[i * k + j]);
      }
    }
    total += f[i * k + y] - best;
  }
  return total / static_cast<double>(rows);
}

double margin(Model const &model, Dataset const &data)
{
  if (data.empty())
  {
    throw InvalidArgument("margin of an empty dataset");
  }
  return margin_from_logits(model.forward(data.features()), data.labels());
}

// --- difference-based sharpness ----------------------------------------------

std::vector<double> sharpness_noise(std::span<double const> weights,
                                    std::span<WeightSegment const> segments, double noise_scale,
                                    std::uint64_t seed)
{
  Rng                 rng(seed);
  std::vector<double> noise(weights.size(), 0.0);
  for (auto const &seg : segments)
  {
    auto const slice = weights.subspan(seg.offset, seg.length);
    double     rms   = norm2(slice) / std::sqrt(static_cast<double>(std::max<std::size_t>(1, seg.length)));
    double     scale = noise_scale * (rms > 0.0 ? rms : 1.0);
    for (std::size_t i = 0; i < seg.length; ++i)
    {
      noise[seg.offset + i] = scale * rng.normal();
    }
  }
  return noise;
}

DifferenceSharpness phi_difference_with_noise(std::span<double const> weights,
                                              WeightLoss const &loss, SharpnessConfig const &config,
                                              std::span<double const> noise)
{
  validate(config);
  std::size_t const dim = weights.size();
  if (noise.size() != dim || loss.dimension() != dim)
  {
    throw ShapeError("phi_difference: weights, noise and loss dimensions differ");
  }

  std::vector<double> w(dim);
  for (std::size_t i = 0; i < dim; ++i)
  {
    w[i] = weights[i] + noise[i];
  }
  std::vector<double> delta(dim);
  double const        noisy_loss = loss.value_and_gradient(w, delta);
  if (!std::isfinite(noisy_loss))
  {
    throw NumericError("non-finite loss at the noised weights");
  }

  DifferenceSharpness out{0.0, 0.0, 0.0, false, std::vector<double>(dim)};
  auto               &wp = out.perturbed;
  for (std::size_t i = 0; i < dim; ++i)
  {
    wp[i] = w[i] + config.ascent_coeff * delta[i];
  }
  out.radius = config.radius_lambda * norm2(wp);

  std::vector<double> disp(dim);
  for (std::size_t i = 0; i < dim; ++i)
  {
    disp[i] = wp[i] - weights[i];
  }
  double const dist = norm2(disp);
  out.displacement  = dist;
  if (dist > out.radius && dist > 0.0)
  {
    out.projected = true;
    for (std::size_t i = 0; i < dim; ++i)
    {
      wp[i] = weights[i] + disp[i] / dist * out.radius;
    }
    for (std::size_t i = 0; i < dim; ++i)
    {
      disp[i] = wp[i] - weights[i];
    }
    out.displacement = norm2(disp);
  }

  double const base      = finite_loss(loss, weights, "at the original weights");
  double const perturbed = finite_loss(loss, wp, "at the perturbed weights");
  out.phi                = perturbed - base;
  return out;
}

double phi_difference(std::span<double const> weights, WeightLoss const &loss,
                      SharpnessConfig const &config)
{
  validate(config);
  auto const segments = loss.segments();
  auto const noise    = sharpness_noise(weights, segments, config.noise_scale,
                                        derive_seed(config.seed, {0x6e6f697365ULL}));
  return phi_difference_with_noise(weights, loss, config, noise).phi;
}

double phi_difference(Model const &model, WeightLoss const &loss, SharpnessConfig const &config)
{
  return phi_difference(model.weights(), loss, config);
}

// --- alpha sharpness -----------------------------------------------------------

double worst_case_loss(std::span<double const> weights, WeightLoss const &loss, double alpha,
                       int ascent_steps, std::uint64_t seed)
{
  std::size_t const   dim = weights.size();
  Rng                 rng(seed);
  std::vector<double> u(dim);
  for (auto &x : u)
  {
    x = alpha * rng.uniform(-1.0, 1.0);
  }
  double const        step = 2.5 * alpha / std::max(1, ascent_steps);
  std::vector<double> point(dim);
  std::vector<double> grad(dim);
  double              worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s <= ascent_steps; ++s)
  {
    for (std::size_t i = 0; i < dim; ++i)
    {
      point[i] = weights[i] + u[i];
    }
    double const value = loss.value_and_gradient(point, grad);
    if (!std::isfinite(value))
    {
      throw NumericError("non-finite loss during alpha ascent");
    }
    worst = std::max(worst, value);
    if (s == ascent_steps)
    {
      break;
    }
    for (std::size_t i = 0; i < dim; ++i)
    {
      double const dir = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
      u[i]             = std::clamp(u[i] + step * dir, -alpha, alpha);
    }
  }
  return worst;
}

AlphaSharpness phi_alpha(std::span<double const> weights, std::span<double const> initial_weights,
                         WeightLoss const &loss, AlphaSharpnessConfig const &config)
{
  validate(config);
  if (weights.size() != initial_weights.size() || loss.dimension() != weights.size())
  {
    throw ShapeError("phi_alpha: weights, initial weights and loss dimensions differ");
  }
  AlphaSharpness out;
  double         base = 0.0;
  try
  {
    base = finite_loss(loss, weights, "at the trained weights");
  }
  catch (NumericError const &e)
  {
    out.failure = e.what();
    return out;
  }
  out.target_loss = base + config.loss_target_offset;

  // The same start pattern, scaled by alpha, is reused for every candidate.
  std::uint64_t const ascent_seed = derive_seed(config.seed, {0x616c706861ULL});
  auto feasible = [&](double alpha) {
    return worst_case_loss(weights, loss, alpha, config.ascent_steps, ascent_seed) < out.target_loss;
  };

  try
  {
    double lo = config.alpha_lo;
    double hi = config.alpha_hi;
    if (!feasible(lo))
    {
      out.alpha   = lo;
      out.failure = "no feasible alpha: even the lower bound exceeds the target loss";
      return out;
    }
    if (feasible(hi))
    {
      out.alpha   = hi;
      out.failure = "search pinned at the upper alpha bound";
      return out;
    }
    bool lo_moved = false;
    for (int it = 0; it < config.binary_search_iters; ++it)
    {
      double const mid = 0.5 * (lo + hi);
      if (feasible(mid))
      {
        lo       = mid;
        lo_moved = true;
      }
      else
      {
        hi = mid;
      }
    }
    out.alpha = lo;
    if (!lo_moved)
    {
      out.failure = "search pinned at the lower alpha bound";
      return out;
    }
  }
  catch (NumericError const &e)
  {
    out.failure = std::string("ascent diverged: ") + e.what();
    return out;
  }

  double const dist = frobenius_distance(weights, initial_weights);
  out.phi           = dist * dist / (4.0 * out.alpha * out.alpha);
  return out;
}

AlphaSharpness phi_alpha(Model const &model, WeightLoss const &loss,
                         AlphaSharpnessConfig const &config)
{
  return phi_alpha(model.weights(), model.initial_weights(), loss, config);
}

// --- distance ------------------------------------------------------------------

double frobenius_distance(std::span<double const> a, std::span<double const> b)
{
  if (a.size() != b.size())
  {
    throw ShapeError("frobenius_distance: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
  {
    double const d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double frobenius_distance(Model const &model)
{
  return frobenius_distance(model.weights(), model.initial_weights());
}

// --- reports -------------------------------------------------------------------

std::string config_hash(MeasureConfigs const &c)
{
  std::string text;
  auto        add = [&](double v) { text += fmt17(v) + ";"; };
  add(c.sharpness.noise_scale);
  add(c.sharpness.ascent_coeff);
  add(c.sharpness.radius_lambda);
  text += std::to_string(c.sharpness.batch_size) + ";" + std::to_string(c.sharpness.seed) + ";";
  add(c.alpha.loss_target_offset);
  text += std::to_string(c.alpha.ascent_steps) + ";" + std::to_string(c.alpha.binary_search_iters) + ";";
  add(c.alpha.alpha_lo);
  add(c.alpha.alpha_hi);
  text += std::to_string(c.alpha.seed) + ";";
  for (double s : c.noise_sweep)
  {
    add(s);
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_name(text)));
  return buf;
}

Dataset sharpness_batch(Dataset const &data, SharpnessConfig const &config)
{
  std::size_t const        n = std::min(config.batch_size, data.size());
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, {0x6261746368ULL}));
  rng.shuffle(idx);
  idx.resize(n);
  return data.subset(idx);
}

std::vector<MeasureReport> measure_all(Model const &model, DomainSuite const &suite,
                                       MeasureConfigs const &configs, RunLabel const &label)
{
  validate(configs.sharpness);
  validate(configs.alpha);
  if (suite.shifted.empty())
  {
    throw InvalidArgument("measure_all needs at least one shifted domain");
  }
  double const      frob = frobenius_distance(model);
  std::string const hash = config_hash(configs);

  std::vector<MeasureReport> reports;
  for (auto const &domain : suite.shifted)
  {
    MeasureReport r;
    r.model_id           = label.model_id;
    r.objective          = label.objective;
    r.seed               = label.seed;
    r.domain             = domain.spec.name;
    r.frobenius_distance = frob;
    r.config_hash        = hash;
    try
    {
      r.accuracy          = accuracy(model, domain.eval);
      r.margin            = margin(model, domain.eval);
      auto const batch    = sharpness_batch(domain.eval, configs.sharpness);
      auto const loss     = cross_entropy_loss(model.spec(), batch);
      r.phi_difference    = phi_difference(model, loss, configs.sharpness);
      r.phi_alpha         = phi_alpha(model, loss, configs.alpha).phi;
      for (double scale : configs.noise_sweep)
      {
        SharpnessConfig swept = configs.sharpness;
        swept.noise_scale     = scale;
        r.phi_difference_sweep.push_back(phi_difference(model, loss, swept));
      }
    }
    catch (Error const &e)
    {
      r.error = e.what();
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

std::string reports_csv(std::span<MeasureReport const> reports, std::span<double const> noise_sweep)
{
  std::string out =
      "model_id,objective,seed,domain,accuracy,margin,phi_difference,phi_alpha,phi_alpha_failed,"
      "frobenius_distance";
  for (double s : noise_sweep)
  {
    char buf[48];
    std::snprintf(buf, sizeof buf, ",phi_difference_sigma_%g", s);
    out += buf;
  }
  out += "\n";
  for (auto const &r : reports)
  {
    bool const ok = r.error.empty();
    out += r.model_id + "," + r.objective + "," + std::to_string(r.seed) + "," + r.domain + ",";
    out += (ok ? fmt17(r.accuracy) : "") + "," + (ok ? fmt17(r.margin) : "") + ",";
    out += (ok ? fmt17(r.phi_difference) : "") + ",";
    out += (r.phi_alpha ? fmt17(*r.phi_alpha) : "") + ",";
    out += std::string(r.phi_alpha ? "false" : "true") + ",";
    out += fmt17(r.frobenius_distance);
    for (std::size_t i = 0; i < noise_sweep.size(); ++i)
    {
      out += ",";
      if (i < r.phi_difference_sweep.size())
      {
        out += fmt17(r.phi_difference_sweep[i]);
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace lprobe
