/*
 Copyright 2026 The fixord Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#ifndef FIXORD_SYNTHESIS_HPP
#define FIXORD_SYNTHESIS_HPP

/**
 * @file
 * @brief Fixed-order multiobjective controller synthesis.
 *
 * Given N channels with measures g_j and bounds beta_j, searches for a single
 * controller of prescribed order locally minimizing
 *
 *   F(K) = max { g_j(K) : beta_j = inf }     subject to g_j(K) <= beta_j,
 *
 * through a stabilization phase (minimize the largest closed-loop spectral
 * abscissa over the 'h'/'r' channels until it is negative) followed by an
 * optimization phase on the exact penalty F + rho * sum_j max(0, g_j - beta_j),
 * escalating rho while constraints remain violated. F is 0 when every bound
 * is finite.
 */

#include "fixord/lti.hpp"
#include "fixord/measures.hpp"
#include "fixord/nonsmooth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fixord {

struct ObjectiveSpec
{
  std::vector<MeasureKind> kinds;
  std::vector<double> betas;

  /// @p fun holds one letter per channel, or a single letter broadcast to all.
  static ObjectiveSpec from_fun(const std::string& fun, std::size_t n, std::vector<double> upper = {})
  {
    if (fun.size() != 1 && fun.size() != n)
      throw std::invalid_argument("fun must have length 1 or " + std::to_string(n) + ", got '" + fun + "'");
    ObjectiveSpec spec;
    for (std::size_t j = 0; j < n; ++j) spec.kinds.push_back(measure_from_letter(fun.size() == 1 ? fun[0] : fun[j]));
    spec.betas = upper.empty() ? std::vector<double>(n, kInf) : std::move(upper);
    spec.validate(n);
    return spec;
  }

  [[nodiscard]] std::size_t size() const { return kinds.size(); }

  void validate(std::size_t n) const
  {
    if (kinds.size() != n || betas.size() != n)
      throw std::invalid_argument("objective spec: expected " + std::to_string(n) + " measures and bounds");
    for (double b : betas)
      if (std::isnan(b) || b == -kInf) throw std::invalid_argument("objective spec: bounds must be real or +inf");
  }

  [[nodiscard]] bool any_objective() const
  {
    return std::any_of(betas.begin(), betas.end(), [](double b) { return b == kInf; });
  }
  [[nodiscard]] bool any_constraint() const
  {
    return std::any_of(betas.begin(), betas.end(), [](double b) { return std::isfinite(b); });
  }
  [[nodiscard]] bool needs_stabilization() const
  {
    return std::any_of(kinds.begin(), kinds.end(), [](MeasureKind k) { return k != MeasureKind::S; });
  }
  [[nodiscard]] std::string fun() const
  {
    std::string s;
    for (auto k : kinds) s += letter(k);
    return s;
  }
};

struct SynthOptions
{
  Index order = 0;
  /// Wall-clock budget in seconds for the whole run.
  double cpumax = kInf;
  /// BFGS only (no gradient sampling).
  bool fast = false;
  /// 0 silent, 1 one line per start, 2 per-iteration, 3 line-search traces.
  int prtlevel = 1;
  std::optional<StructureMask> structure;
  double weight_norm_k = 0.0;
  double augment_hinf = 0.0;
  /// Random starts in addition to the initial controller, if any.
  int restarts = 3;
  double rho0 = 100.0;
  double rho_factor = 10.0;
  double rho_max = 1e8;
  double viol_tol = 1e-6;
  double stab_margin = 1e-8;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
  /// Accept a lower-order init by padding it (see pad_controller).
  bool pad_init = false;
  double pad_pole = -1.0;
  /// Worker threads for restarts; 0 uses the hardware concurrency.
  int threads = 0;
  /// Engine settings; seed, deadline and logging are overridden per start.
  OptOptions optimizer{};
  std::ostream* log = nullptr;

  void validate() const
  {
    if (order < 0) throw std::invalid_argument("order must be nonnegative");
    if (!(rho0 > 0.0)) throw std::invalid_argument("rho0 must be positive");
    if (!(rho_factor > 1.0)) throw std::invalid_argument("rho_factor must exceed 1");
    if (!(rho_max >= rho0)) throw std::invalid_argument("rho_max must be at least rho0");
    if (weight_norm_k < 0.0 || augment_hinf < 0.0) throw std::invalid_argument("weights must be nonnegative");
    if (restarts < 0) throw std::invalid_argument("restarts must be nonnegative");
    if (prtlevel < 0 || prtlevel > 3) throw std::invalid_argument("prtlevel must be in 0..3");
  }

  [[nodiscard]] const StructureMask* mask() const { return structure ? &*structure : nullptr; }
};

/// Channel values of a fixed controller, recomputed from scratch.
struct Evaluation
{
  std::vector<double> values;
  std::vector<bool> ill_posed;
  double objective = 0.0;
  std::vector<double> violations;

  [[nodiscard]] double total_violation() const
  {
    double s = 0.0;
    for (double v : violations) s += v;
    return s;
  }
  [[nodiscard]] bool feasible(double tol) const
  {
    return std::all_of(violations.begin(), violations.end(), [tol](double v) { return v <= tol; });
  }
  [[nodiscard]] bool finite() const
  {
    return std::isfinite(objective) &&
           std::none_of(values.begin(), values.end(), [](double v) { return v == kInf; });
  }
};

inline Evaluation evaluate(const PlantSet& plants, const ObjectiveSpec& spec, const Controller& k,
                           double augment_hinf = 0.0)
{
  spec.validate(plants.size());
  Evaluation e;
  bool any = false;
  double F = -kInf;
  for (std::size_t j = 0; j < plants.size(); ++j) {
    double g = kInf;
    bool ill = false;
    try {
      g = channel_value(plants.channels()[j], k, spec.kinds[j], augment_hinf).value;
    } catch (const IllPosedError&) {
      ill = true;
    }
    e.values.push_back(g);
    e.ill_posed.push_back(ill);
    const double beta = spec.betas[j];
    e.violations.push_back(beta == kInf ? 0.0 : std::max(0.0, g - beta));
    if (beta == kInf) {
      any = true;
      F = std::max(F, g);
    }
  }
  e.objective = any ? F : 0.0;
  return e;
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/**
 * Penalty objective over the free controller parameters:
 *   max_{beta_j = inf} g_j + rho * sum_j max(0, g_j - beta_j) + weight_norm_k * |K|.
 * Gradient from the active branch of the max (largest value, lowest index on
 * ties). Ill-posed or unstable ('h'/'r') points evaluate to +inf.
 */
inline Oracle build_objective(const PlantSet& plants, const ObjectiveSpec& spec, const SynthOptions& opts,
                              double rho)
{
  spec.validate(plants.size());
  auto P = std::make_shared<const PlantSet>(plants);
  auto S = std::make_shared<const ObjectiveSpec>(spec);
  auto M = std::make_shared<const std::optional<StructureMask>>(opts.structure);
  const ControllerDims dims = plants.controller_dims(opts.order);
  const double wnorm = opts.weight_norm_k, aug = opts.augment_hinf;
  return [P, S, M, dims, wnorm, aug, rho](const Vector& v) -> OracleValue {
    const StructureMask* mask = *M ? &**M : nullptr;
    const Controller k = devectorize(v, dims, mask);
    const Index np = v.size();
    double F = -kInf;
    Vector gF = Vector::Zero(np);
    bool any = false;
    double penalty = 0.0;
    Vector gP = Vector::Zero(np);
    for (std::size_t j = 0; j < P->size(); ++j) {
      MeasureValue mv;
      try {
        mv = channel_value(P->channels()[j], k, S->kinds[j], aug, mask);
      } catch (const IllPosedError&) {
        return {kInf, {}};
      }
      if (mv.value == kInf) return {kInf, {}};
      const double beta = S->betas[j];
      if (beta == kInf) {
        if (!any || mv.value > F) {
          F = mv.value;
          gF = mv.gradient;
        }
        any = true;
      } else if (mv.value > beta) {
        penalty += mv.value - beta;
        gP += mv.gradient;
      }
    }
    if (!any) F = 0.0;
    OracleValue out{F + rho * penalty, gF + rho * gP};
    if (wnorm > 0.0) {
      const MeasureValue kn = controller_norm(k, mask);
      out.value += wnorm * kn.value;
      out.gradient += wnorm * kn.gradient;
    }
    return out;
  };
}

/// max over 'h'/'r' channels of the closed-loop spectral abscissa.
inline Oracle build_stabilization_objective(const PlantSet& plants, const ObjectiveSpec& spec,
                                            const SynthOptions& opts)
{
  auto P = std::make_shared<const PlantSet>(plants);
  auto S = std::make_shared<const ObjectiveSpec>(spec);
  auto M = std::make_shared<const std::optional<StructureMask>>(opts.structure);
  const ControllerDims dims = plants.controller_dims(opts.order);
  return [P, S, M, dims](const Vector& v) -> OracleValue {
    const StructureMask* mask = *M ? &**M : nullptr;
    const Controller k = devectorize(v, dims, mask);
    OracleValue out{-kInf, Vector::Zero(v.size())};
    for (std::size_t j = 0; j < P->size(); ++j) {
      if (S->kinds[j] == MeasureKind::S) continue;
      MeasureValue mv;
      try {
        mv = spectral_abscissa(channel_loop(P->channels()[j], k), mask);
      } catch (const IllPosedError&) {
        return {kInf, {}};
      }
      if (mv.value > out.value) {
        out.value = mv.value;
        out.gradient = mv.gradient;
      }
    }
    return out;
  };
}

/// Free entries i.i.d. N(0, scale^2); masked entries zero.
template<class Rng>
Controller random_controller(ControllerDims dims, const StructureMask* mask, double scale, Rng& rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(parameter_count(dims, mask));
  for (Index i = 0; i < v.size(); ++i) v(i) = scale * normal(rng);
  return devectorize(v, dims, mask);
}

// ---------------------------------------------------------------------------
// Phases
// ---------------------------------------------------------------------------

struct StabilizationResult
{
  Vector x;
  bool stabilized = false;
  double abscissa = kInf;
  int iterations = 0;
};

inline StabilizationResult stabilization_phase(const PlantSet& plants, const ObjectiveSpec& spec,
                                               const SynthOptions& opts, const Vector& x0,
                                               const OptOptions& engine)
{
  StabilizationResult out;
  out.x = x0;
  if (!spec.needs_stabilization()) {
    out.stabilized = true;
    return out;
  }
  const Oracle f = build_stabilization_objective(plants, spec, opts);
  const OracleValue v0 = f(x0);
  out.abscissa = v0.value;
  if (v0.value < -opts.stab_margin) {
    out.stabilized = true;
    return out;
  }
  if (!std::isfinite(v0.value)) return out;
  OptOptions o = engine;
  o.target_value = -opts.stab_margin;
  const BfgsResult r = bfgs_minimize(f, x0, o);
  out.x = r.x;
  out.abscissa = r.value;
  out.iterations = r.iterations;
  out.stabilized = r.value < -opts.stab_margin;
  return out;
}

struct OptimizationPhaseResult
{
  Vector x;
  Evaluation evaluation;
  double oracle_value = kInf;
  std::optional<Certificate> certificate;
  double rho = 0.0;
  int escalations = 0;
  int iterations = 0;
};

inline OptimizationPhaseResult optimization_phase(const PlantSet& plants, const ObjectiveSpec& spec,
                                                  const SynthOptions& opts, const Vector& x_start,
                                                  const OptOptions& engine)
{
  const ControllerDims dims = plants.controller_dims(opts.order);
  OptimizationPhaseResult out;
  out.x = x_start;
  out.rho = opts.rho0;
  const auto deadline = engine.effective_deadline(Clock::now());
  OptOptions o = engine;
  o.deadline = deadline;
  o.max_time = kInf;
  for (;;) {
    const Oracle f = build_objective(plants, spec, opts, out.rho);
    const OracleValue v0 = f(out.x);
    if (!std::isfinite(v0.value)) {
      out.oracle_value = v0.value;
      break;
    }
    const HybridResult r = hybrid_minimize(f, out.x, o, opts.fast);
    out.x = r.x;
    out.oracle_value = r.value;
    out.certificate = r.certificate;
    out.iterations += r.bfgs.iterations;
    out.evaluation = evaluate(plants, spec, devectorize(out.x, dims, opts.mask()), opts.augment_hinf);
    // Escalation only matters with both an objective and constraints.
    if (out.evaluation.feasible(opts.viol_tol) || !spec.any_constraint() || !spec.any_objective()) break;
    if (out.rho >= opts.rho_max || Clock::now() >= deadline) break;
    out.rho = std::min(out.rho * opts.rho_factor, opts.rho_max);
    ++out.escalations;
  }
  if (out.evaluation.values.empty())
    out.evaluation = evaluate(plants, spec, devectorize(out.x, dims, opts.mask()), opts.augment_hinf);
  return out;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

enum class SynthStatus { Success, ConstraintsViolated, NoStabilizingController };

inline const char* to_string(SynthStatus s)
{
  switch (s) {
    case SynthStatus::Success: return "success";
    case SynthStatus::ConstraintsViolated: return "constraints violated";
    case SynthStatus::NoStabilizingController: return "no stabilizing controller found";
  }
  return "?";
}

struct StartSummary
{
  int index = 0;
  bool from_init = false;
  bool stabilized = false;
  double objective = kInf;
  double total_violation = 0.0;
  double rho = 0.0;
  int iterations = 0;
  std::string error;
};

struct SynthResult
{
  SynthStatus status = SynthStatus::NoStabilizingController;
  Controller controller;
  double objective = kInf;
  std::vector<double> values;
  std::vector<double> violations;
  std::optional<Certificate> certificate;
  std::vector<StartSummary> history;
  double wall_time = 0.0;

  [[nodiscard]] bool found() const { return status != SynthStatus::NoStabilizingController; }
};

namespace detail {

struct Candidate
{
  Controller controller;
  Evaluation evaluation;
  std::optional<Certificate> certificate;
};

/// Feasible before infeasible, then lowest objective (or lowest total violation).
inline bool better(const Evaluation& a, const Evaluation& b, double tol)
{
  if (a.finite() != b.finite()) return a.finite();
  if (!a.finite()) return false;
  const bool fa = a.feasible(tol), fb = b.feasible(tol);
  if (fa != fb) return fa;
  if (!fa && a.total_violation() != b.total_violation()) return a.total_violation() < b.total_violation();
  return a.objective < b.objective;
}

inline std::uint64_t start_seed(std::uint64_t seed, std::uint64_t index)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5eedu};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace detail

/**
 * Runs the initial controller (if any) and opts.restarts random starts, each
 * through stabilization and optimization, and returns the best controller.
 * The initial controller itself is always a candidate, so a feasible init is
 * never made worse.
 */
inline SynthResult synthesize(const PlantSet& plants, const ObjectiveSpec& spec, const SynthOptions& opts,
                              const std::optional<Controller>& init = std::nullopt)
{
  opts.validate();
  spec.validate(plants.size());
  const auto t0 = Clock::now();
  const ControllerDims dims = plants.controller_dims(opts.order);
  const StructureMask* mask = opts.mask();
  if (mask) mask->check(dims);

  std::optional<Controller> k0 = init;
  if (k0) {
    if (k0->m2() != dims.m2 || k0->p2() != dims.p2)
      throw DimensionError("init controller (m2, p2) does not match the plants");
    if (k0->order() != dims.order) {
      if (opts.pad_init && k0->order() < dims.order)
        k0 = pad_controller(*k0, dims.order, opts.pad_pole);
      else
        throw DimensionError("init controller order " + std::to_string(k0->order()) + " differs from order " +
                             std::to_string(dims.order));
    }
    if (mask) k0 = apply_mask(*k0, *mask);
  }

  const Clock::time_point deadline =
      std::isfinite(opts.cpumax)
          ? t0 + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(opts.cpumax))
          : Clock::time_point::max();

  const int nstarts = opts.restarts + (k0 ? 1 : 0);
  std::vector<std::optional<detail::Candidate>> results(static_cast<std::size_t>(nstarts));
  std::vector<StartSummary> summaries(static_cast<std::size_t>(nstarts));
  std::vector<std::string> logs(static_cast<std::size_t>(nstarts));

  int threads = opts.threads > 0 ? opts.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, std::max(nstarts, 1));

  auto run_start = [&](int i) {
    std::ostringstream log;
    StartSummary& sum = summaries[static_cast<std::size_t>(i)];
    sum.index = i;
    sum.from_init = k0 && i == 0;
    try {
      const std::uint64_t seed = detail::start_seed(opts.seed, static_cast<std::uint64_t>(i));
      std::mt19937_64 rng(seed);
      const Controller kstart = sum.from_init ? *k0 : random_controller(dims, mask, opts.init_scale, rng);
      const Vector x0 = vectorize(kstart, mask);

      // Split what is left of the budget among the starts this worker still has to run.
      const auto now = Clock::now();
      Clock::time_point start_deadline = deadline, phase1_deadline = deadline;
      if (deadline != Clock::time_point::max()) {
        const int waves = (nstarts - i + threads - 1) / threads;
        const auto left = deadline > now ? deadline - now : Clock::duration::zero();
        start_deadline = now + left / std::max(waves, 1);
        phase1_deadline = now + std::chrono::duration_cast<Clock::duration>((start_deadline - now) * 0.3);
      }
      OptOptions engine = opts.optimizer;
      engine.seed = seed;
      engine.max_time = kInf;
      engine.print_level = opts.prtlevel;
      engine.log = opts.prtlevel >= 2 ? &log : nullptr;

      engine.deadline = phase1_deadline;
      const StabilizationResult st = stabilization_phase(plants, spec, opts, x0, engine);
      sum.stabilized = st.stabilized;
      Vector x = st.x;
      detail::Candidate cand{devectorize(x, dims, mask), {}, std::nullopt};
      if (st.stabilized) {
        engine.deadline = start_deadline;
        const OptimizationPhaseResult op = optimization_phase(plants, spec, opts, x, engine);
        cand.controller = devectorize(op.x, dims, mask);
        cand.certificate = op.certificate;
        sum.rho = op.rho;
        sum.iterations = st.iterations + op.iterations;
      }
      cand.evaluation = evaluate(plants, spec, cand.controller, opts.augment_hinf);
      sum.objective = cand.evaluation.objective;
      sum.total_violation = cand.evaluation.total_violation();
      results[static_cast<std::size_t>(i)] = std::move(cand);
    } catch (const std::exception& e) {
      sum.error = e.what();
    }
    if (opts.prtlevel >= 1) {
      log << "start " << i << (sum.from_init ? " (init)" : "") << ": ";
      if (!sum.error.empty())
        log << "failed: " << sum.error;
      else if (!sum.stabilized)
        log << "not stabilized";
      else
        log << "objective " << std::setprecision(8) << sum.objective << ", violation " << sum.total_violation;
      log << "\n";
    }
    logs[static_cast<std::size_t>(i)] = log.str();
  };

  if (threads == 1) {
    for (int i = 0; i < nstarts; ++i) run_start(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int i = next++; i < nstarts; i = next++) run_start(i);
      });
    for (auto& th : pool) th.join();
  }
  if (opts.log)
    for (const auto& s : logs) *opts.log << s;

  // The init point competes as it is.
  std::optional<detail::Candidate> best;
  if (k0) best = detail::Candidate{*k0, evaluate(plants, spec, *k0, opts.augment_hinf), std::nullopt};
  for (auto& r : results)
    if (r && (!best || detail::better(r->evaluation, best->evaluation, opts.viol_tol))) best = std::move(r);

  SynthResult out;
  out.history = std::move(summaries);
  if (best) {
    out.controller = best->controller;
    out.objective = best->evaluation.objective;
    out.values = best->evaluation.values;
    out.violations = best->evaluation.violations;
    out.certificate = best->certificate;
    if (!best->evaluation.finite())
      out.status = SynthStatus::NoStabilizingController;
    else
      out.status = best->evaluation.feasible(opts.viol_tol) ? SynthStatus::Success : SynthStatus::ConstraintsViolated;
  } else {
    out.controller = Controller::zero(dims);
  }
  out.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  if (opts.log && opts.prtlevel >= 1) {
    *opts.log << "best order " << dims.order << " controller: " << to_string(out.status);
    if (out.found()) *opts.log << ", objective " << std::setprecision(8) << out.objective;
    *opts.log << "\n";
  }
  return out;
}

}  // namespace fixord

#endif  // FIXORD_SYNTHESIS_HPP
