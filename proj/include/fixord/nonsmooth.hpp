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
#ifndef FIXORD_NONSMOOTH_HPP
#define FIXORD_NONSMOOTH_HPP

/**
 * @file
 * @brief Local minimization of nonsmooth, nonconvex functions: full BFGS with
 * a weak Wolfe line search, followed optionally by gradient sampling.
 *
 * The oracle may return +inf to mark points outside the domain; the line
 * searches treat such points as failed sufficient decrease.
 */

#include "fixord/lti.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

namespace fixord {

using Clock = std::chrono::steady_clock;

struct OracleValue
{
  double value = kInf;
  Vector gradient;
};

/// Function value plus gradient. Must be deterministic and safe to call concurrently.
using Oracle = std::function<OracleValue(const Vector&)>;

struct OptOptions
{
  int max_iter = 1000;
  double grad_norm_tol = 1e-6;
  /// Seconds; combined with @ref deadline, whichever comes first.
  double max_time = kInf;
  std::optional<Clock::time_point> deadline;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.5;
  int max_linesearch = 50;
  /// Sample count per gradient-sampling iteration; 0 selects 2 * dim.
  int gs_samples = 0;
  /// Strictly decreasing sampling radii; empty selects
  /// (1e-1, 1e-2, 1e-3, 1e-4) * (1 + |x0|).
  std::vector<double> gs_radii;
  int gs_max_iter = 100;
  std::uint64_t seed = 0;
  /// BFGS stops as soon as f < target_value.
  double target_value = -kInf;
  /// 0 silent, 2 per-iteration values, 3 adds line-search traces.
  int print_level = 0;
  std::ostream* log = nullptr;
  /// Record the smallest eigenvalue of the inverse Hessian after each update.
  bool check_hessian = false;

  void validate() const
  {
    if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
      throw std::invalid_argument("OptOptions: require 0 < wolfe_c1 < wolfe_c2 < 1");
    for (std::size_t i = 0; i < gs_radii.size(); ++i) {
      if (!(gs_radii[i] > 0.0)) throw std::invalid_argument("OptOptions: gs_radii must be positive");
      if (i > 0 && !(gs_radii[i] < gs_radii[i - 1]))
        throw std::invalid_argument("OptOptions: gs_radii must be strictly decreasing");
    }
  }

  [[nodiscard]] Clock::time_point effective_deadline(Clock::time_point start) const
  {
    Clock::time_point d = Clock::time_point::max();
    if (std::isfinite(max_time) && max_time >= 0.0)
      d = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(max_time));
    if (deadline && *deadline < d) d = *deadline;
    return d;
  }
};

enum class OptStatus {
  Converged,
  TargetReached,
  MaxIterations,
  TimeBudget,
  LineSearchFailure,
  OracleFailure,
  SamplesInfeasible,
};

inline const char* to_string(OptStatus s)
{
  switch (s) {
    case OptStatus::Converged: return "converged";
    case OptStatus::TargetReached: return "target reached";
    case OptStatus::MaxIterations: return "iteration limit";
    case OptStatus::TimeBudget: return "time budget";
    case OptStatus::LineSearchFailure: return "line search failure";
    case OptStatus::OracleFailure: return "oracle failure";
    case OptStatus::SamplesInfeasible: return "all samples infeasible";
  }
  return "?";
}

/// Approximate local-optimality certificate from gradient sampling.
struct Certificate
{
  double radius = 0.0;
  double min_hull_grad_norm = 0.0;
  int sample_count = 0;
};

namespace detail {

inline OracleValue call(const Oracle& f, const Vector& x)
{
  OracleValue v = f(x);
  if (std::isnan(v.value)) v.value = kInf;
  if (std::isfinite(v.value) && (v.gradient.size() != x.size() || !v.gradient.allFinite()))
    throw std::runtime_error("oracle returned a finite value without a valid gradient");
  return v;
}

inline bool expired(Clock::time_point deadline) { return Clock::now() >= deadline; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Weak Wolfe line search
// ---------------------------------------------------------------------------

struct LineSearchResult
{
  bool success = false;
  double step = 0.0;
  double value = kInf;
  Vector gradient;
  int evaluations = 0;
  /// Lowest finite value seen (used as a fallback when the search fails).
  double best_step = 0.0;
  double best_value = kInf;
  Vector best_gradient;
};

/**
 * Bracketing bisection with doubling expansion. Accepts t with
 *   f(x + t d) <= f0 + c1 t g0'd   and   g(x + t d)'d >= c2 g0'd.
 */
inline LineSearchResult weak_wolfe_linesearch(const Oracle& oracle, const Vector& x, const Vector& direction,
                                              double f0, const Vector& g0, const OptOptions& opts,
                                              Clock::time_point deadline = Clock::time_point::max())
{
  const double slope = g0.dot(direction);
  if (!(slope < 0.0)) throw std::invalid_argument("weak_wolfe_linesearch: direction is not a descent direction");
  LineSearchResult out;
  double lo = 0.0, hi = kInf, t = 1.0;
  for (int k = 0; k < opts.max_linesearch; ++k) {
    if (k > 0 && detail::expired(deadline)) break;
    const OracleValue v = detail::call(oracle, x + t * direction);
    ++out.evaluations;
    if (std::isfinite(v.value) && v.value < out.best_value) {
      out.best_value = v.value;
      out.best_step = t;
      out.best_gradient = v.gradient;
    }
    if (opts.print_level >= 3 && opts.log)
      *opts.log << "      ls t=" << t << " f=" << v.value << "\n";
    if (!std::isfinite(v.value) || v.value > f0 + opts.wolfe_c1 * t * slope) {
      hi = t;
    } else if (v.gradient.dot(direction) < opts.wolfe_c2 * slope) {
      lo = t;
    } else {
      out.success = true;
      out.step = t;
      out.value = v.value;
      out.gradient = v.gradient;
      return out;
    }
    t = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// BFGS
// ---------------------------------------------------------------------------

struct BfgsResult
{
  Vector x;
  double value = kInf;
  Vector gradient;
  int iterations = 0;
  int evaluations = 0;
  OptStatus status = OptStatus::MaxIterations;
  /// Accepted function values, starting with f(x0).
  std::vector<double> trace;
  /// Smallest inverse-Hessian eigenvalue seen (only with check_hessian).
  double hessian_min_eig = kInf;
};

/**
 * Full inverse-Hessian BFGS. Updates are skipped when s'y <= 1e-12 |s| |y|.
 * Accepted values decrease monotonically; the returned point is the best one.
 */
inline BfgsResult bfgs_minimize(const Oracle& oracle, const Vector& x0, const OptOptions& opts)
{
  opts.validate();
  const auto deadline = opts.effective_deadline(Clock::now());
  const Index n = x0.size();

  BfgsResult r;
  r.x = x0;
  OracleValue v = detail::call(oracle, x0);
  r.evaluations = 1;
  if (!std::isfinite(v.value)) throw std::invalid_argument("bfgs_minimize: f(x0) is not finite");
  r.value = v.value;
  r.gradient = v.gradient;
  r.trace.push_back(r.value);

  Matrix H = Matrix::Identity(n, n);
  bool scaled = false;
  for (;;) {
    if (r.value < opts.target_value) {
      r.status = OptStatus::TargetReached;
      break;
    }
    if (r.gradient.norm() <= opts.grad_norm_tol) {
      r.status = OptStatus::Converged;
      break;
    }
    if (r.iterations >= opts.max_iter) {
      r.status = OptStatus::MaxIterations;
      break;
    }
    if (detail::expired(deadline)) {
      r.status = OptStatus::TimeBudget;
      break;
    }

    Vector d = -H * r.gradient;
    if (!(r.gradient.dot(d) < 0.0)) {
      H.setIdentity();
      d = -r.gradient;
    }

    LineSearchResult ls;
    try {
      ls = weak_wolfe_linesearch(oracle, r.x, d, r.value, r.gradient, opts, deadline);
    } catch (const std::exception&) {
      r.status = OptStatus::OracleFailure;
      break;
    }
    r.evaluations += ls.evaluations;
    if (!ls.success) {
      if (ls.best_value < r.value) {
        r.x += ls.best_step * d;
        r.value = ls.best_value;
        r.gradient = ls.best_gradient;
        r.trace.push_back(r.value);
        ++r.iterations;
      }
      r.status = detail::expired(deadline) ? OptStatus::TimeBudget : OptStatus::LineSearchFailure;
      break;
    }

    const Vector s = ls.step * d;
    const Vector y = ls.gradient - r.gradient;
    r.x += s;
    r.value = ls.value;
    r.gradient = ls.gradient;
    r.trace.push_back(r.value);
    ++r.iterations;
    if (opts.print_level >= 2 && opts.log)
      *opts.log << "    bfgs iter " << r.iterations << ": f = " << std::setprecision(10) << r.value
                << ", |g| = " << r.gradient.norm() << ", t = " << ls.step << "\n";

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector Hy = H * y;
      // H+ = (I - rho s y') H (I - rho y s') + rho s s'
      H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
      H = 0.5 * (H + H.transpose()).eval();
      if (opts.check_hessian)
        r.hessian_min_eig =
            std::min(r.hessian_min_eig, Eigen::SelfAdjointEigenSolver<Matrix>(H, Eigen::EigenvaluesOnly)
                                            .eigenvalues()
                                            .minCoeff());
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Minimum-norm element of a convex hull
// ---------------------------------------------------------------------------

struct HullResult
{
  Vector coeffs;  // convex weights, one per input vector
  Vector point;   // sum_i coeffs_i g_i
  double norm = 0.0;
};

/**
 * Minimum-norm point of conv{g_1, ..., g_m} (columns of @p G) by Wolfe's
 * active-set algorithm over the simplex.
 */
inline HullResult min_norm_convex_hull(const Matrix& G)
{
  const Index m = G.cols();
  if (m == 0) throw std::invalid_argument("min_norm_convex_hull: empty gradient set");
  const Vector norms2 = G.colwise().squaredNorm().transpose();
  const double scale = std::max(1.0, norms2.maxCoeff());
  const double tol = 1e-14 * scale;
  const double tiny = 1e-14;

  Index j0;
  norms2.minCoeff(&j0);
  std::vector<Index> active{j0};
  std::vector<double> lambda{1.0};
  Vector x = G.col(j0);

  auto affine_minimizer = [&](const std::vector<Index>& set) {
    const Index k = static_cast<Index>(set.size());
    Matrix P(G.rows(), k);
    for (Index i = 0; i < k; ++i) P.col(i) = G.col(set[i]);
    Matrix kkt = Matrix::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = P.transpose() * P;
    kkt.topRightCorner(k, 1).setOnes();
    kkt.bottomLeftCorner(1, k).setOnes();
    Vector rhs = Vector::Zero(k + 1);
    rhs(k) = 1.0;
    return Vector(kkt.completeOrthogonalDecomposition().solve(rhs).head(k));
  };

  for (int major = 0; major < 50 * (m + 10); ++major) {
    Index j;
    const double gx = (G.transpose() * x).minCoeff(&j);
    if (gx >= x.squaredNorm() - tol) break;
    if (std::find(active.begin(), active.end(), j) != active.end()) break;
    active.push_back(j);
    lambda.push_back(0.0);

    for (int minor = 0; minor < 10 * (m + 10); ++minor) {
      const Vector mu = affine_minimizer(active);
      if ((mu.array() > tiny).all()) {
        lambda.assign(mu.data(), mu.data() + mu.size());
        break;
      }
      double theta = 1.0;
      for (std::size_t i = 0; i < active.size(); ++i)
        if (mu(i) <= tiny && lambda[i] - mu(i) > 0.0) theta = std::min(theta, lambda[i] / (lambda[i] - mu(i)));
      for (std::size_t i = 0; i < active.size(); ++i) lambda[i] = (1.0 - theta) * lambda[i] + theta * mu(i);
      std::vector<Index> keep_idx;
      std::vector<double> keep_lambda;
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (lambda[i] > tiny) {
          keep_idx.push_back(active[i]);
          keep_lambda.push_back(lambda[i]);
        }
      }
      if (keep_idx.empty()) {
        keep_idx.push_back(j);
        keep_lambda.push_back(1.0);
      }
      active = std::move(keep_idx);
      lambda = std::move(keep_lambda);
    }
    double total = 0.0;
    for (double l : lambda) total += l;
    x.setZero();
    for (std::size_t i = 0; i < active.size(); ++i) {
      lambda[i] /= total;
      x += lambda[i] * G.col(active[i]);
    }
  }

  HullResult out;
  out.coeffs = Vector::Zero(m);
  for (std::size_t i = 0; i < active.size(); ++i) out.coeffs(active[i]) = lambda[i];
  out.point = x;
  out.norm = x.norm();
  return out;
}

inline HullResult min_norm_convex_hull(const std::vector<Vector>& gradients)
{
  if (gradients.empty()) throw std::invalid_argument("min_norm_convex_hull: empty gradient set");
  Matrix G(gradients.front().size(), static_cast<Index>(gradients.size()));
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    if (gradients[i].size() != G.rows()) throw std::invalid_argument("min_norm_convex_hull: length mismatch");
    G.col(static_cast<Index>(i)) = gradients[i];
  }
  return min_norm_convex_hull(G);
}

// ---------------------------------------------------------------------------
// Gradient sampling
// ---------------------------------------------------------------------------

struct GradientSamplingResult
{
  Vector x;
  double value = kInf;
  Vector gradient;
  Certificate certificate;
  int iterations = 0;
  OptStatus status = OptStatus::Converged;
  std::vector<double> trace;
};

namespace detail {

inline std::vector<double> default_radii(const Vector& x0)
{
  const double s = 1.0 + x0.norm();
  return {1e-1 * s, 1e-2 * s, 1e-3 * s, 1e-4 * s};
}

/// Uniform sample from the Euclidean ball of radius r.
template<class Rng>
Vector sample_ball(Index n, double r, Rng& rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector u(n);
  for (Index i = 0; i < n; ++i) u(i) = normal(rng);
  const double nu = u.norm();
  if (nu == 0.0) return Vector::Zero(n);
  return u * (r * std::pow(unif(rng), 1.0 / static_cast<double>(n)) / nu);
}

}  // namespace detail

/**
 * For each radius eps: sample gradients in the eps-ball, take the min-norm
 * element d of their convex hull (with the center gradient), stop the radius
 * once |d| <= 1e-2 eps, otherwise backtrack along -d with an Armijo test.
 */
inline GradientSamplingResult gradient_sampling(const Oracle& oracle, const Vector& x0, const OptOptions& opts)
{
  opts.validate();
  const auto deadline = opts.effective_deadline(Clock::now());
  const Index n = x0.size();
  const int samples = opts.gs_samples > 0 ? opts.gs_samples : static_cast<int>(std::max<Index>(2 * n, 1));
  const std::vector<double> radii = opts.gs_radii.empty() ? detail::default_radii(x0) : opts.gs_radii;
  std::mt19937_64 rng(opts.seed);

  GradientSamplingResult r;
  r.x = x0;
  OracleValue v = detail::call(oracle, x0);
  if (!std::isfinite(v.value)) throw std::invalid_argument("gradient_sampling: f(x0) is not finite");
  r.value = v.value;
  r.gradient = v.gradient;
  r.trace.push_back(r.value);
  r.certificate = {radii.front(), r.gradient.norm(), 1};

  constexpr double armijo = 1e-4;
  for (double eps : radii) {
    for (int it = 0; it < opts.gs_max_iter; ++it) {
      if (detail::expired(deadline)) {
        r.status = OptStatus::TimeBudget;
        return r;
      }
      std::vector<Vector> grads{r.gradient};
      int feasible = 0;
      try {
        for (int j = 0; j < samples; ++j) {
          const OracleValue s = detail::call(oracle, r.x + detail::sample_ball(n, eps, rng));
          if (std::isfinite(s.value)) {
            grads.push_back(s.gradient);
            ++feasible;
          }
        }
      } catch (const std::exception&) {
        r.status = OptStatus::OracleFailure;
        return r;
      }
      if (feasible == 0) {
        r.status = OptStatus::SamplesInfeasible;
        return r;
      }
      const HullResult hull = min_norm_convex_hull(grads);
      r.certificate = {eps, hull.norm, static_cast<int>(grads.size())};
      if (hull.norm <= 1e-2 * eps) break;

      const Vector& d = hull.point;
      const double dd = hull.norm * hull.norm;
      bool moved = false;
      double t = 1.0;
      for (int k = 0; k < opts.max_linesearch && !detail::expired(deadline); ++k, t *= 0.5) {
        OracleValue trial;
        try {
          trial = detail::call(oracle, r.x - t * d);
        } catch (const std::exception&) {
          r.status = OptStatus::OracleFailure;
          return r;
        }
        if (std::isfinite(trial.value) && trial.value < r.value - armijo * t * dd) {
          r.x -= t * d;
          r.value = trial.value;
          r.gradient = trial.gradient;
          r.trace.push_back(r.value);
          moved = true;
          break;
        }
      }
      ++r.iterations;
      if (opts.print_level >= 2 && opts.log)
        *opts.log << "    gs eps=" << eps << " f=" << std::setprecision(10) << r.value << " |d|=" << hull.norm
                  << "\n";
      if (!moved) break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Hybrid
// ---------------------------------------------------------------------------

struct HybridResult
{
  Vector x;
  double value = kInf;
  Vector gradient;
  BfgsResult bfgs;
  std::optional<Certificate> certificate;
};

/// BFGS, then (unless @p fast) gradient sampling from the BFGS point.
inline HybridResult hybrid_minimize(const Oracle& oracle, const Vector& x0, const OptOptions& opts, bool fast)
{
  OptOptions shared = opts;
  shared.deadline = opts.effective_deadline(Clock::now());
  shared.max_time = kInf;
  HybridResult out;
  out.bfgs = bfgs_minimize(oracle, x0, shared);
  out.x = out.bfgs.x;
  out.value = out.bfgs.value;
  out.gradient = out.bfgs.gradient;
  if (fast) return out;
  const GradientSamplingResult gs = gradient_sampling(oracle, out.x, shared);
  out.certificate = gs.certificate;
  if (gs.value <= out.value) {
    out.x = gs.x;
    out.value = gs.value;
    out.gradient = gs.gradient;
  }
  return out;
}

}  // namespace fixord

#endif  // FIXORD_NONSMOOTH_HPP
