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
#ifndef FIXORD_MEASURES_HPP
#define FIXORD_MEASURES_HPP

/**
 * @file
 * @brief Closed-loop performance measures and their gradients with respect to
 * the controller parameters.
 *
 * Every measure is evaluated on a ClosedLoop, whose sensitivity factors give
 * the derivative of the closed-loop realization with respect to each entry of
 * the packed controller gain. At nonsmooth points (tied eigenvalues, repeated
 * peak singular values) the gradient of one active branch is returned.
 */

#include "fixord/lti.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fixord {

/// Spectral abscissa at or above -kStabTol counts as unstable for H/R.
inline constexpr double kStabTol = 1e-10;

enum class MeasureKind { H, R, S };

inline MeasureKind measure_from_letter(char c)
{
  switch (c) {
    case 'h': return MeasureKind::H;
    case 'r': return MeasureKind::R;
    case 's': return MeasureKind::S;
    default: throw std::invalid_argument(std::string("unknown measure letter '") + c + "'");
  }
}

inline char letter(MeasureKind k)
{
  switch (k) {
    case MeasureKind::H: return 'h';
    case MeasureKind::R: return 'r';
    case MeasureKind::S: return 's';
  }
  return '?';
}

struct MeasureValue
{
  double value = 0.0;
  /// Over the free controller parameters; empty when value is +inf.
  Vector gradient;
  /// Active eigenvalue (spectral abscissa) when applicable.
  std::optional<Complex> active_eigenvalue;
  /// Peak frequency for H/R; +inf when the supremum is attained at infinity.
  std::optional<double> peak_frequency;

  [[nodiscard]] bool finite() const { return std::isfinite(value); }
  [[nodiscard]] bool has_gradient() const { return gradient.size() > 0 || finite(); }
};

namespace detail {

/// Maps a gradient over the packed gain to the free-parameter vector.
inline Vector packed_to_params(const Matrix& packed, ControllerDims d, const StructureMask* mask)
{
  return vectorize(Controller::from_packed(packed, d), mask);
}

/**
 * Gradient of Re(alpha * dS * beta) where S = [[A, B], [C, D]] of the closed
 * loop, alpha is a row of length n+p and beta a column of length n+m.
 */
inline Vector sensitivity_gradient(const ClosedLoop& cl, const Eigen::RowVectorXcd& alpha, const CVector& beta,
                                   const StructureMask* mask)
{
  const Eigen::RowVectorXcd l = alpha * cl.left.cast<Complex>();
  const CVector r = cl.right.cast<Complex>() * beta;
  const Matrix packed = (l.transpose() * r.transpose()).real();
  return packed_to_params(packed, cl.dims, mask);
}

inline Index free_params(const ClosedLoop& cl, const StructureMask* mask) { return parameter_count(cl.dims, mask); }

inline double sigma_max(const CMatrix& g)
{
  if (g.size() == 0) return 0.0;
  return Eigen::JacobiSVD<CMatrix>(g).singularValues()(0);
}

/// Index of the active eigenvalue: largest real part; ties by largest
/// imaginary part, then by position.
inline Index active_eigen_index(const CVector& ev)
{
  Index best = 0;
  for (Index i = 1; i < ev.size(); ++i) {
    const double tol = 1e-12 * (1.0 + std::abs(ev(best)));
    const double dr = ev(i).real() - ev(best).real();
    if (dr > tol || (std::abs(dr) <= tol && ev(i).imag() > ev(best).imag() + tol)) best = i;
  }
  return best;
}

inline double max_real(const CVector& ev)
{
  double m = -kInf;
  for (Index i = 0; i < ev.size(); ++i) m = std::max(m, ev(i).real());
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spectral abscissa
// ---------------------------------------------------------------------------

inline double spectral_abscissa_value(const StateSpace& sys)
{
  if (sys.states() == 0) return -kInf;
  return detail::max_real(sys.poles());
}

/// max Re(lambda(Acl)); gradient Re(y^* dA x) with y^* x = 1 at the active eigenvalue.
inline MeasureValue spectral_abscissa(const ClosedLoop& cl, const StructureMask* mask = nullptr)
{
  const Index n = cl.system.states();
  MeasureValue out;
  if (n == 0) {
    out.value = -kInf;
    out.gradient = Vector::Zero(detail::free_params(cl, mask));
    return out;
  }
  Eigen::EigenSolver<Matrix> es(cl.system.A, true);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral_abscissa: eigensolver failed");
  const CVector ev = es.eigenvalues();
  const CMatrix V = es.eigenvectors();
  const Index i = detail::active_eigen_index(ev);
  const CVector x = V.col(i);
  // Row i of V^{-1} is the left eigenvector normalized against x.
  const Eigen::RowVectorXcd ystar = V.partialPivLu().inverse().row(i);

  const Index p = cl.system.outputs(), m = cl.system.inputs();
  Eigen::RowVectorXcd alpha = Eigen::RowVectorXcd::Zero(n + p);
  alpha.head(n) = ystar;
  CVector beta = CVector::Zero(n + m);
  beta.head(n) = x;

  out.value = ev(i).real();
  out.active_eigenvalue = ev(i);
  out.gradient = detail::sensitivity_gradient(cl, alpha, beta, mask);
  if (!out.gradient.allFinite()) out.gradient.setZero();
  return out;
}

// ---------------------------------------------------------------------------
// H-infinity norm
// ---------------------------------------------------------------------------

struct HinfPeak
{
  double value = 0.0;
  double omega = 0.0;  // +inf when attained at infinite frequency
  bool stable = true;
};

namespace detail {

/// Nonnegative-and-negative frequencies w with iw an eigenvalue of the
/// Hamiltonian for level gamma, sorted ascending.
inline std::vector<double> imaginary_crossings(const StateSpace& g, double gamma)
{
  const Index n = g.states(), m = g.inputs(), p = g.outputs();
  Eigen::PartialPivLU<Matrix> rlu;
  for (int attempt = 0;; ++attempt) {
    rlu.compute(gamma * gamma * Matrix::Identity(m, m) - g.D.transpose() * g.D);
    if (rlu.rcond() >= 1e-14 || attempt == 20) break;
    gamma *= 1.0 + 1e-8;  // singular R: step the level off sigma_max(D)
  }
  const Matrix Rinv = rlu.inverse();
  const Matrix H11 = g.A + g.B * Rinv * g.D.transpose() * g.C;
  Matrix H(2 * n, 2 * n);
  H << H11, g.B * Rinv * g.B.transpose(),
      -g.C.transpose() * (Matrix::Identity(p, p) + g.D * Rinv * g.D.transpose()) * g.C, -H11.transpose();
  Eigen::EigenSolver<Matrix> es(H, false);
  if (es.info() != Eigen::Success) return {};
  std::vector<double> w;
  const CVector ev = es.eigenvalues();
  for (Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i).real()) <= 1e-7 * std::max(1.0, std::abs(ev(i)))) w.push_back(ev(i).imag());
  std::sort(w.begin(), w.end());
  return w;
}

}  // namespace detail

/**
 * The starting lower bound comes from sigma_max at 0, infinity, the pole
 * frequencies and a coarse sweep of the pole band. Level-set iteration on the
 * Hamiltonian H(gamma) follows: every level gamma above a
 * known lower bound that still has imaginary-axis eigenvalues yields
 * frequency intervals where sigma_max(G(iw)) > gamma, and the interval
 * midpoints raise the lower bound. Stops when no crossings remain at
 * gamma = lb (1 + 2e-10), kept at least 1e-8 above sigma_max(D); the peak is then polished by golden-section search
 * inside the last active interval. The returned value is always an attained
 * sigma_max(G(i omega)).
 */
inline HinfPeak hinf_peak(const StateSpace& g)
{
  using detail::sigma_max;
  HinfPeak out;
  if (g.states() == 0) {
    out.value = sigma_max(g.D.cast<Complex>());
    out.omega = kInf;
    return out;
  }
  const CVector poles = g.poles();
  if (detail::max_real(poles) >= -kStabTol) {
    out.value = kInf;
    out.omega = std::nan("");
    out.stable = false;
    return out;
  }

  auto sigma_at = [&](double w) { return sigma_max(g.evaluate(Complex(0.0, w))); };
  double best = sigma_max(g.D.cast<Complex>());
  double best_w = kInf;
  auto probe = [&](double w) {
    const double s = sigma_at(w);
    if (s > best) {
      best = s;
      best_w = w;
    }
    return s;
  };
  const double sigma_d = best;
  probe(0.0);
  double wlo = kInf, whi = 0.0;
  for (Index i = 0; i < poles.size(); ++i) {
    probe(std::abs(poles(i).imag()));
    probe(std::abs(poles(i)));
    wlo = std::min(wlo, std::abs(poles(i)));
    whi = std::max(whi, std::abs(poles(i)));
  }
  // Coarse sweep over the pole band; only tightens the starting bound.
  if (whi > 0.0) {
    wlo = std::max(wlo, 1e-12 * whi);
    const int sweep = 40;
    const double ratio = std::pow(1e4 * whi / wlo, 1.0 / (sweep - 1));
    double w = 1e-2 * wlo;
    for (int i = 0; i < sweep; ++i, w *= ratio) probe(w);
  }
  if (best <= 0.0) {
    // G vanishes at the origin, at infinity and at every pole modulus.
    out.value = 0.0;
    out.omega = 0.0;
    return out;
  }

  std::optional<std::pair<double, double>> bracket;
  for (int iter = 0; iter < 100; ++iter) {
    // Keep R = gamma^2 I - D'D away from singular when the bound sits at sigma_max(D).
    const double gamma = std::max(best * (1.0 + 2e-10), sigma_d * (1.0 + 1e-8));
    const auto w = detail::imaginary_crossings(g, gamma);
    if (w.size() < 2) break;
    bool improved = false;
    for (std::size_t k = 0; k + 1 < w.size(); ++k) {
      // Crossings are symmetric about 0; intervals with negative midpoint are mirrors.
      const double mid = 0.5 * (w[k] + w[k + 1]);
      if (mid < -1e-14 * std::max(1.0, std::abs(w[k]))) continue;
      const double wm = std::max(mid, 0.0);
      if (probe(wm) > gamma) {
        improved = true;
        if (best_w == wm) bracket = {w[k], w[k + 1]};
      }
    }
    if (!improved) break;
  }

  // Golden-section polish inside the last active interval.
  if (bracket && std::isfinite(best_w)) {
    double a = std::min(bracket->first, bracket->second), b = std::max(bracket->first, bracket->second);
    if (best_w >= a && best_w <= b) {
      const double r = 0.5 * (std::sqrt(5.0) - 1.0);
      double c = b - r * (b - a), d = a + r * (b - a);
      double fc = sigma_at(c), fd = sigma_at(d);
      for (int it = 0; it < 200 && (b - a) > 1e-15 * std::max(1.0, std::abs(best_w)); ++it) {
        if (fc > fd) {
          b = d;
          d = c;
          fd = fc;
          c = b - r * (b - a);
          fc = sigma_at(c);
        } else {
          a = c;
          c = d;
          fc = fd;
          d = a + r * (b - a);
          fd = sigma_at(d);
        }
      }
      probe(std::abs(c));
      probe(std::abs(d));
    }
  }

  out.value = best;
  out.omega = best_w;
  return out;
}

inline double hinf_norm_value(const StateSpace& g) { return hinf_peak(g).value; }

/// H-infinity norm of the closed loop; +inf when unstable.
inline MeasureValue hinf_norm(const ClosedLoop& cl, const StructureMask* mask = nullptr)
{
  const StateSpace& g = cl.system;
  const HinfPeak peak = hinf_peak(g);
  MeasureValue out;
  out.value = peak.value;
  if (!peak.stable) return out;
  out.peak_frequency = peak.omega;

  const Index n = g.states(), m = g.inputs(), p = g.outputs();
  if (m == 0 || p == 0) {
    out.gradient = Vector::Zero(detail::free_params(cl, mask));
    return out;
  }
  CMatrix Gw, CPhi(p, n), PhiB(n, m);
  if (std::isfinite(peak.omega) && n > 0) {
    CMatrix shifted = -g.A.cast<Complex>();
    shifted.diagonal().array() += Complex(0.0, peak.omega);
    const CMatrix Phi = shifted.partialPivLu().inverse();
    PhiB = Phi * g.B.cast<Complex>();
    CPhi = g.C.cast<Complex>() * Phi;
    Gw = g.D.cast<Complex>() + g.C.cast<Complex>() * PhiB;
  } else {
    CPhi.setZero();
    PhiB.setZero();
    Gw = g.D.cast<Complex>();
  }
  Eigen::JacobiSVD<CMatrix> svd(Gw, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const CVector u = svd.matrixU().col(0), v = svd.matrixV().col(0);

  Eigen::RowVectorXcd alpha(n + p);
  alpha << u.adjoint() * CPhi, u.adjoint();
  CVector beta(n + m);
  beta << PhiB * v, v;
  out.gradient = detail::sensitivity_gradient(cl, alpha, beta, mask);
  return out;
}

/**
 * Reciprocal of the complex stability radius of Acl, i.e. the H-infinity norm
 * of the resolvent system (Acl, I, I, 0). Zero for an empty state.
 */
inline MeasureValue stability_radius_reciprocal(const ClosedLoop& cl, const StructureMask* mask = nullptr)
{
  const Index n = cl.system.states();
  if (n == 0) {
    MeasureValue out;
    out.value = 0.0;
    out.gradient = Vector::Zero(detail::free_params(cl, mask));
    out.peak_frequency = kInf;
    return out;
  }
  const Index cols = cl.left.cols(), rows = cl.right.rows();
  ClosedLoop aux{StateSpace(cl.system.A, Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n)),
                 Matrix::Zero(2 * n, cols), Matrix::Zero(rows, 2 * n), cl.dims};
  aux.left.topRows(n) = cl.left.topRows(n);
  aux.right.leftCols(n) = cl.right.leftCols(n);
  return hinf_norm(aux, mask);
}

inline double stability_radius(const StateSpace& sys)
{
  const Index n = sys.states();
  if (n == 0) return kInf;
  const double recip =
      hinf_peak(StateSpace(sys.A, Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Zero(n, n))).value;
  return recip == kInf ? 0.0 : 1.0 / recip;
}

// ---------------------------------------------------------------------------
// Controller regularizer and dispatch
// ---------------------------------------------------------------------------

/// (|AK|_F^2 + |BK|_F^2 + |CK|_F^2 + |DK|_F^2)^(1/2); gradient 0 at K = 0.
inline MeasureValue controller_norm(const Controller& k, const StructureMask* mask = nullptr)
{
  const Vector theta = vectorize(k, mask);
  const double all = std::sqrt(k.AK.squaredNorm() + k.BK.squaredNorm() + k.CK.squaredNorm() + k.DK.squaredNorm());
  MeasureValue out;
  out.value = all;
  out.gradient = all > 0.0 ? Vector(theta / all) : Vector(Vector::Zero(theta.size()));
  return out;
}

inline MeasureValue measure(const ClosedLoop& cl, MeasureKind kind, const StructureMask* mask = nullptr)
{
  switch (kind) {
    case MeasureKind::S: return spectral_abscissa(cl, mask);
    case MeasureKind::H: return hinf_norm(cl, mask);
    case MeasureKind::R: return stability_radius_reciprocal(cl, mask);
  }
  throw std::logic_error("measure: bad kind");
}

/**
 * g_j for one channel. For kind H with augment_weight w > 0 the value is
 * hinf + w * (1 / stability radius). Throws IllPosedError when the loop
 * cannot be closed.
 */
inline MeasureValue channel_value(const PlantChannel& ch, const Controller& k, MeasureKind kind,
                                  double augment_weight = 0.0, const StructureMask* mask = nullptr)
{
  if (kind == MeasureKind::H) {
    if (const auto* p = std::get_if<GeneralizedPlant>(&ch); p && (p->m1() == 0 || p->p1() == 0))
      throw DimensionError("measure 'h' requires a performance channel (m1, p1 >= 1)");
  }
  const ClosedLoop cl = channel_loop(ch, k);
  MeasureValue out = measure(cl, kind, mask);
  if (kind == MeasureKind::H && augment_weight > 0.0 && out.finite()) {
    const MeasureValue r = stability_radius_reciprocal(cl, mask);
    out.value += augment_weight * r.value;
    if (!r.finite()) {
      out.gradient.resize(0);
    } else {
      out.gradient += augment_weight * r.gradient;
    }
  }
  return out;
}

}  // namespace fixord

#endif  // FIXORD_MEASURES_HPP
