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
#ifndef FIXORD_LTI_HPP
#define FIXORD_LTI_HPP

/**
 * @file
 * @brief Continuous-time state-space data model, closed-loop assembly and
 * controller (de)vectorization.
 *
 * Feedback convention: the controller closes the loop with POSITIVE feedback,
 * u = K y. A negative-feedback design K_neg corresponds to K = -K_neg.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fixord {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Interconnections whose I - D22*DK has reciprocal condition below this are rejected.
inline constexpr double kWellPosedRcond = 1e-12;

class DimensionError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the algebraic loop through D22 and DK cannot be closed.
class IllPosedError : public std::runtime_error
{
public:
  explicit IllPosedError(double rcond)
      : std::runtime_error("ill-posed interconnection: rcond(I - D22*DK) = " + std::to_string(rcond)),
        rcond_(rcond)
  {
  }
  [[nodiscard]] double rcond() const noexcept { return rcond_; }

private:
  double rcond_;
};

namespace detail {

inline void require(bool ok, const std::string& what)
{
  if (!ok) throw DimensionError(what);
}

inline std::string dims(const Matrix& m)
{
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline bool finite(const Matrix& m) { return m.allFinite(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// StateSpace
// ---------------------------------------------------------------------------

/// x' = A x + B u, y = C x + D u. A 0x0 state matrix denotes a static gain D.
struct StateSpace
{
  Matrix A, B, C, D;

  StateSpace() = default;
  StateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d))
  {
    validate();
  }

  static StateSpace static_gain(Matrix d)
  {
    const Index p = d.rows(), m = d.cols();
    return StateSpace(Matrix(0, 0), Matrix(0, m), Matrix(p, 0), std::move(d));
  }

  [[nodiscard]] Index states() const { return A.rows(); }
  [[nodiscard]] Index inputs() const { return D.cols(); }
  [[nodiscard]] Index outputs() const { return D.rows(); }

  void validate() const
  {
    using detail::require;
    require(A.rows() == A.cols(), "StateSpace: A must be square, got " + detail::dims(A));
    require(B.rows() == A.rows(), "StateSpace: B rows must equal n, got " + detail::dims(B));
    require(C.cols() == A.rows(), "StateSpace: C cols must equal n, got " + detail::dims(C));
    require(D.rows() == C.rows() && D.cols() == B.cols(),
            "StateSpace: D must be p x m, got " + detail::dims(D));
  }

  /// G(s) = D + C (sI - A)^{-1} B.
  [[nodiscard]] CMatrix evaluate(Complex s) const
  {
    CMatrix g = D.cast<Complex>();
    if (states() == 0) return g;
    CMatrix shifted = -A.cast<Complex>();
    shifted.diagonal().array() += s;
    g += C.cast<Complex>() * shifted.partialPivLu().solve(B.cast<Complex>());
    return g;
  }

  [[nodiscard]] CVector poles() const
  {
    if (states() == 0) return CVector(0);
    return Eigen::EigenSolver<Matrix>(A, false).eigenvalues();
  }
};

// ---------------------------------------------------------------------------
// Transfer functions
// ---------------------------------------------------------------------------

/// SISO rational function, coefficients in descending powers of s.
class SisoTransferFunction
{
public:
  SisoTransferFunction() : num_{1.0}, den_{1.0} {}

  SisoTransferFunction(std::vector<double> num, std::vector<double> den)
      : num_(std::move(num)), den_(std::move(den))
  {
    strip(num_);
    if (num_.empty()) num_ = {0.0};
    if (den_.empty() || den_.front() == 0.0)
      throw std::invalid_argument("transfer function: leading denominator coefficient must be nonzero");
    if (num_.size() > den_.size())
      throw std::invalid_argument("transfer function: improper (deg num > deg den)");
    for (double c : num_)
      if (!std::isfinite(c)) throw std::invalid_argument("transfer function: non-finite coefficient");
    for (double c : den_)
      if (!std::isfinite(c)) throw std::invalid_argument("transfer function: non-finite coefficient");
  }

  [[nodiscard]] const std::vector<double>& num() const { return num_; }
  [[nodiscard]] const std::vector<double>& den() const { return den_; }
  [[nodiscard]] std::size_t order() const { return den_.size() - 1; }

  [[nodiscard]] Complex evaluate(Complex s) const { return horner(num_, s) / horner(den_, s); }

  static Complex horner(const std::vector<double>& c, Complex s)
  {
    Complex acc = 0.0;
    for (double v : c) acc = acc * s + v;
    return acc;
  }

  friend bool operator==(const SisoTransferFunction&, const SisoTransferFunction&) = default;

private:
  static void strip(std::vector<double>& c)
  {
    auto it = std::find_if(c.begin(), c.end(), [](double v) { return v != 0.0; });
    c.erase(c.begin(), it);
  }

  std::vector<double> num_;
  std::vector<double> den_;
};

/// Controllable canonical realization of a proper SISO transfer function.
inline StateSpace tf_to_ss(const SisoTransferFunction& tf)
{
  const auto& den = tf.den();
  const std::size_t n = tf.order();
  const double lead = den.front();

  // Normalized coefficients: s^n + a1 s^{n-1} + ... + an.
  std::vector<double> a(n + 1), b(n + 1, 0.0);
  for (std::size_t i = 0; i <= n; ++i) a[i] = den[i] / lead;
  const auto& num = tf.num();
  const std::size_t offset = n + 1 - num.size();
  for (std::size_t i = 0; i < num.size(); ++i) b[offset + i] = num[i] / lead;

  Matrix A = Matrix::Zero(n, n), B = Matrix::Zero(n, 1), C(1, n), D(1, 1);
  D(0, 0) = b[0];
  for (std::size_t i = 0; i < n; ++i) {
    A(0, i) = -a[i + 1];
    C(0, i) = b[i + 1] - b[0] * a[i + 1];
    if (i + 1 < n) A(i + 1, i) = 1.0;
  }
  if (n > 0) B(0, 0) = 1.0;
  return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D));
}

/// Monic characteristic polynomial coefficients (descending) from a set of roots.
inline std::vector<double> poly_from_roots(const CVector& roots)
{
  std::vector<Complex> c{1.0};
  for (Index i = 0; i < roots.size(); ++i) {
    std::vector<Complex> next(c.size() + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
      next[k] += c[k];
      next[k + 1] -= c[k] * roots(i);
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  std::transform(c.begin(), c.end(), out.begin(), [](Complex z) { return z.real(); });
  return out;
}

/// Transfer function of a SISO state-space system (no pole/zero cancellation).
inline SisoTransferFunction ss_to_tf(const StateSpace& g)
{
  if (g.inputs() != 1 || g.outputs() != 1) throw DimensionError("ss_to_tf: system must be SISO");
  const double d = g.D(0, 0);
  if (g.states() == 0) return SisoTransferFunction({d}, {1.0});
  // G(s) = d + [det(sI - A + BC) - det(sI - A)] / det(sI - A)
  const auto den = poly_from_roots(Eigen::EigenSolver<Matrix>(g.A, false).eigenvalues());
  const Matrix closed = g.A - g.B * g.C;
  const auto pz = poly_from_roots(Eigen::EigenSolver<Matrix>(closed, false).eigenvalues());
  std::vector<double> num(den.size());
  for (std::size_t i = 0; i < den.size(); ++i) num[i] = pz[i] - den[i] + d * den[i];
  return SisoTransferFunction(std::move(num), den);
}

// ---------------------------------------------------------------------------
// Generalized plant and controller
// ---------------------------------------------------------------------------

/**
 * Partitioned plant
 *   x' = A x + B1 w + B2 u
 *   z  = C1 x + D11 w + D12 u
 *   y  = C2 x + D21 w + D22 u
 * with a nonempty controller channel (m2, p2 >= 1). The performance channel
 * may be empty (m1 = p1 = 0).
 */
class GeneralizedPlant
{
public:
  GeneralizedPlant(Matrix a, Matrix b1, Matrix b2, Matrix c1, Matrix c2, Matrix d11, Matrix d12, Matrix d21,
                   Matrix d22)
      : A(std::move(a)), B1(std::move(b1)), B2(std::move(b2)), C1(std::move(c1)), C2(std::move(c2)),
        D11(std::move(d11)), D12(std::move(d12)), D21(std::move(d21)), D22(std::move(d22))
  {
    validate();
  }

  Matrix A, B1, B2, C1, C2, D11, D12, D21, D22;

  [[nodiscard]] Index n() const { return A.rows(); }
  [[nodiscard]] Index m1() const { return B1.cols(); }
  [[nodiscard]] Index m2() const { return B2.cols(); }
  [[nodiscard]] Index p1() const { return C1.rows(); }
  [[nodiscard]] Index p2() const { return C2.rows(); }

  /// The w -> z open-loop channel as a state-space system.
  [[nodiscard]] StateSpace performance_channel() const { return StateSpace(A, B1, C1, D11); }
  /// The u -> y open-loop channel.
  [[nodiscard]] StateSpace control_channel() const { return StateSpace(A, B2, C2, D22); }

  void validate() const
  {
    using detail::dims;
    using detail::require;
    const Index n_ = A.rows();
    require(A.cols() == n_, "plant: A must be square, got " + dims(A));
    require(B1.rows() == n_ && B2.rows() == n_, "plant: B1/B2 rows must equal n");
    require(C1.cols() == n_ && C2.cols() == n_, "plant: C1/C2 cols must equal n");
    require(D11.rows() == p1() && D11.cols() == m1(), "plant: D11 must be p1 x m1, got " + dims(D11));
    require(D12.rows() == p1() && D12.cols() == m2(), "plant: D12 must be p1 x m2, got " + dims(D12));
    require(D21.rows() == p2() && D21.cols() == m1(), "plant: D21 must be p2 x m1, got " + dims(D21));
    require(D22.rows() == p2() && D22.cols() == m2(), "plant: D22 must be p2 x m2, got " + dims(D22));
    require(m2() >= 1 && p2() >= 1, "plant: controller channel must be nonempty (m2, p2 >= 1)");
    for (const Matrix* m : {&A, &B1, &B2, &C1, &C2, &D11, &D12, &D21, &D22})
      require(detail::finite(*m), "plant: non-finite entry");
  }
};

struct ControllerDims
{
  Index order = 0;
  Index m2 = 1;
  Index p2 = 1;
  friend bool operator==(const ControllerDims&, const ControllerDims&) = default;
};

/// x_K' = AK x_K + BK y, u = CK x_K + DK y.
class Controller
{
public:
  Controller() : Controller(Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), Matrix::Zero(1, 1)) {}

  Controller(Matrix ak, Matrix bk, Matrix ck, Matrix dk)
      : AK(std::move(ak)), BK(std::move(bk)), CK(std::move(ck)), DK(std::move(dk))
  {
    using detail::require;
    require(AK.rows() == AK.cols(), "controller: AK must be square, got " + detail::dims(AK));
    require(BK.rows() == AK.rows() && BK.cols() == DK.cols(), "controller: BK must be nK x p2");
    require(CK.cols() == AK.rows() && CK.rows() == DK.rows(), "controller: CK must be m2 x nK");
    require(DK.rows() >= 1 && DK.cols() >= 1, "controller: DK must be nonempty");
  }

  static Controller zero(ControllerDims d)
  {
    return Controller(Matrix::Zero(d.order, d.order), Matrix::Zero(d.order, d.p2), Matrix::Zero(d.m2, d.order),
                      Matrix::Zero(d.m2, d.p2));
  }

  Matrix AK, BK, CK, DK;

  [[nodiscard]] Index order() const { return AK.rows(); }
  [[nodiscard]] Index m2() const { return DK.rows(); }
  [[nodiscard]] Index p2() const { return DK.cols(); }
  [[nodiscard]] ControllerDims dims() const { return {order(), m2(), p2()}; }

  [[nodiscard]] StateSpace as_state_space() const { return StateSpace(AK, BK, CK, DK); }

  /// Static gain acting on [y; x_K] and producing [u; x_K']: [[DK, CK], [BK, AK]].
  [[nodiscard]] Matrix packed() const
  {
    const Index nk = order();
    Matrix k(m2() + nk, p2() + nk);
    k << DK, CK, BK, AK;
    return k;
  }

  static Controller from_packed(const Matrix& k, ControllerDims d)
  {
    detail::require(k.rows() == d.m2 + d.order && k.cols() == d.p2 + d.order, "controller: packed size mismatch");
    return Controller(k.bottomRightCorner(d.order, d.order), k.bottomLeftCorner(d.order, d.p2),
                      k.topRightCorner(d.m2, d.order), k.topLeftCorner(d.m2, d.p2));
  }

  friend bool operator==(const Controller& a, const Controller& b)
  {
    return a.AK == b.AK && a.BK == b.BK && a.CK == b.CK && a.DK == b.DK;
  }
};

/// Sparsity structure on the controller blocks; true marks a free parameter.
struct StructureMask
{
  Mask AK, BK, CK, DK;

  static StructureMask full(ControllerDims d)
  {
    return {Mask::Constant(d.order, d.order, true), Mask::Constant(d.order, d.p2, true),
            Mask::Constant(d.m2, d.order, true), Mask::Constant(d.m2, d.p2, true)};
  }

  [[nodiscard]] ControllerDims dims() const { return {AK.rows(), DK.rows(), DK.cols()}; }

  [[nodiscard]] Index free_count() const { return AK.count() + BK.count() + CK.count() + DK.count(); }

  void check(ControllerDims d) const
  {
    detail::require(AK.rows() == d.order && AK.cols() == d.order && BK.rows() == d.order && BK.cols() == d.p2 &&
                        CK.rows() == d.m2 && CK.cols() == d.order && DK.rows() == d.m2 && DK.cols() == d.p2,
                    "structure mask does not match controller dimensions");
  }

  friend bool operator==(const StructureMask& a, const StructureMask& b)
  {
    auto same = [](const Mask& x, const Mask& y) {
      return x.rows() == y.rows() && x.cols() == y.cols() && (x == y).all();
    };
    return same(a.AK, b.AK) && same(a.BK, b.BK) && same(a.CK, b.CK) && same(a.DK, b.DK);
  }
};

/// Number of optimization parameters for the given dimensions and optional mask.
inline Index parameter_count(ControllerDims d, const StructureMask* mask = nullptr)
{
  if (mask) {
    mask->check(d);
    return mask->free_count();
  }
  return d.order * d.order + d.order * d.p2 + d.m2 * d.order + d.m2 * d.p2;
}

/// Flattens AK, BK, CK, DK (each column-major) skipping masked-out entries.
inline Vector vectorize(const Controller& k, const StructureMask* mask = nullptr)
{
  const ControllerDims d = k.dims();
  Vector v(parameter_count(d, mask));
  Index pos = 0;
  auto put = [&](const Matrix& m, const Mask* mm) {
    for (Index c = 0; c < m.cols(); ++c)
      for (Index r = 0; r < m.rows(); ++r)
        if (!mm || (*mm)(r, c)) v(pos++) = m(r, c);
  };
  put(k.AK, mask ? &mask->AK : nullptr);
  put(k.BK, mask ? &mask->BK : nullptr);
  put(k.CK, mask ? &mask->CK : nullptr);
  put(k.DK, mask ? &mask->DK : nullptr);
  return v;
}

inline Controller devectorize(const Vector& v, ControllerDims d, const StructureMask* mask = nullptr)
{
  const Index count = parameter_count(d, mask);
  if (v.size() != count)
    throw DimensionError("devectorize: expected " + std::to_string(count) + " parameters, got " +
                         std::to_string(v.size()));
  Controller k = Controller::zero(d);
  Index pos = 0;
  auto take = [&](Matrix& m, const Mask* mm) {
    for (Index c = 0; c < m.cols(); ++c)
      for (Index r = 0; r < m.rows(); ++r)
        if (!mm || (*mm)(r, c)) m(r, c) = v(pos++);
  };
  take(k.AK, mask ? &mask->AK : nullptr);
  take(k.BK, mask ? &mask->BK : nullptr);
  take(k.CK, mask ? &mask->CK : nullptr);
  take(k.DK, mask ? &mask->DK : nullptr);
  return k;
}

/// Zeroes masked-out entries.
inline Controller apply_mask(Controller k, const StructureMask& mask)
{
  mask.check(k.dims());
  k.AK = mask.AK.select(k.AK, 0.0);
  k.BK = mask.BK.select(k.BK, 0.0);
  k.CK = mask.CK.select(k.CK, 0.0);
  k.DK = mask.DK.select(k.DK, 0.0);
  return k;
}

/**
 * Embeds a controller into a higher order. Off-diagonal padding is zero; the
 * new diagonal entries of AK are set to @p pad_pole so the added modes are
 * uncontrollable, unobservable and (for pad_pole < 0) stable. The transfer
 * function is unchanged.
 */
inline Controller pad_controller(const Controller& k, Index new_order, double pad_pole = -1.0)
{
  if (new_order < k.order()) throw DimensionError("pad_controller: cannot reduce controller order");
  Controller out = Controller::zero({new_order, k.m2(), k.p2()});
  const Index nk = k.order();
  out.AK.topLeftCorner(nk, nk) = k.AK;
  for (Index i = nk; i < new_order; ++i) out.AK(i, i) = pad_pole;
  out.BK.topRows(nk) = k.BK;
  out.CK.leftCols(nk) = k.CK;
  out.DK = k.DK;
  return out;
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

/// Marker for a channel whose "closed loop" is the controller itself.
struct ControllerItself
{
  friend bool operator==(const ControllerItself&, const ControllerItself&) = default;
};

using PlantChannel = std::variant<GeneralizedPlant, ControllerItself>;

class PlantSet
{
public:
  /// Shared (m2, p2) are taken from the first plant channel, or from @p io
  /// when every channel is ControllerItself.
  explicit PlantSet(std::vector<PlantChannel> channels, std::optional<std::pair<Index, Index>> io = std::nullopt)
      : channels_(std::move(channels))
  {
    if (channels_.empty()) throw DimensionError("plant set: at least one channel is required");
    bool have = false;
    for (const auto& ch : channels_) {
      if (const auto* p = std::get_if<GeneralizedPlant>(&ch)) {
        if (!have) {
          m2_ = p->m2();
          p2_ = p->p2();
          have = true;
        } else if (p->m2() != m2_ || p->p2() != p2_) {
          throw DimensionError("plant set: all plants must share (m2, p2)");
        }
      }
    }
    if (io) {
      if (have && (io->first != m2_ || io->second != p2_))
        throw DimensionError("plant set: explicit (m2, p2) disagrees with plants");
      m2_ = io->first;
      p2_ = io->second;
    } else if (!have) {
      m2_ = p2_ = 1;
    }
  }

  [[nodiscard]] const std::vector<PlantChannel>& channels() const { return channels_; }
  [[nodiscard]] std::size_t size() const { return channels_.size(); }
  [[nodiscard]] Index m2() const { return m2_; }
  [[nodiscard]] Index p2() const { return p2_; }
  [[nodiscard]] ControllerDims controller_dims(Index order) const { return {order, m2_, p2_}; }

private:
  std::vector<PlantChannel> channels_;
  Index m2_ = 1, p2_ = 1;
};

/// Wraps a SISO system as a plant with only the controller channel.
inline GeneralizedPlant siso_plant(const StateSpace& g)
{
  if (g.inputs() != 1 || g.outputs() != 1) throw DimensionError("siso_plant: system must be SISO");
  const Index n = g.states();
  return GeneralizedPlant(g.A, Matrix(n, 0), g.B, Matrix(0, n), g.C, Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), g.D);
}

// ---------------------------------------------------------------------------
// Closed loop
// ---------------------------------------------------------------------------

/**
 * Closed-loop system together with its first-order sensitivity to the packed
 * controller gain K^ = [[DK, CK], [BK, AK]]:
 *
 *   d [[Acl, Bcl], [Ccl, Dcl]] / d K^(i, j) = left.col(i) * right.row(j).
 */
struct ClosedLoop
{
  StateSpace system;
  Matrix left;   // (n_cl + p1) x (m2 + nK)
  Matrix right;  // (p2 + nK) x (n_cl + m1)
  ControllerDims dims;
};

namespace detail {

inline Matrix block_diag(const Matrix& a, const Matrix& b)
{
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

inline Matrix vstack(const Matrix& a, const Matrix& b)
{
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

inline Matrix hstack(const Matrix& a, const Matrix& b)
{
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace detail

/// Closes @p p with @p k (u = K y) and returns the w -> z loop with its sensitivities.
inline ClosedLoop close_loop(const GeneralizedPlant& p, const Controller& k)
{
  using detail::block_diag;
  using detail::hstack;
  using detail::vstack;
  if (k.m2() != p.m2() || k.p2() != p.p2())
    throw DimensionError("closed loop: controller (m2, p2) does not match plant");

  const Index n = p.n(), nk = k.order(), m2 = p.m2(), p2 = p.p2(), m1 = p.m1(), p1 = p.p1();

  Eigen::PartialPivLU<Matrix> loop(Matrix::Identity(p2, p2) - p.D22 * k.DK);
  const double rcond = loop.rcond();
  if (!(rcond >= kWellPosedRcond)) throw IllPosedError(rcond);

  // Plant augmented with nK pass-through controller states; K^ acts as static feedback.
  const Matrix Ah = block_diag(p.A, Matrix::Zero(nk, nk));
  const Matrix B1h = vstack(p.B1, Matrix::Zero(nk, m1));
  const Matrix B2h = block_diag(p.B2, Matrix::Identity(nk, nk));
  const Matrix C1h = hstack(p.C1, Matrix::Zero(p1, nk));
  const Matrix C2h = block_diag(p.C2, Matrix::Identity(nk, nk));
  const Matrix D12h = hstack(p.D12, Matrix::Zero(p1, nk));
  const Matrix D21h = vstack(p.D21, Matrix::Zero(nk, m1));
  const Matrix D22h = block_diag(p.D22, Matrix::Zero(nk, nk));

  const Matrix kh = k.packed();
  const Matrix E = (Matrix::Identity(p2 + nk, p2 + nk) - D22h * kh).partialPivLu().inverse();
  const Matrix F = (Matrix::Identity(m2 + nk, m2 + nk) - kh * D22h).partialPivLu().inverse();
  const Matrix M = kh * E;

  ClosedLoop cl{StateSpace(Ah + B2h * M * C2h, B1h + B2h * M * D21h, C1h + D12h * M * C2h, p.D11 + D12h * M * D21h),
                vstack(B2h, D12h) * F, E * hstack(C2h, D21h), k.dims()};
  return cl;
}

/// Closed loop w -> z for positive feedback u = K y. State ordering is [x; x_K].
inline StateSpace assemble_closed_loop(const GeneralizedPlant& p, const Controller& k)
{
  return close_loop(p, k).system;
}

/// The controller viewed as a channel of its own, with sensitivities.
inline ClosedLoop controller_loop(const Controller& k)
{
  const Index nk = k.order(), m2 = k.m2(), p2 = k.p2();
  // [[AK, BK], [CK, DK]] = Pr * K^ * Pc
  Matrix pr = Matrix::Zero(nk + m2, m2 + nk);
  for (Index a = 0; a < nk; ++a) pr(a, m2 + a) = 1.0;
  for (Index b = 0; b < m2; ++b) pr(nk + b, b) = 1.0;
  Matrix pc = Matrix::Zero(p2 + nk, nk + p2);
  for (Index a = 0; a < nk; ++a) pc(p2 + a, a) = 1.0;
  for (Index b = 0; b < p2; ++b) pc(b, nk + b) = 1.0;
  return ClosedLoop{k.as_state_space(), std::move(pr), std::move(pc), k.dims()};
}

inline ClosedLoop channel_loop(const PlantChannel& ch, const Controller& k)
{
  if (const auto* p = std::get_if<GeneralizedPlant>(&ch)) return close_loop(*p, k);
  return controller_loop(k);
}

// ---------------------------------------------------------------------------
// Mixed-sensitivity weighting
// ---------------------------------------------------------------------------

namespace detail {

/// Block-diagonal replication of a SISO system over @p copies channels.
inline StateSpace replicate(const StateSpace& w, Index copies)
{
  const Index n = w.states();
  Matrix A = Matrix::Zero(n * copies, n * copies), B = Matrix::Zero(n * copies, copies),
         C = Matrix::Zero(copies, n * copies), D = Matrix::Zero(copies, copies);
  for (Index i = 0; i < copies; ++i) {
    A.block(i * n, i * n, n, n) = w.A;
    B.block(i * n, i, n, 1) = w.B;
    C.block(i, i * n, 1, n) = w.C;
    D(i, i) = w.D(0, 0);
  }
  return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D));
}

}  // namespace detail

/**
 * Mixed-sensitivity augmentation of a square plant G (p x m) with SISO weights
 * applied on every channel:
 *
 *   z1 = W1 (w - G u),  z2 = W2 u,  y = w - G u.
 *
 * States are ordered [x_G; x_W1; x_W2].
 */
inline GeneralizedPlant augment_weights(const StateSpace& g, const std::optional<SisoTransferFunction>& w1,
                                        const std::optional<SisoTransferFunction>& w2)
{
  if (!w1 && !w2) throw std::invalid_argument("augment_weights: at least one weight is required");
  const Index p = g.outputs(), m = g.inputs(), ng = g.states();
  const StateSpace W1 = w1 ? detail::replicate(tf_to_ss(*w1), p) : StateSpace::static_gain(Matrix(0, p));
  const StateSpace W2 = w2 ? detail::replicate(tf_to_ss(*w2), m) : StateSpace::static_gain(Matrix(0, m));
  const Index n1 = W1.states(), n2 = W2.states(), q1 = W1.outputs(), q2 = W2.outputs();
  const Index n = ng + n1 + n2, p1 = q1 + q2;

  Matrix A = Matrix::Zero(n, n), B1 = Matrix::Zero(n, p), B2 = Matrix::Zero(n, m);
  Matrix C1 = Matrix::Zero(p1, n), C2 = Matrix::Zero(p, n);
  Matrix D11 = Matrix::Zero(p1, p), D12 = Matrix::Zero(p1, m), D21 = Matrix::Identity(p, p), D22 = -g.D;

  // plant states
  A.topLeftCorner(ng, ng) = g.A;
  B2.topRows(ng) = g.B;
  // W1 driven by e = w - Cg x - Dg u
  A.block(ng, 0, n1, ng) = -W1.B * g.C;
  A.block(ng, ng, n1, n1) = W1.A;
  B1.middleRows(ng, n1) = W1.B;
  B2.middleRows(ng, n1) = -W1.B * g.D;
  // W2 driven by u
  A.block(ng + n1, ng + n1, n2, n2) = W2.A;
  B2.bottomRows(n2) = W2.B;
  // z1
  C1.block(0, 0, q1, ng) = -W1.D * g.C;
  C1.block(0, ng, q1, n1) = W1.C;
  D11.topRows(q1) = W1.D;
  D12.topRows(q1) = -W1.D * g.D;
  // z2
  C1.block(q1, ng + n1, q2, n2) = W2.C;
  D12.bottomRows(q2) = W2.D;
  // y = e
  C2.leftCols(ng) = -g.C;

  return GeneralizedPlant(std::move(A), std::move(B1), std::move(B2), std::move(C1), std::move(C2), std::move(D11),
                          std::move(D12), std::move(D21), std::move(D22));
}

}  // namespace fixord

#endif  // FIXORD_LTI_HPP
