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
#include "fixord/lti.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace fixord;
using namespace fixord::testing;

namespace {

// Reference controller for the three-plant first-order example: (s + 1.182) / (s + 1.595).
Controller reference_controller()
{
  return Controller(Matrix::Constant(1, 1, -1.595), Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, -0.413),
                    Matrix::Constant(1, 1, 1.0));
}

std::vector<Complex> sorted(const CVector& v)
{
  std::vector<Complex> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

}  // namespace

TEST(TfToSs, FirstOrderLag)
{
  const StateSpace g = tf_to_ss(SisoTransferFunction({1}, {1, 1}));
  EXPECT_EQ(g.A, Matrix::Constant(1, 1, -1.0));
  EXPECT_EQ(g.B, Matrix::Constant(1, 1, 1.0));
  EXPECT_EQ(g.C, Matrix::Constant(1, 1, 1.0));
  EXPECT_EQ(g.D, Matrix::Constant(1, 1, 0.0));
}

TEST(TfToSs, BiproperPlantWithUnstablePole)
{
  const StateSpace g = tf_to_ss(SisoTransferFunction({2, -9}, {1, -8.8}));
  ASSERT_EQ(g.states(), 1);
  EXPECT_NEAR(g.A(0, 0), 8.8, 1e-15);
  EXPECT_EQ(g.D(0, 0), 2.0);
  EXPECT_NEAR(g.evaluate(0.0)(0, 0).real(), 9.0 / 8.8, 1e-14);
}

TEST(TfToSs, StaticGain)
{
  const StateSpace g = tf_to_ss(SisoTransferFunction({5}, {2}));
  EXPECT_EQ(g.states(), 0);
  EXPECT_EQ(g.D(0, 0), 2.5);
}

TEST(TfToSs, FrequencyResponseMatchesRationalFunction)
{
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = uniform_int(1, 6, rng);
    const int nn = uniform_int(0, n, rng);
    std::vector<double> den(n + 1), num(nn + 1);
    for (auto& c : den) c = randn(1, 1, rng)(0, 0);
    den[0] = 1.0 + std::abs(den[0]);
    for (auto& c : num) c = randn(1, 1, rng)(0, 0);
    const SisoTransferFunction tf(num, den);
    const StateSpace g = tf_to_ss(tf);
    for (double w : {0.1, 0.7, 2.0, 13.0}) {
      const Complex s(0.05, w);
      EXPECT_LT(std::abs(g.evaluate(s)(0, 0) - tf.evaluate(s)), 1e-9 * (1 + std::abs(tf.evaluate(s))));
    }
  }
}

TEST(TfToSs, RejectsImproper)
{
  EXPECT_THROW(SisoTransferFunction({1, 0, 0}, {1, 1}), std::invalid_argument);
  EXPECT_THROW(SisoTransferFunction({1}, {0, 1}), std::invalid_argument);
}

TEST(SsToTf, RecoversReferenceController)
{
  const SisoTransferFunction tf = ss_to_tf(reference_controller().as_state_space());
  ASSERT_EQ(tf.num().size(), 2u);
  EXPECT_NEAR(tf.num()[0], 1.0, 1e-12);
  EXPECT_NEAR(tf.num()[1], 1.182, 1e-12);
  EXPECT_NEAR(tf.den()[1], 1.595, 1e-12);
}

TEST(SisoPlant, WrapsControlChannel)
{
  const GeneralizedPlant p = siso_plant(tf_to_ss(SisoTransferFunction({1}, {1, 1})));
  EXPECT_EQ(p.m1(), 0);
  EXPECT_EQ(p.p1(), 0);
  EXPECT_EQ(p.D22(0, 0), 0.0);

  EXPECT_EQ(siso_plant(tf_to_ss(SisoTransferFunction({2, -9}, {1, -8.8}))).D22(0, 0), 2.0);

  const GeneralizedPlant s = siso_plant(StateSpace::static_gain(Matrix::Constant(1, 1, 3.0)));
  EXPECT_EQ(s.n(), 0);
  EXPECT_EQ(s.D22(0, 0), 3.0);

  EXPECT_THROW(siso_plant(StateSpace::static_gain(Matrix::Ones(2, 1))), DimensionError);
}

TEST(ClosedLoop, ReferenceControllerOnFirstPlant)
{
  const GeneralizedPlant p = siso_plant(tf_to_ss(SisoTransferFunction({2, -9}, {1, -8.8})));
  const auto ev = sorted(assemble_closed_loop(p, reference_controller()).poles());
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[0].real(), -0.2842, 5e-3);
  EXPECT_NEAR(ev[0].imag(), -1.8223, 5e-3);
  EXPECT_NEAR(ev[1].real(), -0.2842, 5e-3);
  EXPECT_NEAR(ev[1].imag(), 1.8223, 5e-3);
}

TEST(ClosedLoop, ZeroStaticControllerLeavesDynamics)
{
  Rng rng(5);
  const GeneralizedPlant p = random_plant(3, 1, 2, 1, 2, rng);
  const StateSpace cl = assemble_closed_loop(p, Controller::zero({0, 2, 2}));
  EXPECT_EQ(cl.A, p.A);
  EXPECT_EQ(cl.states(), p.n());
}

TEST(ClosedLoop, IllPosedFeedthroughIsRejected)
{
  // D22 = 1 and DK = 1 make I - D22 DK singular.
  const GeneralizedPlant p = siso_plant(tf_to_ss(SisoTransferFunction({1, 2}, {1, -6})));
  try {
    assemble_closed_loop(p, reference_controller());
    FAIL() << "expected IllPosedError";
  } catch (const IllPosedError& e) {
    EXPECT_LT(e.rcond(), kWellPosedRcond);
  }
}

TEST(ClosedLoop, MatchesPointwiseInterconnection)
{
  Rng rng(11);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const Index n = uniform_int(0, 5, rng), nk = uniform_int(0, 3, rng);
    const Index m1 = uniform_int(1, 3, rng), p1 = uniform_int(1, 3, rng);
    const Index m2 = uniform_int(1, 2, rng), p2 = uniform_int(1, 2, rng);
    const GeneralizedPlant p = random_plant(n, m1, m2, p1, p2, rng);
    const Controller k = random_controller(nk, m2, p2, rng, 0.5);
    const StateSpace cl = assemble_closed_loop(p, k);
    EXPECT_EQ(cl.states(), n + nk);
    std::uniform_real_distribution<double> wdist(-2.0, 2.0);
    for (int f = 0; f < 20; ++f) {
      const Complex s(0.0, std::pow(10.0, wdist(rng)));
      const CMatrix direct = lft_pointwise(p, k, s);
      const CMatrix ours = cl.evaluate(s);
      EXPECT_LE((direct - ours).norm(), 1e-10 * std::max(1.0, direct.norm()));
    }
    ++checked;
  }
  EXPECT_EQ(checked, 60);
}

TEST(ClosedLoop, SensitivityMatchesFiniteDifference)
{
  Rng rng(17);
  const GeneralizedPlant p = random_plant(3, 2, 2, 2, 1, rng);
  const Controller k = random_controller(2, 2, 1, rng);
  const ClosedLoop cl = close_loop(p, k);
  const Matrix K = k.packed();
  auto stacked = [&](const Matrix& kp) {
    const StateSpace s = assemble_closed_loop(p, Controller::from_packed(kp, k.dims()));
    Matrix m(s.states() + s.outputs(), s.states() + s.inputs());
    m << s.A, s.B, s.C, s.D;
    return m;
  };
  const double h = 1e-6;
  for (Index i = 0; i < K.rows(); ++i)
    for (Index j = 0; j < K.cols(); ++j) {
      Matrix kp = K, km = K;
      kp(i, j) += h;
      km(i, j) -= h;
      const Matrix fd = (stacked(kp) - stacked(km)) / (2 * h);
      const Matrix an = cl.left.col(i) * cl.right.row(j);
      EXPECT_LE((fd - an).norm(), 1e-7 * std::max(1.0, an.norm()));
    }
}

TEST(Vectorize, OrderingAndStatic)
{
  const Controller k(Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 3.0),
                     Matrix::Constant(1, 1, 4.0));
  const Vector v = vectorize(k);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v, (Vector(4) << 1, 2, 3, 4).finished());

  Controller s = Controller::zero({0, 1, 1});
  s.DK(0, 0) = 2.5;
  EXPECT_EQ(vectorize(s), Vector::Constant(1, 2.5));

  const Controller back = devectorize(v, {1, 1, 1});
  EXPECT_EQ(back, k);
  EXPECT_THROW(devectorize(Vector::Zero(3), {1, 1, 1}), DimensionError);
}

TEST(Vectorize, MaskArithmeticAndZeros)
{
  const ControllerDims d{2, 1, 2};
  StructureMask mask = StructureMask::full(d);
  mask.AK(0, 1) = mask.AK(1, 0) = false;
  EXPECT_EQ(parameter_count(d, &mask), 2 + 4 + 2 + 2);

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vector v = randn(parameter_count(d, &mask), 1, rng);
    const Controller k = devectorize(v, d, &mask);
    EXPECT_EQ(k.AK(0, 1), 0.0);
    EXPECT_EQ(k.AK(1, 0), 0.0);
    EXPECT_EQ(vectorize(k, &mask), v);
  }
}

TEST(Vectorize, RoundTripUnmasked)
{
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const ControllerDims d{uniform_int(0, 3, rng), uniform_int(1, 3, rng), uniform_int(1, 3, rng)};
    const Vector v = randn(parameter_count(d), 1, rng);
    EXPECT_EQ(vectorize(devectorize(v, d)), v);
  }
}

TEST(PadController, PreservesTransferFunction)
{
  const Controller k = reference_controller();
  const Controller big = pad_controller(k, 3);
  EXPECT_EQ(big.order(), 3);
  for (double w : {0.0, 0.5, 4.0}) {
    const Complex s(0.0, w);
    EXPECT_LT(std::abs(big.as_state_space().evaluate(s)(0, 0) - k.as_state_space().evaluate(s)(0, 0)), 1e-14);
  }
  EXPECT_THROW(pad_controller(big, 1), DimensionError);
}

TEST(AugmentWeights, TableWeightsOnFirstOrderPlant)
{
  const GeneralizedPlant p = augment_weights(tf_to_ss(SisoTransferFunction({1}, {1, 1})),
                                             SisoTransferFunction({1}, {1, 1}), SisoTransferFunction({0.2}, {1}));
  EXPECT_EQ(p.n(), 2);
  EXPECT_EQ(p.p1(), 2);
  ASSERT_EQ(p.D12.rows(), 2);
  EXPECT_EQ(p.D12(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(p.D12(1, 0), 0.2);
}

TEST(AugmentWeights, StaticExpansion)
{
  const double d = 1.7;
  const GeneralizedPlant p =
      augment_weights(StateSpace::static_gain(Matrix::Constant(1, 1, d)), SisoTransferFunction({1}, {1}), std::nullopt);
  EXPECT_EQ(p.n(), 0);
  EXPECT_EQ(p.D11(0, 0), 1.0);
  EXPECT_EQ(p.D12(0, 0), -d);
  EXPECT_EQ(p.D21(0, 0), 1.0);
  EXPECT_EQ(p.D22(0, 0), -d);
}

TEST(AugmentWeights, ClosedLoopIsWeightedSensitivityStack)
{
  // Stable plant and controller; the closed loop must equal [W1 S; W2 K S] with
  // S = (1 + G K)^{-1} for the negative-feedback loop u = K (w - G u).
  const SisoTransferFunction G({1, 3}, {1, 2, 5}), W1({1}, {1, 1}), W2({0.2}, {1});
  const GeneralizedPlant p = augment_weights(tf_to_ss(G), W1, W2);
  const Controller k(Matrix::Constant(1, 1, -2.0), Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.5),
                     Matrix::Constant(1, 1, 0.3));
  const StateSpace cl = assemble_closed_loop(p, k);
  Rng rng(4);
  std::uniform_real_distribution<double> wdist(-2.0, 2.0);
  for (int f = 0; f < 20; ++f) {
    const Complex s(0.0, std::pow(10.0, wdist(rng)));
    const Complex g = G.evaluate(s), kk = k.as_state_space().evaluate(s)(0, 0);
    const Complex S = 1.0 / (1.0 + g * kk);
    const CMatrix ours = cl.evaluate(s);
    EXPECT_LT(std::abs(ours(0, 0) - W1.evaluate(s) * S), 1e-10);
    EXPECT_LT(std::abs(ours(1, 0) - W2.evaluate(s) * kk * S), 1e-10);
  }
}

TEST(PlantSet, RejectsMismatchedControlChannels)
{
  Rng rng(1);
  std::vector<PlantChannel> ch{random_plant(2, 1, 1, 1, 1, rng), random_plant(2, 1, 2, 1, 1, rng)};
  EXPECT_THROW(PlantSet{ch}, DimensionError);
  EXPECT_THROW(PlantSet{std::vector<PlantChannel>{}}, DimensionError);
}
