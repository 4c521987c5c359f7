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
#include "fixord/benchmark.hpp"
#include "fixord/synthesis.hpp"
#include "synthesis_problems.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace fixord;
using namespace fixord::testing;

namespace {

SynthOptions quiet(Index order = 0, std::uint64_t seed = 1)
{
  SynthOptions o;
  o.order = order;
  o.prtlevel = 0;
  o.seed = seed;
  return o;
}

}  // namespace

TEST(ObjectiveSpec, FunBroadcastAndValidation)
{
  const ObjectiveSpec s = ObjectiveSpec::from_fun("h", 3);
  EXPECT_EQ(s.fun(), "hhh");
  EXPECT_EQ(s.betas, std::vector<double>(3, kInf));
  EXPECT_THROW(ObjectiveSpec::from_fun("hr", 3), std::invalid_argument);
  EXPECT_THROW(ObjectiveSpec::from_fun("q", 1), std::invalid_argument);
  EXPECT_THROW(ObjectiveSpec::from_fun("s", 1, {-kInf}), std::invalid_argument);
  EXPECT_FALSE(ObjectiveSpec::from_fun("s", 2).needs_stabilization());
  EXPECT_TRUE(ObjectiveSpec::from_fun("sr", 2).needs_stabilization());
}

TEST(SynthOptions, Validation)
{
  SynthOptions o;
  EXPECT_NO_THROW(o.validate());
  o.rho_factor = 1.0;
  EXPECT_THROW(o.validate(), std::invalid_argument);
  o = SynthOptions{};
  o.rho0 = 0.0;
  EXPECT_THROW(o.validate(), std::invalid_argument);
}

TEST(BuildObjective, SingleChannelIsSpectralAbscissa)
{
  Rng rng(1);
  const GeneralizedPlant p = random_plant(3, 1, 1, 1, 1, rng);
  const PlantSet ps({p});
  const Oracle f = build_objective(ps, ObjectiveSpec::from_fun("s", 1), quiet(1), 100.0);
  for (int t = 0; t < 5; ++t) {
    const Controller k = random_controller(1, 1, 1, rng);
    const MeasureValue m = channel_value(p, k, MeasureKind::S);
    const OracleValue v = f(vectorize(k));
    EXPECT_EQ(v.value, m.value);
    EXPECT_EQ(v.gradient, m.gradient);
  }
}

TEST(BuildObjective, MaxSemanticsPicksLargestChannel)
{
  // g = (3, 5) at k = 0; channel 2 has input gain 2 so its gradient is 2.
  const PlantSet ps({scalar_plant(3.0), scalar_plant(5.0, 2.0)});
  const OracleValue v = build_objective(ps, ObjectiveSpec::from_fun("s", 2), quiet(), 100.0)(Vector::Zero(1));
  EXPECT_DOUBLE_EQ(v.value, 5.0);
  EXPECT_DOUBLE_EQ(v.gradient(0), 2.0);
}

TEST(BuildObjective, TiesUseLowestIndex)
{
  const PlantSet ps({scalar_plant(5.0, 3.0), scalar_plant(5.0, 2.0)});
  const OracleValue v = build_objective(ps, ObjectiveSpec::from_fun("s", 2), quiet(), 100.0)(Vector::Zero(1));
  EXPECT_DOUBLE_EQ(v.gradient(0), 3.0);
}

TEST(BuildObjective, PurePenaltyWhenAllBoundsFinite)
{
  const PlantSet ps({scalar_plant(3.0)});
  const OracleValue v = build_objective(ps, ObjectiveSpec::from_fun("s", 1, {2.0}), quiet(), 10.0)(Vector::Zero(1));
  EXPECT_DOUBLE_EQ(v.value, 10.0);
  EXPECT_DOUBLE_EQ(v.gradient(0), 10.0);
}

TEST(BuildObjective, IllPosedAndUnstableAreInfinite)
{
  const GeneralizedPlant p = siso_plant(tf_to_ss(SisoTransferFunction({1, 2}, {1, -6})));
  const Oracle f = build_objective(PlantSet({p}), ObjectiveSpec::from_fun("s", 1), quiet(), 100.0);
  EXPECT_EQ(f(Vector::Ones(1)).value, kInf);
  const Oracle h = build_objective(PlantSet({scalar_plant(1.0)}), ObjectiveSpec::from_fun("h", 1), quiet(), 100.0);
  EXPECT_EQ(h(Vector::Zero(1)).value, kInf);
  EXPECT_LT(h(-Vector::Constant(1, 3.0)).value, kInf);
}

TEST(BuildObjective, RegularizerAndAugmentation)
{
  const PlantSet ps({scalar_plant(-1.0)});
  SynthOptions o = quiet();
  o.weight_norm_k = 0.5;
  o.augment_hinf = 0.1;
  const Vector x = Vector::Constant(1, -1.0);
  // Closed loop A = -2: hinf 1/2, reciprocal radius 1/2, |K| = 1.
  EXPECT_NEAR(build_objective(ps, ObjectiveSpec::from_fun("h", 1), o, 100.0)(x).value, 0.5 + 0.05 + 0.5, 1e-12);
}

TEST(BuildObjective, GradientMatchesFiniteDifferences)
{
  Rng rng(3);
  const PlantSet ps({random_plant(2, 1, 1, 1, 1, rng), random_plant(3, 1, 1, 1, 1, rng)});
  SynthOptions o = quiet(1);
  o.weight_norm_k = 0.3;
  const Oracle f = build_objective(ps, ObjectiveSpec::from_fun("hs", 2, {kInf, -0.5}), o, 10.0);
  int checked = 0;
  for (int t = 0; t < 30 && checked < 5; ++t) {
    const Vector x = vectorize(random_controller(1, 1, 1, rng, 0.2));
    const OracleValue v = f(x);
    if (!std::isfinite(v.value)) continue;
    const Vector fd6 = fd_gradient([&](const Vector& y) { return f(y).value; }, x, 1e-6);
    const Vector fd5 = fd_gradient([&](const Vector& y) { return f(y).value; }, x, 1e-5);
    if ((fd6 - fd5).norm() > 1e-6 * std::max(1.0, fd5.norm())) continue;
    EXPECT_LE(rel_err(v.gradient, fd6), 1e-5);
    ++checked;
  }
  EXPECT_GE(checked, 3);
}

TEST(RandomController, MaskSeedAndStatistics)
{
  const ControllerDims d{1, 1, 1};
  StructureMask none{Mask::Constant(1, 1, false), Mask::Constant(1, 1, false), Mask::Constant(1, 1, false),
                     Mask::Constant(1, 1, false)};
  Rng rng(1);
  EXPECT_EQ(random_controller(d, &none, 1.0, rng), Controller::zero(d));

  Rng a(42), b(42);
  EXPECT_EQ(random_controller(d, nullptr, 1.0, a), random_controller(d, nullptr, 1.0, b));

  const double scale = 2.0;
  Rng r(7);
  Eigen::Matrix<double, 4, 1> sum = Eigen::Matrix<double, 4, 1>::Zero(), sq = sum;
  for (int i = 0; i < 1000; ++i) {
    const Vector v = vectorize(random_controller(d, nullptr, scale, r));
    sum += v;
    sq += v.cwiseProduct(v);
  }
  const Eigen::Matrix<double, 4, 1> mean = sum / 1000.0;
  const Eigen::Matrix<double, 4, 1> sd = (sq / 1000.0 - mean.cwiseProduct(mean)).cwiseSqrt();
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.1 * scale + 0.1);
  EXPECT_LT((sd.array() - scale).abs().maxCoeff(), 0.1 * scale);
}

TEST(Stabilization, AlreadyStableReturnsStart)
{
  const PlantSet ps({scalar_plant(-1.0)});
  const Vector x0 = Vector::Constant(1, 0.25);
  const StabilizationResult r = stabilization_phase(ps, ObjectiveSpec::from_fun("h", 1), quiet(), x0, OptOptions{});
  EXPECT_TRUE(r.stabilized);
  EXPECT_EQ(r.x, x0);
  EXPECT_EQ(r.iterations, 0);
}

TEST(Stabilization, UnstableScalarPlant)
{
  const PlantSet ps({scalar_plant(1.0)});
  const StabilizationResult r =
      stabilization_phase(ps, ObjectiveSpec::from_fun("h", 1), quiet(), Vector::Constant(1, 0.5), OptOptions{});
  ASSERT_TRUE(r.stabilized);
  EXPECT_LT(1.0 + r.x(0), 0.0);
}

TEST(Stabilization, SkippedForSpectralAbscissaOnly)
{
  const PlantSet ps({scalar_plant(1.0)});
  const StabilizationResult r =
      stabilization_phase(ps, ObjectiveSpec::from_fun("s", 1), quiet(), Vector::Zero(1), OptOptions{});
  EXPECT_TRUE(r.stabilized);
  EXPECT_EQ(r.iterations, 0);
}

TEST(Optimization, NoEscalationWithoutConstraints)
{
  const PlantSet ps({scalar_plant(-1.0)});
  const OptimizationPhaseResult r =
      optimization_phase(ps, ObjectiveSpec::from_fun("h", 1), quiet(), Vector::Constant(1, -1.0), OptOptions{});
  EXPECT_EQ(r.escalations, 0);
  EXPECT_EQ(r.rho, SynthOptions{}.rho0);
  EXPECT_LT(r.evaluation.objective, 0.5);
}

TEST(Optimization, LooseConstraintInactive)
{
  const ConstrainedScalarProblem prob;
  const OptimizationPhaseResult r = optimization_phase(prob.plants, ConstrainedScalarProblem::spec(1e6), quiet(),
                                                       Vector::Constant(1, -2.0), OptOptions{});
  EXPECT_EQ(r.escalations, 0);
  EXPECT_EQ(r.evaluation.violations[1], 0.0);
}

TEST(Optimization, HinfWithRadiusConstraint)
{
  const ConstrainedScalarProblem prob;
  for (double beta : {0.5, 1.0, 100.0}) {
    const OptimizationPhaseResult r =
        optimization_phase(prob.plants, ConstrainedScalarProblem::spec(beta), quiet(), Vector::Constant(1, -1.0),
                           OptOptions{});
    const Controller k = devectorize(r.x, {0, 1, 1});
    const double g1 = channel_value(prob.plants.channels()[0], k, MeasureKind::H).value;
    const double g2 = channel_value(prob.plants.channels()[1], k, MeasureKind::R).value;
    EXPECT_NEAR(r.evaluation.objective, g1, 1e-12);
    EXPECT_DOUBLE_EQ(r.evaluation.violations[1], std::max(0.0, g2 - beta));
    EXPECT_LE(r.evaluation.violations[1], 1e-6) << "beta " << beta;
    if (beta < 100.0) EXPECT_NEAR(r.evaluation.objective, ConstrainedScalarProblem::optimal_objective(beta), 1e-5);
  }
}

TEST(Synthesize, StableSinglePlantWarmStart)
{
  const PlantSet ps({scalar_plant(-0.5)});
  const SynthResult r = synthesize(ps, ObjectiveSpec::from_fun("s", 1), quiet(), Controller::zero({0, 1, 1}));
  EXPECT_EQ(r.status, SynthStatus::Success);
  EXPECT_LE(r.objective, -0.5);
}

TEST(Synthesize, ReportedNumbersAreRecomputable)
{
  const ConstrainedScalarProblem prob;
  const ObjectiveSpec spec = ConstrainedScalarProblem::spec(1.0);
  const SynthResult r = synthesize(prob.plants, spec, quiet());
  const Evaluation e = evaluate(prob.plants, spec, r.controller);
  ASSERT_EQ(r.values.size(), 2u);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(r.values[j], e.values[j], 1e-6 * std::abs(e.values[j]));
    EXPECT_NEAR(r.violations[j], e.violations[j], 1e-12);
  }
  EXPECT_NEAR(r.objective, e.values[0], 1e-6 * std::abs(e.values[0]));
}

TEST(Synthesize, StructureIsRespected)
{
  Rng rng(5);
  const PlantSet ps({random_plant(3, 1, 2, 1, 2, rng)});
  SynthOptions o = quiet(2);
  StructureMask mask = StructureMask::full({2, 2, 2});
  mask.AK(0, 1) = mask.AK(1, 0) = false;
  mask.DK(1, 0) = false;
  o.structure = mask;
  o.restarts = 2;
  const SynthResult r = synthesize(ps, ObjectiveSpec::from_fun("s", 1), o);
  EXPECT_EQ(r.controller.AK(0, 1), 0.0);
  EXPECT_EQ(r.controller.AK(1, 0), 0.0);
  EXPECT_EQ(r.controller.DK(1, 0), 0.0);
}

TEST(Synthesize, InitMismatchedOrder)
{
  const PlantSet ps({scalar_plant(-1.0)});
  EXPECT_THROW(synthesize(ps, ObjectiveSpec::from_fun("s", 1), quiet(1), Controller::zero({0, 1, 1})), DimensionError);
  SynthOptions o = quiet(1);
  o.pad_init = true;
  EXPECT_NO_THROW(synthesize(ps, ObjectiveSpec::from_fun("s", 1), o, Controller::zero({0, 1, 1})));
}

TEST(Synthesize, ThreadCountDoesNotChangeResult)
{
  const Benchmark b = make_benchmark("jia-ackermann-s");
  SynthOptions o = quiet(1, 3);
  o.restarts = 4;
  o.threads = 1;
  const SynthResult a = synthesize(b.plants, ObjectiveSpec::from_fun("s", 3), o);
  o.threads = 4;
  const SynthResult c = synthesize(b.plants, ObjectiveSpec::from_fun("s", 3), o);
  EXPECT_EQ(a.objective, c.objective);
  EXPECT_EQ(a.controller, c.controller);
}

TEST(Synthesize, CpuBudget)
{
  const Benchmark b = make_benchmark("jia-ackermann-h");
  SynthOptions o = quiet(3, 1);
  o.restarts = 64;
  o.cpumax = 0.5;
  const auto t0 = Clock::now();
  synthesize(b.plants, ObjectiveSpec::from_fun("h", 3), o);
  EXPECT_LT(std::chrono::duration<double>(Clock::now() - t0).count(), 0.5 + 0.25);
}

TEST(Synthesize, NoStabilizerReported)
{
  // x' = x with no control authority.
  const PlantSet ps({scalar_plant(1.0, 0.0)});
  const SynthResult r = synthesize(ps, ObjectiveSpec::from_fun("h", 1), quiet());
  EXPECT_EQ(r.status, SynthStatus::NoStabilizingController);
  EXPECT_FALSE(r.found());
}

TEST(Synthesize, JiaAckermannSpectralAbscissa)
{
  const Benchmark b = make_benchmark("jia-ackermann-s");
  SynthOptions o = quiet(1, 7);
  o.restarts = 10;
  const SynthResult r = synthesize(b.plants, ObjectiveSpec::from_fun("s", 3), o);
  EXPECT_LE(r.objective, -0.25);
  const SynthResult again = synthesize(b.plants, ObjectiveSpec::from_fun("s", 3), o, r.controller);
  EXPECT_LE(again.objective, r.objective);
}

TEST(Synthesize, NegativeObjectiveMeansStable)
{
  Rng rng(9);
  for (int t = 0; t < 5; ++t) {
    const PlantSet ps = random_plant_set(rng, 2, 1, 1);
    SynthOptions o = quiet(1, static_cast<std::uint64_t>(t));
    o.restarts = 2;
    const SynthResult r = synthesize(ps, ObjectiveSpec::from_fun("s", 2), o);
    if (!(r.objective < 0.0)) continue;
    for (const auto& ch : ps.channels())
      EXPECT_LT(closed_loop_poles_direct(std::get<GeneralizedPlant>(ch), r.controller).real().maxCoeff(), 0.0);
  }
}
