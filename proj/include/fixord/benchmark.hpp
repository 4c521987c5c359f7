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
#ifndef FIXORD_BENCHMARK_HPP
#define FIXORD_BENCHMARK_HPP

// Embedded simultaneous-stabilization benchmarks.

#include "fixord/lti.hpp"
#include "fixord/synthesis.hpp"

#include <iomanip>

#include <ostream>
#include <string>
#include <vector>

namespace fixord {

struct Benchmark
{
  std::string name;
  PlantSet plants;
  std::string fun;
};

/// The three first-order SISO plants of Jia and Ackermann.
inline std::vector<SisoTransferFunction> jia_ackermann_plants()
{
  return {SisoTransferFunction({2, -9}, {1, -8.8}), SisoTransferFunction({1, 2}, {1, -6}),
          SisoTransferFunction({2.5, 6}, {1, -8})};
}

inline std::vector<std::string> benchmark_names() { return {"jia-ackermann-s", "jia-ackermann-h"}; }

inline Benchmark make_benchmark(const std::string& name)
{
  std::vector<PlantChannel> channels;
  if (name == "jia-ackermann-s") {
    for (const auto& tf : jia_ackermann_plants()) channels.emplace_back(siso_plant(tf_to_ss(tf)));
    return {name, PlantSet(std::move(channels)), "s"};
  }
  if (name == "jia-ackermann-h") {
    for (const auto& tf : jia_ackermann_plants())
      channels.emplace_back(augment_weights(tf_to_ss(tf), SisoTransferFunction({1}, {1, 1}), SisoTransferFunction({0.2}, {1})));
    return {name, PlantSet(std::move(channels)), "h"};
  }
  throw std::invalid_argument("unknown benchmark '" + name + "'");
}

struct BenchmarkRow
{
  Index order = 0;
  SynthResult result;
};

/**
 * Orders 0..order_max; order k starts from the best order k-1 controller
 * (padded) plus opts.restarts random starts. Each order gets its own seed.
 */
inline std::vector<BenchmarkRow> run_benchmark(const Benchmark& b, Index order_max, SynthOptions opts)
{
  const ObjectiveSpec spec = ObjectiveSpec::from_fun(b.fun, b.plants.size());
  std::vector<BenchmarkRow> rows;
  std::optional<Controller> prev;
  const std::uint64_t base_seed = opts.seed;
  opts.pad_init = true;
  for (Index k = 0; k <= order_max; ++k) {
    opts.order = k;
    opts.seed = base_seed + static_cast<std::uint64_t>(k);
    SynthResult r = synthesize(b.plants, spec, opts, prev);
    if (r.found()) prev = r.controller;
    rows.push_back({k, std::move(r)});
  }
  return rows;
}

inline void print_benchmark_table(std::ostream& os, const std::string& name, const std::vector<BenchmarkRow>& rows)
{
  os << name << "\n";
  os << "order  objective        status\n";
  for (const auto& r : rows) {
    os << std::setw(5) << r.order << "  ";
    if (r.result.found())
      os << std::setw(15) << std::setprecision(8) << r.result.objective;
    else
      os << std::setw(15) << "-";
    os << "  " << to_string(r.result.status) << "\n";
  }
}

}  // namespace fixord

#endif  // FIXORD_BENCHMARK_HPP
