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
#ifndef FIXORD_CLI_HPP
#define FIXORD_CLI_HPP

// Command-line front end: synth, verify and bench subcommands.

#include "fixord/benchmark.hpp"
#include "fixord/io.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <ostream>
#include <string>

namespace fixord::cli {

enum ExitCode : int
{
  kExitSuccess = 0,
  kExitNotAchieved = 1,
  kExitUsage = 2,
};

/// "inf", a single real, or a comma-separated list of reals and "inf".
inline std::vector<double> parse_bound_list(const std::string& text, std::size_t n)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item == "inf" || item == "+inf") {
      out.push_back(kInf);
      continue;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw std::invalid_argument("--upperbnd: cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.size() == 1 && n > 1) out.assign(n, out[0]);
  if (out.size() != n)
    throw std::invalid_argument("--upperbnd: expected 1 or " + std::to_string(n) + " values, got " + std::to_string(out.size()));
  return out;
}

/// Zero only when the recomputed report is feasible, finite, and, for pure stabilization, strictly stable.
inline int outcome_code(const io::RunReport& r, double tol)
{
  if (!r.all_finite() || !r.feasible(tol)) return kExitNotAchieved;
  const bool stabilization = !r.fun.empty() && std::all_of(r.fun.begin(), r.fun.end(), [](char c) { return c == 's'; });
  if (stabilization && !(r.objective < 0.0)) return kExitNotAchieved;
  return kExitSuccess;
}

inline void print_matrix(std::ostream& os, const char* name, const Matrix& m)
{
  os << "  " << name << " =";
  if (m.size() == 0) {
    os << " []\n";
    return;
  }
  os << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    os << "   ";
    for (Index j = 0; j < m.cols(); ++j) os << " " << std::setw(16) << std::setprecision(8) << m(i, j);
    os << "\n";
  }
}

inline void print_poly(std::ostream& os, const std::vector<double>& c)
{
  os << "[";
  for (std::size_t i = 0; i < c.size(); ++i) os << (i ? " " : "") << std::setprecision(8) << c[i];
  os << "]";
}

inline void print_report(std::ostream& os, const io::RunReport& r)
{
  const Controller& k = r.controller;
  os << "order " << k.order() << " controller (" << r.status << ")\n";
  print_matrix(os, "AK", k.AK);
  print_matrix(os, "BK", k.BK);
  print_matrix(os, "CK", k.CK);
  print_matrix(os, "DK", k.DK);
  if (k.m2() == 1 && k.p2() == 1) {
    const SisoTransferFunction tf = ss_to_tf(k.as_state_space());
    os << "  tf: num ";
    print_poly(os, tf.num());
    os << " den ";
    print_poly(os, tf.den());
    os << "\n";
  }
  os << "objective " << std::setprecision(10) << r.objective << "\n";
  for (std::size_t j = 0; j < r.channels.size(); ++j) {
    const auto& c = r.channels[j];
    os << "plant " << j + 1 << " [" << (j < r.fun.size() ? r.fun[j] : r.fun[0]) << "]";
    if (c.ill_posed) {
      os << " ill-posed\n";
      continue;
    }
    os << " value " << std::setprecision(10) << c.value;
    if (j < r.upperbnd.size() && r.upperbnd[j] < kInf) os << " bound " << r.upperbnd[j] << " violation " << c.violation;
    os << "\n    poles:";
    for (Index i = 0; i < c.poles.size(); ++i) {
      const auto p = c.poles(i);
      os << " " << std::setprecision(6) << p.real();
      if (p.imag() != 0.0) os << (p.imag() > 0 ? "+" : "-") << std::abs(p.imag()) << "i";
    }
    os << "\n";
  }
  if (r.wall_time) os << "wall time " << std::setprecision(4) << *r.wall_time << " s\n";
}

struct SynthArgs
{
  std::string problem;
  std::optional<int> order;
  std::optional<std::string> fun;
  std::optional<std::string> upperbnd;
  std::optional<std::string> init;
  std::optional<int> fast;
  std::optional<double> cpumax;
  std::optional<int> prtlevel;
  std::optional<double> weight_norm_k;
  std::optional<double> augment_hinf;
  std::optional<std::string> structure;
  std::optional<int> restarts;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> report;
};

inline void apply_objective_overrides(io::ProblemFile& p, const std::optional<std::string>& fun,
                                      const std::optional<std::string>& upperbnd)
{
  if (fun) p.fun = *fun;
  if (upperbnd) p.upperbnd = parse_bound_list(*upperbnd, p.plants.size());
  (void)p.spec();
}

inline int run_synth(const SynthArgs& a, std::ostream& out)
{
  io::ProblemFile p = io::parse_problem(io::read_file(a.problem));
  apply_objective_overrides(p, a.fun, a.upperbnd);
  if (a.order) p.order = *a.order;

  SynthOptions o = p.synth_options();
  if (a.fast) o.fast = *a.fast != 0;
  if (a.cpumax) o.cpumax = *a.cpumax;
  if (a.prtlevel) o.prtlevel = *a.prtlevel;
  if (a.weight_norm_k) o.weight_norm_k = *a.weight_norm_k;
  if (a.augment_hinf) o.augment_hinf = *a.augment_hinf;
  if (a.restarts) o.restarts = *a.restarts;
  if (a.seed) o.seed = *a.seed;
  o.pad_init = true;
  o.log = o.prtlevel > 0 ? &out : nullptr;

  const PlantSet plants = p.plant_set();
  if (a.structure) o.structure = io::parse_mask(io::read_file(*a.structure), ControllerDims{o.order, plants.m2(), plants.p2()});
  std::optional<Controller> init;
  if (a.init) init = io::parse_controller(io::read_file(*a.init));

  const SynthResult r = synthesize(plants, p.spec(), o, init);

  io::RunReport rep = io::verify_controller(p, r.controller, o.augment_hinf);
  rep.status = to_string(r.status);
  rep.wall_time = r.wall_time;
  rep.seed = o.seed;
  rep.certificate = r.certificate;
  if (o.prtlevel > 0) print_report(out, rep);
  if (a.out && r.found()) io::write_file(*a.out, io::serialize_controller(r.controller));
  if (a.report) io::write_file(*a.report, io::serialize(io::report_to_json(rep)));
  if (!r.found()) return kExitNotAchieved;
  return outcome_code(rep, o.viol_tol);
}

struct VerifyArgs
{
  std::string problem;
  std::string controller;
  std::optional<std::string> fun;
  std::optional<std::string> upperbnd;
  std::optional<double> augment_hinf;
  std::optional<std::string> report;
};

inline int run_verify(const VerifyArgs& a, std::ostream& out)
{
  io::ProblemFile p = io::parse_problem(io::read_file(a.problem));
  apply_objective_overrides(p, a.fun, a.upperbnd);
  const Controller k = io::parse_controller(io::read_file(a.controller));
  const io::RunReport rep = io::verify_controller(p, k, a.augment_hinf.value_or(-1.0));
  print_report(out, rep);
  if (a.report) io::write_file(*a.report, io::serialize(io::report_to_json(rep)));
  return outcome_code(rep, SynthOptions{}.viol_tol);
}

struct BenchArgs
{
  std::string name;
  int order_max = 1;
  std::uint64_t seed = 0;
  int restarts = 10;
  int prtlevel = 0;
  std::optional<double> cpumax;
};

inline int run_bench(const BenchArgs& a, std::ostream& out)
{
  const Benchmark b = make_benchmark(a.name);
  SynthOptions o;
  o.restarts = a.restarts;
  o.seed = a.seed;
  o.prtlevel = a.prtlevel;
  o.log = a.prtlevel > 0 ? &out : nullptr;
  if (a.cpumax) o.cpumax = *a.cpumax;
  const auto rows = run_benchmark(b, a.order_max, o);
  print_benchmark_table(out, b.name, rows);
  return rows.back().result.found() ? kExitSuccess : kExitNotAchieved;
}

/// Entry point; never throws.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Fixed-order multiobjective controller synthesis", "fixord"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Synthesize a controller for a problem file");
  synth->add_option("problem", sa.problem, "Problem file")->required();
  synth->add_option("--order", sa.order, "Controller order (default 0)")->check(CLI::NonNegativeNumber);
  synth->add_option("--fun", sa.fun, "Measure letters over {h, r, s} (default h)");
  synth->add_option("--upperbnd", sa.upperbnd, "Comma-separated bounds or inf");
  synth->add_option("--init", sa.init, "Initial controller or report file");
  synth->add_option("--fast", sa.fast, "1 skips gradient sampling")->check(CLI::Range(0, 1));
  synth->add_option("--cpumax", sa.cpumax, "Wall-clock budget in seconds")->check(CLI::PositiveNumber);
  synth->add_option("--prtlevel", sa.prtlevel, "0 silent .. 3 line-search traces")->check(CLI::Range(0, 3));
  synth->add_option("--weight-norm-k", sa.weight_norm_k, "Weight on the controller H-infinity norm")->check(CLI::NonNegativeNumber);
  synth->add_option("--augment-hinf", sa.augment_hinf, "Regularization of h measures")->check(CLI::NonNegativeNumber);
  synth->add_option("--structure", sa.structure, "Sparsity mask file");
  synth->add_option("--restarts", sa.restarts, "Random starts")->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", sa.seed, "Random seed");
  synth->add_option("--out", sa.out, "Write the controller here");
  synth->add_option("--report", sa.report, "Write the JSON report here");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Recompute measures and poles for a controller");
  verify->add_option("problem", va.problem, "Problem file")->required();
  verify->add_option("controller", va.controller, "Controller or report file")->required();
  verify->add_option("--fun", va.fun, "Override the measure letters");
  verify->add_option("--upperbnd", va.upperbnd, "Override the bounds");
  verify->add_option("--augment-hinf", va.augment_hinf, "Regularization of h measures")->check(CLI::NonNegativeNumber);
  verify->add_option("--report", va.report, "Write the JSON report here");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Run an embedded benchmark over orders 0..order-max");
  bench->add_option("name", ba.name, "Benchmark name")->required()->check(CLI::IsMember(benchmark_names()));
  bench->add_option("--order-max", ba.order_max, "Highest order (default 1)")->check(CLI::NonNegativeNumber);
  bench->add_option("--seed", ba.seed, "Random seed (default 0)");
  bench->add_option("--restarts", ba.restarts, "Random starts per order (default 10)")->check(CLI::NonNegativeNumber);
  bench->add_option("--prtlevel", ba.prtlevel, "0 silent .. 3 line-search traces")->check(CLI::Range(0, 3));
  bench->add_option("--cpumax", ba.cpumax, "Wall-clock budget per order in seconds")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitSuccess : kExitUsage;
  }

  try {
    if (*synth) return run_synth(sa, out);
    if (*verify) return run_verify(va, out);
    return run_bench(ba, out);
  } catch (const io::ParseError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitUsage;
}

}  // namespace fixord::cli

#endif  // FIXORD_CLI_HPP
