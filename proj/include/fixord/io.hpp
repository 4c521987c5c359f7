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
#ifndef FIXORD_IO_HPP
#define FIXORD_IO_HPP

/**
 * @file
 * @brief JSON problem, controller, mask and report files.
 *
 * Matrices are arrays of rows. Non-finite reals are written as the strings
 * "inf", "-inf" and "nan". A problem file looks like
 *
 * @code
 * {
 *   "plants": [
 *     {"tf": {"num": [2, -9], "den": [1, -8.8]}},
 *     {"tf": {"num": [1], "den": [1, 1]}, "augw": {"w1": {"num": [1], "den": [1, 1]}, "w2": {"num": [0.2], "den": [1]}}},
 *     {"ss": {"A": [[-1]], "B1": [[1]], "B2": [[1]], "C1": [[1]], "C2": [[1]],
 *             "D11": [[0]], "D12": [[0]], "D21": [[0]], "D22": [[0]]}},
 *     {"ss": {"A": [[-1]], "B": [[1]], "C": [[1]], "D": [[0]]}},
 *     "K"
 *   ],
 *   "fun": "s",
 *   "upperbnd": ["inf", "inf", 2.5, "inf", "inf"],
 *   "order": 1,
 *   "options": {"restarts": 10, "seed": 7}
 * }
 * @endcode
 *
 * An "ss" entry with A, B, C, D is a plant with only the controller channel.
 * In the full form the performance blocks B1, C1, D11, D12, D21 may be omitted.
 */

#include "fixord/lti.hpp"
#include "fixord/measures.hpp"
#include "fixord/synthesis.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace fixord::io {

using json = nlohmann::json;

class ParseError : public std::runtime_error
{
public:
  ParseError(const std::string& where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what), where_(where)
  {
  }
  [[nodiscard]] const std::string& where() const { return where_; }

private:
  std::string where_;
};

// ---------------------------------------------------------------------------
// Scalars and matrices
// ---------------------------------------------------------------------------

inline json real_to_json(double v)
{
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double real_from_json(const json& j, const std::string& where)
{
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::nan("");
  }
  throw ParseError(where, "expected a number or \"inf\"");
}

inline json matrix_to_json(const Matrix& m)
{
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(real_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Rows of equal length; [] is an empty matrix whose shape is fixed by the caller.
inline Matrix matrix_from_json(const json& j, const std::string& where)
{
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array()) throw ParseError(where, "expected a matrix (array of rows)");
  if (j.empty()) return Matrix(0, 0);
  const Index rows = static_cast<Index>(j.size());
  if (!j[0].is_array()) throw ParseError(where, "expected a matrix (array of rows)");
  const Index cols = static_cast<Index>(j[0].size());
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const std::string at = where + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || static_cast<Index>(j[r].size()) != cols)
      throw ParseError(at, "row has " + std::to_string(j[r].is_array() ? j[r].size() : 0) + " entries, expected " +
                               std::to_string(cols));
    for (Index c = 0; c < cols; ++c) m(r, c) = real_from_json(j[r][c], at + "[" + std::to_string(c) + "]");
  }
  return m;
}

/// Adopts an empty parsed matrix to the expected shape, or checks the shape.
inline Matrix shaped(Matrix m, Index rows, Index cols, const std::string& where)
{
  if (m.size() == 0 && rows * cols == 0) return Matrix(rows, cols);
  if (m.rows() != rows || m.cols() != cols)
    throw ParseError(where, "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  return m;
}

inline std::vector<double> coeffs_from_json(const json& j, const std::string& where)
{
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array() || j.empty()) throw ParseError(where, "expected a nonempty coefficient array");
  std::vector<double> c;
  for (std::size_t i = 0; i < j.size(); ++i) c.push_back(real_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  return c;
}

inline json tf_to_json(const SisoTransferFunction& tf) { return {{"num", tf.num()}, {"den", tf.den()}}; }

inline SisoTransferFunction tf_from_json(const json& j, const std::string& where)
{
  if (!j.is_object() || !j.contains("num") || !j.contains("den"))
    throw ParseError(where, "transfer function needs \"num\" and \"den\"");
  try {
    return SisoTransferFunction(coeffs_from_json(j["num"], where + ".num"), coeffs_from_json(j["den"], where + ".den"));
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(where, e.what());
  }
}

// ---------------------------------------------------------------------------
// Plant entries
// ---------------------------------------------------------------------------

struct TfEntry
{
  SisoTransferFunction g;
  std::optional<SisoTransferFunction> w1, w2;
  bool augmented = false;
  friend bool operator==(const TfEntry&, const TfEntry&) = default;
};

struct SsEntry
{
  StateSpace g;
  friend bool operator==(const SsEntry& a, const SsEntry& b)
  {
    return a.g.A == b.g.A && a.g.B == b.g.B && a.g.C == b.g.C && a.g.D == b.g.D;
  }
};

struct PlantEntry
{
  std::variant<GeneralizedPlant, SsEntry, TfEntry, ControllerItself> source;

  [[nodiscard]] PlantChannel channel() const
  {
    if (const auto* p = std::get_if<GeneralizedPlant>(&source)) return *p;
    if (const auto* s = std::get_if<SsEntry>(&source)) return siso_or_mimo_plant(s->g);
    if (const auto* t = std::get_if<TfEntry>(&source)) {
      if (t->augmented) return augment_weights(tf_to_ss(t->g), t->w1, t->w2);
      return siso_plant(tf_to_ss(t->g));
    }
    return ControllerItself{};
  }

  /// Plant whose only channel is u -> y = G u.
  static GeneralizedPlant siso_or_mimo_plant(const StateSpace& g)
  {
    const Index n = g.states();
    return GeneralizedPlant(g.A, Matrix(n, 0), g.B, Matrix(0, n), g.C, Matrix(0, 0), Matrix(0, g.inputs()),
                            Matrix(g.outputs(), 0), g.D);
  }

  friend bool operator==(const PlantEntry& a, const PlantEntry& b)
  {
    if (a.source.index() != b.source.index()) return false;
    if (const auto* p = std::get_if<GeneralizedPlant>(&a.source)) {
      const auto& q = std::get<GeneralizedPlant>(b.source);
      return p->A == q.A && p->B1 == q.B1 && p->B2 == q.B2 && p->C1 == q.C1 && p->C2 == q.C2 && p->D11 == q.D11 &&
             p->D12 == q.D12 && p->D21 == q.D21 && p->D22 == q.D22;
    }
    if (const auto* s = std::get_if<SsEntry>(&a.source)) return *s == std::get<SsEntry>(b.source);
    if (const auto* t = std::get_if<TfEntry>(&a.source)) return *t == std::get<TfEntry>(b.source);
    return true;
  }
};

inline json plant_entry_to_json(const PlantEntry& e)
{
  if (std::holds_alternative<ControllerItself>(e.source)) return "K";
  if (const auto* t = std::get_if<TfEntry>(&e.source)) {
    json j{{"tf", tf_to_json(t->g)}};
    if (t->augmented) {
      json w = json::object();
      if (t->w1) w["w1"] = tf_to_json(*t->w1);
      if (t->w2) w["w2"] = tf_to_json(*t->w2);
      j["augw"] = w;
    }
    return j;
  }
  if (const auto* s = std::get_if<SsEntry>(&e.source))
    return {{"ss",
             {{"A", matrix_to_json(s->g.A)},
              {"B", matrix_to_json(s->g.B)},
              {"C", matrix_to_json(s->g.C)},
              {"D", matrix_to_json(s->g.D)}}}};
  const auto& p = std::get<GeneralizedPlant>(e.source);
  json ss{{"A", matrix_to_json(p.A)},   {"B1", matrix_to_json(p.B1)},   {"B2", matrix_to_json(p.B2)},
          {"C1", matrix_to_json(p.C1)}, {"C2", matrix_to_json(p.C2)},   {"D11", matrix_to_json(p.D11)},
          {"D12", matrix_to_json(p.D12)}, {"D21", matrix_to_json(p.D21)}, {"D22", matrix_to_json(p.D22)}};
  return {{"ss", ss}};
}

inline PlantEntry plant_entry_from_json(const json& j, const std::string& where)
{
  if (j.is_string()) {
    if (j.get<std::string>() == "K") return {ControllerItself{}};
    throw ParseError(where, "unknown plant marker '" + j.get<std::string>() + "' (only \"K\" is allowed)");
  }
  if (!j.is_object()) throw ParseError(where, "expected a plant object or \"K\"");
  if (j.contains("tf")) {
    TfEntry t{tf_from_json(j["tf"], where + ".tf"), std::nullopt, std::nullopt, false};
    if (j.contains("augw")) {
      const json& w = j["augw"];
      if (!w.is_object()) throw ParseError(where + ".augw", "expected an object with \"w1\" and/or \"w2\"");
      if (w.contains("w1")) t.w1 = tf_from_json(w["w1"], where + ".augw.w1");
      if (w.contains("w2")) t.w2 = tf_from_json(w["w2"], where + ".augw.w2");
      if (!t.w1 && !t.w2) throw ParseError(where + ".augw", "at least one of \"w1\", \"w2\" is required");
      t.augmented = true;
    }
    return {t};
  }
  if (!j.contains("ss")) throw ParseError(where, "plant needs \"tf\", \"ss\" or the marker \"K\"");
  const json& s = j["ss"];
  const std::string at = where + ".ss";
  if (!s.is_object() || !s.contains("A")) throw ParseError(at, "state-space entry needs \"A\"");
  auto get = [&](const char* key) {
    return s.contains(key) ? matrix_from_json(s[key], at + "." + key) : Matrix(0, 0);
  };
  const Matrix A = get("A");
  const Index n = A.rows();
  if (A.cols() != n) throw ParseError(at + ".A", "A must be square");
  auto need = [&](const char* key) {
    if (!s.contains(key)) throw ParseError(at, std::string("missing \"") + key + "\"");
  };
  if (s.contains("B") || s.contains("C") || s.contains("D")) {
    need("B");
    need("C");
    need("D");
    const Matrix D = get("D");
    const Index p = D.rows(), m = D.cols();
    if (p == 0 || m == 0) throw ParseError(at + ".D", "D must be nonempty");
    SsEntry e{StateSpace(shaped(A, n, n, at + ".A"), shaped(get("B"), n, m, at + ".B"), shaped(get("C"), p, n, at + ".C"), D)};
    return {e};
  }
  need("B2");
  need("C2");
  need("D22");
  const Matrix D22 = get("D22");
  const Index p2 = D22.rows(), m2 = D22.cols();
  if (p2 == 0 || m2 == 0) throw ParseError(at + ".D22", "D22 must be nonempty");
  const Matrix D11 = get("D11"), D12 = get("D12"), D21 = get("D21");
  const Matrix B1r = get("B1"), C1r = get("C1");
  // D21 has p2 >= 1 rows and D12 has m2 >= 1 columns, so they always carry m1 and p1.
  const Index m1 = D21.rows() > 0 ? D21.cols() : B1r.rows() > 0 ? B1r.cols() : D11.cols();
  const Index p1 = D12.cols() > 0 ? D12.rows() : C1r.cols() > 0 ? C1r.rows() : D11.rows();
  try {
    GeneralizedPlant p(shaped(A, n, n, at + ".A"), shaped(B1r, n, m1, at + ".B1"), shaped(get("B2"), n, m2, at + ".B2"),
                       shaped(C1r, p1, n, at + ".C1"), shaped(get("C2"), p2, n, at + ".C2"),
                       shaped(D11, p1, m1, at + ".D11"), shaped(D12, p1, m2, at + ".D12"),
                       shaped(D21, p2, m1, at + ".D21"), D22);
    return {p};
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(at, e.what());
  }
}

// ---------------------------------------------------------------------------
// Problem file
// ---------------------------------------------------------------------------

/// Options a problem file may set; absent fields keep the defaults.
struct FileOptions
{
  std::optional<double> cpumax;
  std::optional<bool> fast;
  std::optional<int> prtlevel;
  std::optional<double> weight_norm_k;
  std::optional<double> augment_hinf;
  std::optional<int> restarts;
  std::optional<std::uint64_t> seed;
  friend bool operator==(const FileOptions&, const FileOptions&) = default;

  void apply(SynthOptions& o) const
  {
    if (cpumax) o.cpumax = *cpumax;
    if (fast) o.fast = *fast;
    if (prtlevel) o.prtlevel = *prtlevel;
    if (weight_norm_k) o.weight_norm_k = *weight_norm_k;
    if (augment_hinf) o.augment_hinf = *augment_hinf;
    if (restarts) o.restarts = *restarts;
    if (seed) o.seed = *seed;
  }
};

struct ProblemFile
{
  std::vector<PlantEntry> plants;
  std::string fun = "h";
  std::vector<double> upperbnd;
  Index order = 0;
  FileOptions options;

  friend bool operator==(const ProblemFile&, const ProblemFile&) = default;

  [[nodiscard]] PlantSet plant_set() const
  {
    std::vector<PlantChannel> ch;
    for (const auto& e : plants) ch.push_back(e.channel());
    return PlantSet(std::move(ch));
  }

  [[nodiscard]] ObjectiveSpec spec() const { return ObjectiveSpec::from_fun(fun, plants.size(), upperbnd); }

  [[nodiscard]] SynthOptions synth_options() const
  {
    SynthOptions o;
    o.order = order;
    options.apply(o);
    return o;
  }
};

inline json problem_to_json(const ProblemFile& p)
{
  json plants = json::array();
  for (const auto& e : p.plants) plants.push_back(plant_entry_to_json(e));
  json ub = json::array();
  for (double b : p.upperbnd) ub.push_back(real_to_json(b));
  json j{{"plants", plants}, {"fun", p.fun}, {"upperbnd", ub}, {"order", p.order}};
  json o = json::object();
  const FileOptions& f = p.options;
  if (f.cpumax) o["cpumax"] = real_to_json(*f.cpumax);
  if (f.fast) o["fast"] = *f.fast ? 1 : 0;
  if (f.prtlevel) o["prtlevel"] = *f.prtlevel;
  if (f.weight_norm_k) o["weight_norm_k"] = *f.weight_norm_k;
  if (f.augment_hinf) o["augment_hinf"] = *f.augment_hinf;
  if (f.restarts) o["restarts"] = *f.restarts;
  if (f.seed) o["seed"] = *f.seed;
  if (!o.empty()) j["options"] = o;
  return j;
}

/// Canonical text: sorted keys, two-space indent, shortest round-trip reals.
inline std::string serialize(const json& j) { return j.dump(2) + "\n"; }

inline std::string serialize_problem(const ProblemFile& p) { return serialize(problem_to_json(p)); }

/// Accepts `//` and `/* */` comments.
inline json parse_json(const std::string& text)
{
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), std::string("malformed JSON: ") + e.what());
  }
}

inline int int_from_json(const json& j, const std::string& where)
{
  if (!j.is_number_integer()) throw ParseError(where, "expected an integer");
  return j.get<int>();
}

inline ProblemFile problem_from_json(const json& j)
{
  if (!j.is_object()) throw ParseError("", "problem file must be a JSON object");
  static const std::vector<std::string> known{"plants", "fun", "upperbnd", "order", "options"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ParseError(it.key(), "unknown field");
  if (!j.contains("plants") || !j["plants"].is_array() || j["plants"].empty())
    throw ParseError("plants", "expected a nonempty array of plants");

  ProblemFile p;
  for (std::size_t i = 0; i < j["plants"].size(); ++i)
    p.plants.push_back(plant_entry_from_json(j["plants"][i], "plants[" + std::to_string(i) + "]"));
  const std::size_t n = p.plants.size();

  if (j.contains("fun")) {
    if (!j["fun"].is_string()) throw ParseError("fun", "expected a string over {h, r, s}");
    p.fun = j["fun"].get<std::string>();
  }
  if (p.fun.size() != 1 && p.fun.size() != n)
    throw ParseError("fun", "length must be 1 or " + std::to_string(n) + ", got '" + p.fun + "'");
  for (char c : p.fun)
    if (c != 'h' && c != 'r' && c != 's') throw ParseError("fun", std::string("unknown measure letter '") + c + "'");

  if (j.contains("upperbnd")) {
    const json& u = j["upperbnd"];
    if (u.is_array()) {
      for (std::size_t i = 0; i < u.size(); ++i)
        p.upperbnd.push_back(real_from_json(u[i], "upperbnd[" + std::to_string(i) + "]"));
    } else {
      p.upperbnd.assign(n, real_from_json(u, "upperbnd"));
    }
    if (p.upperbnd.size() != n)
      throw ParseError("upperbnd", "expected " + std::to_string(n) + " bounds, got " + std::to_string(p.upperbnd.size()));
  } else {
    p.upperbnd.assign(n, kInf);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (std::isnan(p.upperbnd[i]) || p.upperbnd[i] == -kInf)
      throw ParseError("upperbnd[" + std::to_string(i) + "]", "bound must be a real or \"inf\"");

  if (j.contains("order")) {
    p.order = int_from_json(j["order"], "order");
    if (p.order < 0) throw ParseError("order", "must be nonnegative");
  }

  if (j.contains("options")) {
    const json& o = j["options"];
    if (!o.is_object()) throw ParseError("options", "expected an object");
    for (auto it = o.begin(); it != o.end(); ++it) {
      const std::string at = "options." + it.key();
      const std::string& k = it.key();
      if (k == "cpumax") p.options.cpumax = real_from_json(*it, at);
      else if (k == "fast") p.options.fast = int_from_json(*it, at) != 0;
      else if (k == "prtlevel") p.options.prtlevel = int_from_json(*it, at);
      else if (k == "weight_norm_k") p.options.weight_norm_k = real_from_json(*it, at);
      else if (k == "augment_hinf") p.options.augment_hinf = real_from_json(*it, at);
      else if (k == "restarts") p.options.restarts = int_from_json(*it, at);
      else if (k == "seed") {
        if (!it->is_number_unsigned()) throw ParseError(at, "expected a nonnegative integer");
        p.options.seed = it->get<std::uint64_t>();
      } else {
        throw ParseError(at, "unknown option");
      }
    }
  }

  try {
    (void)p.plant_set();
  } catch (const std::exception& e) {
    throw ParseError("plants", e.what());
  }
  return p;
}

inline ProblemFile parse_problem(const std::string& text) { return problem_from_json(parse_json(text)); }

// ---------------------------------------------------------------------------
// Controllers and masks
// ---------------------------------------------------------------------------

inline json controller_to_json(const Controller& k)
{
  return {{"order", k.order()},
          {"AK", matrix_to_json(k.AK)},
          {"BK", matrix_to_json(k.BK)},
          {"CK", matrix_to_json(k.CK)},
          {"DK", matrix_to_json(k.DK)}};
}

inline std::string serialize_controller(const Controller& k) { return serialize(controller_to_json(k)); }

/// Accepts a controller object or a report containing one under "controller".
inline Controller controller_from_json(const json& j)
{
  if (j.is_object() && j.contains("controller")) return controller_from_json(j["controller"]);
  if (!j.is_object() || !j.contains("DK")) throw ParseError("", "controller needs at least \"DK\"");
  const Matrix DK = matrix_from_json(j["DK"], "DK");
  if (DK.size() == 0) throw ParseError("DK", "DK must be nonempty");
  const Index m2 = DK.rows(), p2 = DK.cols();
  Index nk = 0;
  if (j.contains("order")) nk = int_from_json(j["order"], "order");
  else if (j.contains("AK")) nk = matrix_from_json(j["AK"], "AK").rows();
  auto get = [&](const char* key, Index r, Index c) {
    return shaped(j.contains(key) ? matrix_from_json(j[key], key) : Matrix(0, 0), r, c, key);
  };
  return Controller(get("AK", nk, nk), get("BK", nk, p2), get("CK", m2, nk), DK);
}

inline Controller parse_controller(const std::string& text) { return controller_from_json(parse_json(text)); }

inline json mask_to_json(const StructureMask& m)
{
  auto one = [](const Mask& b) {
    json rows = json::array();
    for (Index i = 0; i < b.rows(); ++i) {
      json row = json::array();
      for (Index j = 0; j < b.cols(); ++j) row.push_back(b(i, j) ? 1 : 0);
      rows.push_back(row);
    }
    return rows;
  };
  return {{"AK", one(m.AK)}, {"BK", one(m.BK)}, {"CK", one(m.CK)}, {"DK", one(m.DK)}};
}

/// Entries 1/true are free, 0/false are fixed at zero. Blocks default to all free.
inline StructureMask mask_from_json(const json& j, ControllerDims d)
{
  if (!j.is_object()) throw ParseError("", "mask must be an object with AK, BK, CK, DK");
  StructureMask m = StructureMask::full(d);
  auto take = [&](const char* key, Mask& out) {
    if (!j.contains(key)) return;
    const json& b = j[key];
    if (!b.is_array() || static_cast<Index>(b.size()) != out.rows())
      throw ParseError(key, "expected " + std::to_string(out.rows()) + " rows");
    for (Index r = 0; r < out.rows(); ++r) {
      const json& row = b[r];
      if (!row.is_array() || static_cast<Index>(row.size()) != out.cols())
        throw ParseError(std::string(key) + "[" + std::to_string(r) + "]", "expected " + std::to_string(out.cols()) + " entries");
      for (Index c = 0; c < out.cols(); ++c) {
        const json& v = row[c];
        if (v.is_boolean()) out(r, c) = v.get<bool>();
        else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) out(r, c) = v.get<int>() == 1;
        else throw ParseError(std::string(key) + "[" + std::to_string(r) + "][" + std::to_string(c) + "]", "expected 0 or 1");
      }
    }
  };
  take("AK", m.AK);
  take("BK", m.BK);
  take("CK", m.CK);
  take("DK", m.DK);
  return m;
}

inline StructureMask parse_mask(const std::string& text, ControllerDims d) { return mask_from_json(parse_json(text), d); }

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ChannelReport
{
  double value = kInf;
  double violation = 0.0;
  bool ill_posed = false;
  CVector poles;
};

struct RunReport
{
  Controller controller;
  std::string fun;
  std::vector<double> upperbnd;
  double objective = kInf;
  std::vector<ChannelReport> channels;
  std::string status;
  std::optional<double> wall_time;
  std::optional<std::uint64_t> seed;
  std::optional<Certificate> certificate;

  [[nodiscard]] bool feasible(double tol) const
  {
    return std::all_of(channels.begin(), channels.end(), [tol](const ChannelReport& c) { return c.violation <= tol; });
  }
  [[nodiscard]] bool all_finite() const
  {
    return std::isfinite(objective) &&
           std::all_of(channels.begin(), channels.end(), [](const ChannelReport& c) { return c.value < kInf; });
  }
};

/// Recomputes every channel value, violation and closed-loop pole set from scratch.
inline RunReport verify_controller(const ProblemFile& problem, const Controller& k, double augment_hinf = -1.0)
{
  const PlantSet plants = problem.plant_set();
  const ObjectiveSpec spec = problem.spec();
  if (k.m2() != plants.m2() || k.p2() != plants.p2())
    throw DimensionError("controller (m2, p2) does not match the problem");
  const double aug = augment_hinf >= 0.0 ? augment_hinf : problem.options.augment_hinf.value_or(0.0);
  const Evaluation e = evaluate(plants, spec, k, aug);
  RunReport r;
  r.controller = k;
  r.fun = spec.fun();
  r.upperbnd = spec.betas;
  r.objective = e.objective;
  for (std::size_t j = 0; j < plants.size(); ++j) {
    ChannelReport c;
    c.value = e.values[j];
    c.violation = e.violations[j];
    c.ill_posed = e.ill_posed[j];
    if (!c.ill_posed) c.poles = channel_loop(plants.channels()[j], k).system.poles();
    r.channels.push_back(std::move(c));
  }
  if (!e.finite())
    r.status = "no stabilizing controller";
  else
    r.status = e.feasible(SynthOptions{}.viol_tol) ? "success" : "constraints violated";
  return r;
}

inline json report_to_json(const RunReport& r)
{
  json j;
  j["controller"] = controller_to_json(r.controller);
  if (r.controller.m2() == 1 && r.controller.p2() == 1) j["transfer_function"] = tf_to_json(ss_to_tf(r.controller.as_state_space()));
  j["fun"] = r.fun;
  json ub = json::array();
  for (double b : r.upperbnd) ub.push_back(real_to_json(b));
  j["upperbnd"] = ub;
  j["objective"] = real_to_json(r.objective);
  json ch = json::array();
  for (const auto& c : r.channels) {
    json poles = json::array();
    for (Index i = 0; i < c.poles.size(); ++i) poles.push_back({real_to_json(c.poles(i).real()), real_to_json(c.poles(i).imag())});
    ch.push_back({{"value", real_to_json(c.value)}, {"violation", real_to_json(c.violation)}, {"ill_posed", c.ill_posed}, {"poles", poles}});
  }
  j["channels"] = ch;
  j["status"] = r.status;
  if (r.wall_time) j["wall_time"] = *r.wall_time;
  if (r.seed) j["seed"] = *r.seed;
  if (r.certificate)
    j["certificate"] = {{"radius", r.certificate->radius},
                        {"min_hull_grad_norm", r.certificate->min_hull_grad_norm},
                        {"sample_count", r.certificate->sample_count}};
  return j;
}

inline std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

}  // namespace fixord::io

#endif  // FIXORD_IO_HPP
