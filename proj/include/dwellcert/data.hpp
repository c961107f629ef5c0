#pragma once

// Subsystem trajectory datasets and result documents.
//
// Dataset document:
//   { "dimension": d,
//     "subsystems": [ { "id": 1, "trace": [ [x1(0), ..., xd(0)], [x1(1), ...], ... ] }, ... ] }
// Result document:
//   { "lambda_s": r, "epsilon": r, "mu": r, "tau": n, "mu_matrix": [[...]],
//     "certificates": [ { "id": i, "P": [[...]], "margin_pd": r, "margin_lmi": r, "T_offset": n } ] }
//
// Doubles are written in shortest round-trip form, so parse(serialize(x))
// reproduces every numeric field bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dwellcert/error.hpp"
#include "dwellcert/linalg.hpp"

namespace dwellcert {

using Json = nlohmann::json;

// States x(0..L) of one subsystem, time-major.
struct Trace {
  std::vector<Vector> states;

  std::size_t dimension() const { return states.empty() ? 0 : states.front().size(); }
  // L, the index of the last state.
  std::size_t last_index() const { return states.empty() ? 0 : states.size() - 1; }

  friend bool operator==(const Trace&, const Trace&) = default;
};

struct Subsystem {
  int id = 0;
  Trace trace;

  friend bool operator==(const Subsystem&, const Subsystem&) = default;
};

struct SubsystemDataset {
  std::size_t dimension = 0;
  std::vector<Subsystem> subsystems;

  std::size_t size() const { return subsystems.size(); }

  friend bool operator==(const SubsystemDataset&, const SubsystemDataset&) = default;
};

// Throws ValidationError naming the subsystem and field on the first problem.
inline void validate(const SubsystemDataset& ds) {
  if (ds.dimension < 1) throw ValidationError("dataset: field 'dimension' must be >= 1");
  if (ds.subsystems.empty()) throw ValidationError("dataset: field 'subsystems' is empty");
  const std::size_t d = ds.dimension;
  for (std::size_t k = 0; k < ds.subsystems.size(); ++k) {
    const auto& s = ds.subsystems[k];
    const std::string who = "subsystem " + std::to_string(s.id);
    if (s.id != static_cast<int>(k) + 1)
      throw ValidationError(who + ": field 'id' out of sequence (expected " + std::to_string(k + 1) +
                            "; ids must be 1..N without gaps or duplicates)");
    if (s.trace.states.size() < d + 1)
      throw ValidationError(who + ": field 'trace' has " + std::to_string(s.trace.states.size()) +
                            " states but at least d+1 = " + std::to_string(d + 1) +
                            " are needed to form its data matrix (requires L >= d)");
    for (std::size_t t = 0; t < s.trace.states.size(); ++t) {
      const auto& x = s.trace.states[t];
      if (x.size() != d)
        throw ValidationError(who + ": field 'trace' state " + std::to_string(t) + " has dimension " +
                              std::to_string(x.size()) + ", dataset dimension is " + std::to_string(d));
      for (double v : x)
        if (!std::isfinite(v))
          throw ValidationError(who + ": field 'trace' state " + std::to_string(t) + " is not finite");
    }
  }
}

// Certificate as stored in a result document. The LMI margin and offset are
// absent when the certificate was supplied without data.
struct CertificateRecord {
  int id = 0;
  Matrix p;
  double margin_pd = 0.0;
  std::optional<double> margin_lmi;
  std::optional<int> t_offset;

  friend bool operator==(const CertificateRecord&, const CertificateRecord&) = default;
};

namespace detail {

// ceil(ln(mu) / |ln(lambda_s)| + epsilon), no domain checks.
inline int dwell_time_formula(double mu, double lambda_s, double epsilon) {
  return static_cast<int>(std::ceil(std::log(mu) / std::abs(std::log(lambda_s)) + epsilon));
}

inline constexpr double kMuDiagonalTol = 1e-9;

}  // namespace detail

struct DwellTimeResult {
  double lambda_s = 0.0;
  std::vector<CertificateRecord> certificates;
  Matrix mu_matrix;
  double mu = 0.0;
  double epsilon = 0.0;
  int tau = 0;

  friend bool operator==(const DwellTimeResult&, const DwellTimeResult&) = default;
};

inline void validate(const DwellTimeResult& r) {
  if (!(r.lambda_s > 0.0 && r.lambda_s < 1.0)) throw ValidationError("result: field 'lambda_s' must lie in ]0,1[");
  if (!(r.epsilon > 0.0)) throw ValidationError("result: field 'epsilon' must be > 0");
  const std::size_t n = r.certificates.size();
  if (n == 0) throw ValidationError("result: field 'certificates' is empty");
  if (r.mu_matrix.rows() != n || r.mu_matrix.cols() != n)
    throw ValidationError("result: field 'mu_matrix' must be N x N with N = " + std::to_string(n));
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = r.certificates[k];
    if (c.id != static_cast<int>(k) + 1)
      throw ValidationError("result: certificate " + std::to_string(c.id) + ": field 'id' out of sequence");
    if (c.p.rows() == 0 || !c.p.is_square() || c.p.rows() != r.certificates.front().p.rows())
      throw ValidationError("result: certificate " + std::to_string(c.id) + ": field 'P' has a bad shape");
    if (std::abs(r.mu_matrix(k, k) - 1.0) > detail::kMuDiagonalTol)
      throw ValidationError("result: field 'mu_matrix' diagonal entry " + std::to_string(k + 1) + " is not 1");
  }
  if (!r.mu_matrix.all_finite()) throw ValidationError("result: field 'mu_matrix' is not finite");
  const auto entries = r.mu_matrix.data();
  if (r.mu != *std::max_element(entries.begin(), entries.end()))
    throw ValidationError("result: field 'mu' differs from the largest entry of 'mu_matrix'");
  if (n >= 2 && !(r.mu > 1.0)) {
    // mu <= 1 with two or more subsystems is only possible for identical certificates.
    const bool all_equal = std::all_of(r.certificates.begin(), r.certificates.end(),
                                       [&](const auto& c) { return c.p == r.certificates.front().p; });
    if (!all_equal) throw ValidationError("result: field 'mu' must exceed 1 when N >= 2");
  }
  if (r.tau < 1 || r.tau != detail::dwell_time_formula(r.mu, r.lambda_s, r.epsilon))
    throw ValidationError("result: field 'tau' does not equal ceil(ln(mu)/|ln(lambda_s)| + epsilon)");
}

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(m.row(r));
  return rows;
}

inline std::string where(std::string_view ctx, std::string_view field) {
  return std::string(ctx) + ": field '" + std::string(field) + "'";
}

inline const Json& require(const Json& obj, const char* key, std::string_view ctx) {
  if (!obj.is_object()) throw ParseError(std::string(ctx) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where(ctx, key) + " is missing");
  return *it;
}

inline double as_real(const Json& j, std::string_view ctx, std::string_view field) {
  if (!j.is_number()) throw ParseError(where(ctx, field) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(where(ctx, field) + " must be finite");
  return v;
}

inline long long as_integer(const Json& j, std::string_view ctx, std::string_view field) {
  if (!j.is_number_integer()) throw ParseError(where(ctx, field) + " must be an integer");
  return j.get<long long>();
}

inline Vector as_vector(const Json& j, std::string_view ctx, std::string_view field) {
  if (!j.is_array()) throw ParseError(where(ctx, field) + " must be an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (const auto& e : j) v.push_back(as_real(e, ctx, field));
  return v;
}

inline Matrix as_matrix(const Json& j, std::string_view ctx, std::string_view field) {
  if (!j.is_array()) throw ParseError(where(ctx, field) + " must be an array of rows");
  std::vector<Vector> rows;
  for (const auto& r : j) rows.push_back(as_vector(r, ctx, field));
  for (const auto& r : rows)
    if (r.size() != rows.front().size()) throw ParseError(where(ctx, field) + " has rows of unequal length");
  return Matrix::from_rows(rows);
}

inline Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed document at byte " + std::to_string(e.byte) + ": " +
                     e.what());
  }
}

inline Json optional_real(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace detail

inline SubsystemDataset parse_dataset(std::string_view text) {
  const Json doc = detail::parse_json(text, "dataset");
  SubsystemDataset ds;
  const long long d = detail::as_integer(detail::require(doc, "dimension", "dataset"), "dataset", "dimension");
  if (d < 1) throw ValidationError("dataset: field 'dimension' must be >= 1");
  ds.dimension = static_cast<std::size_t>(d);
  const Json& subs = detail::require(doc, "subsystems", "dataset");
  if (!subs.is_array()) throw ParseError("dataset: field 'subsystems' must be an array");
  for (std::size_t k = 0; k < subs.size(); ++k) {
    const std::string ctx = "dataset: subsystems[" + std::to_string(k) + "]";
    Subsystem s;
    s.id = static_cast<int>(detail::as_integer(detail::require(subs[k], "id", ctx), ctx, "id"));
    const std::string sctx = "dataset: subsystem " + std::to_string(s.id);
    const Json& tr = detail::require(subs[k], "trace", sctx);
    if (!tr.is_array()) throw ParseError(sctx + ": field 'trace' must be an array of states");
    for (const auto& x : tr) s.trace.states.push_back(detail::as_vector(x, sctx, "trace"));
    ds.subsystems.push_back(std::move(s));
  }
  validate(ds);
  return ds;
}

inline std::string serialize_dataset(const SubsystemDataset& ds) {
  validate(ds);
  Json doc;
  doc["dimension"] = ds.dimension;
  Json subs = Json::array();
  for (const auto& s : ds.subsystems) subs.push_back({{"id", s.id}, {"trace", s.trace.states}});
  doc["subsystems"] = std::move(subs);
  return doc.dump(2) + "\n";
}

// One subsystem trace from comma-separated text: one row per time step, one
// column per state component. A non-numeric first line is taken as a header.
inline Trace parse_trace_csv(std::string_view text, std::string_view source = "csv") {
  Trace tr;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Vector row;
    std::istringstream cells(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (tr.states.empty() && lineno == 1) continue;
      throw ParseError(std::string(source) + ": line " + std::to_string(lineno) + " is not a row of numbers");
    }
    tr.states.push_back(std::move(row));
  }
  return tr;
}

// Dataset from one comma-separated trace per subsystem, ids assigned in order.
inline SubsystemDataset dataset_from_csv(const std::vector<std::string>& texts,
                                         const std::vector<std::string>& sources = {}) {
  SubsystemDataset ds;
  for (std::size_t k = 0; k < texts.size(); ++k) {
    Subsystem s;
    s.id = static_cast<int>(k) + 1;
    s.trace = parse_trace_csv(texts[k], k < sources.size() ? sources[k] : "subsystem " + std::to_string(k + 1));
    ds.subsystems.push_back(std::move(s));
  }
  ds.dimension = ds.subsystems.empty() ? 0 : ds.subsystems.front().trace.dimension();
  validate(ds);
  return ds;
}

inline std::string serialize_result(const DwellTimeResult& r) {
  validate(r);
  Json doc;
  doc["lambda_s"] = r.lambda_s;
  doc["epsilon"] = r.epsilon;
  doc["mu"] = r.mu;
  doc["tau"] = r.tau;
  doc["mu_matrix"] = detail::matrix_to_json(r.mu_matrix);
  Json certs = Json::array();
  for (const auto& c : r.certificates) {
    certs.push_back({{"id", c.id},
                     {"P", detail::matrix_to_json(c.p)},
                     {"margin_pd", c.margin_pd},
                     {"margin_lmi", detail::optional_real(c.margin_lmi)},
                     {"T_offset", c.t_offset ? Json(*c.t_offset) : Json(nullptr)}});
  }
  doc["certificates"] = std::move(certs);
  return doc.dump(2) + "\n";
}

inline DwellTimeResult parse_result(std::string_view text) {
  const Json doc = detail::parse_json(text, "result");
  DwellTimeResult r;
  const char* ctx = "result";
  r.lambda_s = detail::as_real(detail::require(doc, "lambda_s", ctx), ctx, "lambda_s");
  r.epsilon = detail::as_real(detail::require(doc, "epsilon", ctx), ctx, "epsilon");
  r.mu = detail::as_real(detail::require(doc, "mu", ctx), ctx, "mu");
  r.tau = static_cast<int>(detail::as_integer(detail::require(doc, "tau", ctx), ctx, "tau"));
  r.mu_matrix = detail::as_matrix(detail::require(doc, "mu_matrix", ctx), ctx, "mu_matrix");
  const Json& certs = detail::require(doc, "certificates", ctx);
  if (!certs.is_array()) throw ParseError("result: field 'certificates' must be an array");
  for (std::size_t k = 0; k < certs.size(); ++k) {
    const std::string cctx = "result: certificates[" + std::to_string(k) + "]";
    CertificateRecord c;
    c.id = static_cast<int>(detail::as_integer(detail::require(certs[k], "id", cctx), cctx, "id"));
    c.p = detail::as_matrix(detail::require(certs[k], "P", cctx), cctx, "P");
    c.margin_pd = detail::as_real(detail::require(certs[k], "margin_pd", cctx), cctx, "margin_pd");
    if (const auto it = certs[k].find("margin_lmi"); it != certs[k].end() && !it->is_null())
      c.margin_lmi = detail::as_real(*it, cctx, "margin_lmi");
    if (const auto it = certs[k].find("T_offset"); it != certs[k].end() && !it->is_null())
      c.t_offset = static_cast<int>(detail::as_integer(*it, cctx, "T_offset"));
    r.certificates.push_back(std::move(c));
  }
  validate(r);
  return r;
}

// Externally supplied certificates: { "lambda_s": r, "certificates": [ { "id": i, "P": [[...]] } ] }.
// A result document is also accepted; extra fields are ignored.
struct CertificateSet {
  double lambda_s = 0.0;
  std::vector<std::pair<int, Matrix>> matrices;
};

inline CertificateSet parse_certificate_set(std::string_view text) {
  const Json doc = detail::parse_json(text, "certificates");
  const char* ctx = "certificates";
  CertificateSet set;
  set.lambda_s = detail::as_real(detail::require(doc, "lambda_s", ctx), ctx, "lambda_s");
  if (!(set.lambda_s > 0.0 && set.lambda_s < 1.0))
    throw ValidationError("certificates: field 'lambda_s' must lie in ]0,1[");
  const Json& certs = detail::require(doc, "certificates", ctx);
  if (!certs.is_array() || certs.empty()) throw ParseError("certificates: field 'certificates' must be a non-empty array");
  for (std::size_t k = 0; k < certs.size(); ++k) {
    const std::string cctx = "certificates[" + std::to_string(k) + "]";
    const int id = static_cast<int>(detail::as_integer(detail::require(certs[k], "id", cctx), cctx, "id"));
    const std::string who = "certificate " + std::to_string(id);
    if (id != static_cast<int>(k) + 1) throw ValidationError(who + ": field 'id' out of sequence");
    Matrix p = detail::as_matrix(detail::require(certs[k], "P", who), who, "P");
    if (p.rows() == 0 || !p.is_square()) throw ValidationError(who + ": field 'P' must be square");
    if (!set.matrices.empty() && p.rows() != set.matrices.front().second.rows())
      throw ValidationError(who + ": field 'P' has a different dimension than certificate 1");
    set.matrices.emplace_back(id, std::move(p));
  }
  return set;
}

}  // namespace dwellcert
