// File formats: model JSON, observation CSV, reports and filter output.
//
// Model JSON (indices in the arrays are row-major, matrices column-stochastic):
//   {"type": "hmc",     "column_stochastic": true, "n": 2, "m": 2,
//    "A": [[..], ..], "G": [[..], ..], "p0": [..]}
//   {"type": "sigma_p", "column_stochastic": true, "n": 2, "m": 2,
//    "blocks": [Q_1, .., Q_m], "q0": [..]}           q0 has length n*m
//   {"type": "sigma_s", "column_stochastic": true, "n": 2, "m": 2,
//    "blocks": [R_1, .., R_m], "p0": [..]}
// Entries are strings ("3/4", "0.25", "1"). Bare JSON numbers are accepted
// in float mode only. Diagnostics use 1-based indices.
#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hmcfs/filters.hpp"
#include "hmcfs/finprob.hpp"

namespace hmcfs {

using json = nlohmann::ordered_json;

template <typename T>
using AnyModel = std::variant<HmcModel<T>, SigmaPModel<T>, SigmaSModel<T>>;

namespace detail {

template <typename T>
T entry_from_json(const json& v, const std::string& field, const std::string& index) {
  if (v.is_string()) {
    try {
      return ScalarTraits<T>::parse(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ValidationError(field, index, e.what());
    }
  }
  if (v.is_number()) {
    if constexpr (is_exact_v<T>) {
      throw ValidationError(field, index, "exact mode needs string entries (\"3/4\" or \"0.75\"), got a JSON number");
    } else {
      return v.get<double>();
    }
  }
  throw ValidationError(field, index, "expected a number string");
}

inline const json& member(const json& doc, const std::string& field) {
  if (!doc.contains(field)) throw ValidationError(field, "", "missing");
  return doc.at(field);
}

template <typename T>
Vec<T> vector_from_json(const json& v, const std::string& field, Eigen::Index len) {
  if (!v.is_array()) throw ValidationError(field, "", "expected an array");
  if (static_cast<Eigen::Index>(v.size()) != len)
    throw ValidationError(field, "", "expected length " + std::to_string(len) + ", got " + std::to_string(v.size()));
  Vec<T> out(len);
  for (Eigen::Index i = 0; i < len; ++i)
    out(i) = entry_from_json<T>(v[static_cast<std::size_t>(i)], field, std::to_string(i + 1));
  return out;
}

template <typename T>
Mat<T> matrix_from_json(const json& v, const std::string& field, Eigen::Index rows, Eigen::Index cols) {
  if (!v.is_array()) throw ValidationError(field, "", "expected an array of rows");
  if (static_cast<Eigen::Index>(v.size()) != rows)
    throw ValidationError(field, "", "expected " + std::to_string(rows) + " rows, got " + std::to_string(v.size()));
  Mat<T> out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(field, "row " + std::to_string(i + 1), "expected " + std::to_string(cols) + " entries");
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = entry_from_json<T>(row[static_cast<std::size_t>(j)], field,
                                     std::to_string(i + 1) + "," + std::to_string(j + 1));
  }
  return out;
}

inline Eigen::Index dimension(const json& doc, const std::string& field) {
  const auto& v = member(doc, field);
  if (!v.is_number_integer() || v.get<long long>() < 1) throw ValidationError(field, "", "must be a positive integer");
  return static_cast<Eigen::Index>(v.get<long long>());
}

}  // namespace detail

/// Builds the model record described by `doc`. Throws ValidationError naming
/// the offending field (and entry) on any schema or stochasticity violation.
template <typename T>
AnyModel<T> model_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("model", "", "expected a JSON object");
  const auto& cs = detail::member(doc, "column_stochastic");
  if (!cs.is_boolean() || !cs.get<bool>())
    throw ValidationError("column_stochastic", "",
                          "must be true: matrices are stored with columns summing to one, "
                          "entry (i,j) = P(next = i | current = j)");
  const auto& type_v = detail::member(doc, "type");
  if (!type_v.is_string()) throw ValidationError("type", "", "expected a string");
  const std::string type = type_v.get<std::string>();
  const Eigen::Index n = detail::dimension(doc, "n");
  const Eigen::Index m = detail::dimension(doc, "m");
  if (type == "hmc") {
    return HmcModel<T>(detail::matrix_from_json<T>(detail::member(doc, "A"), "A", n, n),
                       detail::matrix_from_json<T>(detail::member(doc, "G"), "G", m, n),
                       detail::vector_from_json<T>(detail::member(doc, "p0"), "p0", n));
  }
  if (type != "sigma_p" && type != "sigma_s")
    throw ValidationError("type", "", "expected \"hmc\", \"sigma_p\" or \"sigma_s\", got \"" + type + "\"");
  const auto& bv = detail::member(doc, "blocks");
  if (!bv.is_array() || static_cast<Eigen::Index>(bv.size()) != m)
    throw ValidationError("blocks", "", "expected m=" + std::to_string(m) + " blocks");
  std::vector<Mat<T>> blocks;
  for (Eigen::Index k = 0; k < m; ++k)
    blocks.push_back(detail::matrix_from_json<T>(bv[static_cast<std::size_t>(k)],
                                                 "blocks[" + std::to_string(k + 1) + "]", n, n));
  if (type == "sigma_p")
    return SigmaPModel<T>(std::move(blocks), detail::vector_from_json<T>(detail::member(doc, "q0"), "q0", n * m));
  return SigmaSModel<T>(std::move(blocks), detail::vector_from_json<T>(detail::member(doc, "p0"), "p0", n));
}

/// Reads and parses a model file; a JSON syntax error is a ValidationError on
/// field "model".
json read_json_file(const std::string& path);

template <typename T>
AnyModel<T> load_model(const std::string& path) {
  return model_from_json<T>(read_json_file(path));
}

template <typename M>
json to_json(const Eigen::MatrixBase<M>& m) {
  using T = typename M::Scalar;
  json out = json::array();
  if (m.cols() == 1) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(ScalarTraits<T>::format(m(i, 0)));
    return out;
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(ScalarTraits<T>::format(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

/// Matrix as an array of rows even when it has a single column.
template <typename M>
json matrix_to_json(const Eigen::MatrixBase<M>& m) {
  using T = typename M::Scalar;
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(ScalarTraits<T>::format(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

template <typename T>
json to_json(const HmcModel<T>& model) {
  return json{{"type", "hmc"},       {"column_stochastic", true},   {"n", model.n()},
              {"m", model.m()},      {"A", matrix_to_json(model.A())}, {"G", matrix_to_json(model.G())},
              {"p0", to_json(model.p0())}};
}

template <typename T>
json to_json(const SigmaPModel<T>& model) {
  json blocks = json::array();
  for (const auto& b : model.blocks()) blocks.push_back(matrix_to_json(b));
  return json{{"type", "sigma_p"}, {"column_stochastic", true}, {"n", model.n()}, {"m", model.m()},
              {"blocks", blocks},  {"q0", to_json(model.q0())}};
}

template <typename T>
json to_json(const SigmaSModel<T>& model) {
  json blocks = json::array();
  for (const auto& b : model.blocks()) blocks.push_back(matrix_to_json(b));
  return json{{"type", "sigma_s"}, {"column_stochastic", true}, {"n", model.n()}, {"m", model.m()},
              {"blocks", blocks},  {"p0", to_json(model.p0())}};
}

/// Reads a "t,y" CSV. Rows must have t = 0, 1, 2, ... and y in 1..m; returns
/// the 0-based symbols.
std::vector<int> read_observations(std::istream& in, int m);
std::vector<int> read_observations_file(const std::string& path, int m);

json to_json(const CheckResult& c);
json to_json(const Report& r);

/// One NDJSON record: t, x_filt, x_pred, y_pred, obs_prob, loglik_inc
/// (null when it is -inf) and reset.
template <typename T>
json to_json(const FilterState<T>& s) {
  json out{{"t", s.t},
           {"x_filt", to_json(s.x_filt)},
           {"x_pred", to_json(s.x_pred)},
           {"y_pred", to_json(s.y_pred)},
           {"obs_prob", ScalarTraits<T>::format(s.obs_prob)}};
  if (std::isfinite(s.loglik_inc)) out["loglik_inc"] = s.loglik_inc;
  else out["loglik_inc"] = nullptr;
  out["reset"] = s.reset;
  return out;
}

}  // namespace hmcfs
