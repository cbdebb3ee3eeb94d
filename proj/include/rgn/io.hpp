#pragma once

// JSON files for tensors and decompositions, and the CSV writers used by the
// experiment harness. Numbers are binary64; text forms are shortest
// round-trip decimal so write-then-read is bit exact.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "rgn/cpd_model.hpp"
#include "rgn/diagnostics.hpp"
#include "rgn/error.hpp"
#include "rgn/segre.hpp"
#include "rgn/solver.hpp"

namespace rgn::io {

using json = nlohmann::json;

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file", path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open file for writing: " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into line:column.
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("malformed JSON", source + ":" + std::to_string(line) + ":" + std::to_string(col));
  }
}

inline const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError("expected a JSON object", where);
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'", where);
  return *it;
}

inline double number_at(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError("expected a number", where);
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ParseError("non-finite number", where);
  return x;
}

inline std::size_t count_at(const json& v, const std::string& where) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) throw ParseError("expected a nonnegative integer", where);
  const auto n = v.get<long long>();
  if (n < 0) throw ParseError("expected a nonnegative integer", where);
  return static_cast<std::size_t>(n);
}

inline std::vector<double> number_array(const json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError("expected an array of numbers", where);
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number_at(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::string dump(const json& j) { return j.dump() + "\n"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Tensor files: {"dims": [m1,...,md], "data": [N reals]}

inline json tensor_to_json(const Tensor<double>& t) {
  json j;
  j["dims"] = t.shape.modes();
  j["data"] = t.data;
  return j;
}

inline Tensor<double> tensor_from_json(const json& j, const std::string& source = "tensor") {
  const json& dims = detail::field(j, "dims", source);
  if (!dims.is_array()) throw ParseError("expected an array", source + ".dims");
  std::vector<std::size_t> modes;
  for (std::size_t i = 0; i < dims.size(); ++i)
    modes.push_back(detail::count_at(dims[i], source + ".dims[" + std::to_string(i) + "]"));
  Shape shape;
  try {
    shape = Shape(modes);
  } catch (const InvalidInput& e) {
    throw ParseError(e.what(), source + ".dims");
  }
  std::vector<double> data = detail::number_array(detail::field(j, "data", source), source + ".data");
  if (data.size() != shape.ambient_dim())
    throw ParseError("expected " + std::to_string(shape.ambient_dim()) + " entries, found " + std::to_string(data.size()),
                     source + ".data");
  return Tensor<double>(shape, std::move(data));
}

inline void write_tensor(const std::string& path, const Tensor<double>& t) {
  detail::write_file(path, detail::dump(tensor_to_json(t)));
}

inline Tensor<double> read_tensor(const std::string& path) {
  return tensor_from_json(detail::parse_json(detail::read_file(path), path), path);
}

// ---------------------------------------------------------------------------
// Decomposition files: {"rank": r, "factors": [[[a^(1)], ..., [a^(d)]], ...]}

inline json decomposition_to_json(const ProductPoint<double>& p) {
  json j;
  j["rank"] = p.rank();
  json terms = json::array();
  for (const auto& t : p.terms()) terms.push_back(t.factors());
  j["factors"] = std::move(terms);
  return j;
}

inline ProductPoint<double> decomposition_from_json(const json& j, const std::string& source = "decomposition") {
  const std::size_t rank = detail::count_at(detail::field(j, "rank", source), source + ".rank");
  const json& factors = detail::field(j, "factors", source);
  if (!factors.is_array()) throw ParseError("expected an array of terms", source + ".factors");
  if (factors.size() != rank)
    throw ParseError("rank is " + std::to_string(rank) + " but " + std::to_string(factors.size()) + " terms are listed",
                     source + ".factors");
  if (rank == 0) throw ParseError("rank must be at least 1", source + ".rank");
  std::vector<std::vector<Vector<double>>> terms;
  std::vector<std::size_t> modes;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::string where = source + ".factors[" + std::to_string(i) + "]";
    if (!factors[i].is_array()) throw ParseError("expected an array of factor vectors", where);
    std::vector<Vector<double>> term;
    for (std::size_t k = 0; k < factors[i].size(); ++k)
      term.push_back(detail::number_array(factors[i][k], where + "[" + std::to_string(k) + "]"));
    std::vector<std::size_t> m;
    for (const auto& f : term) m.push_back(f.size());
    if (i == 0) {
      modes = m;
    } else if (m != modes) {
      throw ParseError("factor sizes differ from the first term", where);
    }
    terms.push_back(std::move(term));
  }
  try {
    return ProductPoint<double>::from_factors(Shape(modes), terms);
  } catch (const InvalidInput& e) {
    throw ParseError(e.what(), source + ".factors");
  }
}

inline void write_decomposition(const std::string& path, const ProductPoint<double>& p) {
  detail::write_file(path, detail::dump(decomposition_to_json(p)));
}

inline ProductPoint<double> read_decomposition(const std::string& path) {
  return decomposition_from_json(detail::parse_json(detail::read_file(path), path), path);
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* trace_csv_header = "iter,error,residual,grad_norm,step_norm,sigma_min,kappa";
inline constexpr const char* bounds_csv_header =
    "s,kappa_star,residual_star,C_hat,E_hat,theoretical_rate,fitted_rate,fitted_order";

template <Real T>
std::string trace_csv(const IterationTrace<T>& trace) {
  std::ostringstream os;
  os << trace_csv_header << '\n';
  for (const auto& r : trace.records) {
    os << r.iter << ',' << format_double(r.error) << ',' << format_double(r.residual_norm) << ','
       << format_double(r.gradient_norm) << ',' << format_double(r.step_norm) << ',' << format_double(r.sigma_min)
       << ',' << format_double(r.kappa) << '\n';
  }
  return os.str();
}

template <Real T>
void write_trace_csv(const std::string& path, const IterationTrace<T>& trace) {
  detail::write_file(path, trace_csv(trace));
}

struct BoundsRow {
  int s = 0;
  double kappa_star = 0;
  double residual_star = 0;
  double C_hat = 0;
  double E_hat = 0;
  double theoretical_rate = 0;
  double fitted_rate = 0;
  double fitted_order = 0;
};

inline std::string bounds_csv(const std::vector<BoundsRow>& rows) {
  std::ostringstream os;
  os << bounds_csv_header << '\n';
  for (const auto& r : rows)
    os << r.s << ',' << format_double(r.kappa_star) << ',' << format_double(r.residual_star) << ','
       << format_double(r.C_hat) << ',' << format_double(r.E_hat) << ',' << format_double(r.theoretical_rate) << ','
       << format_double(r.fitted_rate) << ',' << format_double(r.fitted_order) << '\n';
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) { detail::write_file(path, text); }

}  // namespace rgn::io
