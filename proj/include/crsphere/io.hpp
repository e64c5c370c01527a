#pragma once

// Serialization and text input: JSON schemas for SphereFunction and the
// solver outputs (exact scalars as "num/den" strings, float as numbers),
// CSV exports for plotting, block-matrix dumps for golden files, and the
// recursive-descent parser for the polynomial fixture language
//   z, w, conj(z), conj(w), i, rational literals, + - * ^, parentheses.

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crsphere/flow.hpp"
#include "crsphere/slice.hpp"

namespace crsphere {

using nlohmann::json;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------
// Scalars

inline json scalar_to_json(const RationalComplex& x) {
  return json{to_fraction_string(x.re), to_fraction_string(x.im)};
}
inline json scalar_to_json(const std::complex<double>& x) {
  return json{x.real(), x.imag()};
}

template <class S>
S scalar_from_json(const json& j);

template <>
inline RationalComplex scalar_from_json<RationalComplex>(const json& j) {
  if (j.is_array() && j.size() == 2 && j[0].is_string())
    return {rational_from_string(j[0].get<std::string>()),
            rational_from_string(j[1].get<std::string>())};
  if (j.is_array() && j.size() == 2)
    return {Rational(j[0].get<double>()), Rational(j[1].get<double>())};
  throw ParseError("expected [re, im] scalar");
}
template <>
inline std::complex<double> scalar_from_json<std::complex<double>>(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("expected [re, im] scalar");
  auto part = [](const json& v) {
    return v.is_string() ? to_double(rational_from_string(v.get<std::string>()))
                         : v.get<double>();
  };
  return {part(j[0]), part(j[1])};
}

// ------------------------------------------------------------------
// SphereFunction

template <class S>
json to_json(const SphereFunction<S>& u) {
  json blocks = json::array();
  for (const auto& [pq, coeffs] : u.blocks) {
    json re = json::array(), im = json::array();
    for (const auto& c : coeffs) {
      json s = scalar_to_json(c);
      re.push_back(s[0]);
      im.push_back(s[1]);
    }
    blocks.push_back({{"p", pq.first}, {"q", pq.second}, {"re", re}, {"im", im}});
  }
  return json{{"weight", u.weight},
              {"truncation", u.truncation},
              {"blocks", blocks}};
}

template <class S>
SphereFunction<S> sphere_function_from_json(const json& j) {
  SphereFunction<S> u =
      SphereFunction<S>::zero(j.at("weight").get<int>(), j.at("truncation").get<int>());
  for (const auto& b : j.at("blocks")) {
    int p = b.at("p").get<int>(), q = b.at("q").get<int>();
    const auto& re = b.at("re");
    const auto& im = b.at("im");
    if (static_cast<int>(re.size()) != block_dim(p, q) || re.size() != im.size())
      throw ParseError("block (" + std::to_string(p) + "," + std::to_string(q) +
                       ") has wrong coefficient count");
    std::vector<S> coeffs(re.size());
    for (size_t a = 0; a < re.size(); ++a)
      coeffs[a] = scalar_from_json<S>(json{re[a], im[a]});
    u.add_block(p, q, coeffs);
  }
  return u;
}

// ------------------------------------------------------------------
// Solver outputs

template <class S>
json to_json(const TangencySeries<S>& series) {
  json f = json::array(), phi = json::array();
  for (const auto& fk : series.f) f.push_back(to_json(fk));
  for (const auto& pk : series.phi) phi.push_back(to_json(pk));
  json lambda;
  if constexpr (scalar_traits<S>::exact)
    lambda = to_fraction_string(series.lambda);
  else
    lambda = series.lambda;
  return json{{"K", series.K},
              {"truncation", series.truncation},
              {"lambda", lambda},
              {"f", f},
              {"phi", phi},
              {"fs_norms", series.fs_norms},
              {"norm_order", series.norm_order},
              {"radius", series.radius},
              {"solver_constant", series.solver_constant},
              {"series_constant", series.series_constant},
              {"sign_min", series.sign_min},
              {"sign", series.sign},
              {"sign_certified", series.sign_certified}};
}

template <class S>
TangencySeries<S> series_from_json(const json& j) {
  TangencySeries<S> s;
  s.K = j.at("K").get<int>();
  s.truncation = j.at("truncation").get<int>();
  if constexpr (scalar_traits<S>::exact)
    s.lambda = j.at("lambda").is_string()
                   ? rational_from_string(j.at("lambda").get<std::string>())
                   : Rational(j.at("lambda").get<double>());
  else
    s.lambda = j.at("lambda").is_string()
                   ? to_double(rational_from_string(j.at("lambda").get<std::string>()))
                   : j.at("lambda").get<double>();
  for (const auto& fk : j.at("f")) s.f.push_back(sphere_function_from_json<S>(fk));
  for (const auto& pk : j.at("phi")) s.phi.push_back(sphere_function_from_json<S>(pk));
  s.fs_norms = j.at("fs_norms").get<std::vector<double>>();
  s.norm_order = j.at("norm_order").get<int>();
  s.radius = j.at("radius").get<double>();
  s.solver_constant = j.at("solver_constant").get<double>();
  s.series_constant = j.at("series_constant").get<double>();
  s.sign_min = j.at("sign_min").get<double>();
  s.sign = j.at("sign").get<int>();
  s.sign_certified = j.at("sign_certified").get<bool>();
  return s;
}

inline json to_json(const Trajectory& traj) {
  json f = json::array(), phi = json::array();
  for (const auto& fk : traj.f) f.push_back(to_json(fk));
  for (const auto& pk : traj.phi) phi.push_back(to_json(pk));
  return json{{"lambda", traj.lambda},
              {"dt", traj.dt},
              {"truncation", traj.truncation},
              {"fixed_point_tol", traj.fixed_point_tol},
              {"times", traj.times},
              {"f", f},
              {"phi", phi},
              {"max_contraction", traj.max_contraction}};
}

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.lambda = j.at("lambda").get<double>();
  t.dt = j.at("dt").get<double>();
  t.truncation = j.at("truncation").get<int>();
  t.fixed_point_tol = j.at("fixed_point_tol").get<double>();
  t.times = j.at("times").get<std::vector<double>>();
  for (const auto& fk : j.at("f")) t.f.push_back(sphere_function_from_json<std::complex<double>>(fk));
  for (const auto& pk : j.at("phi"))
    t.phi.push_back(sphere_function_from_json<std::complex<double>>(pk));
  t.max_contraction = j.at("max_contraction").get<double>();
  return t;
}

template <class S>
json to_json(const SliceDecomposition<S>& d) {
  return json{{"be_prime", to_json(d.be_prime)},
              {"g", to_json(d.g)},
              {"perp", to_json(d.perp)},
              {"residual_norm", d.residual_norm}};
}

inline json to_json(const ConeReport& r) {
  auto blocks = [](const std::vector<BlockKey>& v) {
    json out = json::array();
    for (auto [p, q] : v) out.push_back(json{{"p", p}, {"q", q}});
    return out;
  };
  json defects = json::array();
  for (auto [p, norm] : r.reality_defects)
    defects.push_back(json{{"p", p}, {"defect_norm", norm}});
  return json{{"in_D0", r.in_D0},
              {"in_BE", r.in_BE},
              {"in_BE_prime", r.in_BE_prime},
              {"in_CD", r.in_CD},
              {"in_CD_prime", r.in_CD_prime},
              {"offending_D0", blocks(r.offending_D0)},
              {"offending_BE", blocks(r.offending_BE)},
              {"offending_CD", blocks(r.offending_CD)},
              {"reality_defects", defects}};
}

// Block-matrix dump of an operator for golden-file regression.
template <class S>
json to_json(const BlockOperator<S>& op) {
  json blocks = json::array();
  for (const auto& [pq, m] : op.matrices) {
    json rows = json::array();
    for (const auto& row : m) {
      json r = json::array();
      for (const auto& c : row) r.push_back(scalar_to_json(c));
      rows.push_back(r);
    }
    blocks.push_back({{"p", pq.first}, {"q", pq.second}, {"matrix", rows}});
  }
  return json{{"dp", op.dp}, {"dq", op.dq}, {"weight_delta", op.weight_delta},
              {"blocks", blocks}};
}

// ------------------------------------------------------------------
// CSV exports

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  out.precision(17);
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

template <class S>
void write_norms_csv(const std::string& path, const TangencySeries<S>& series) {
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < series.fs_norms.size(); ++k)
    rows.push_back({static_cast<double>(k), series.fs_norms[k]});
  write_csv(path, {"k", "fs_norm"}, rows);
}

// Per-sample norms of the parabolic trajectory: the ray part is t*phidot, so
// psi_l2 tracks the D_0-perp drift against time for plotting.
inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < traj.times.size(); ++i) {
    SphereFunctionD psi = project(traj.phi[i], Region::QIn01);
    rows.push_back({traj.times[i], l2_norm(psi), l2_norm(traj.phi[i]), l2_norm(traj.f[i])});
  }
  write_csv(path, {"t", "psi_l2", "phi_l2", "f_l2"}, rows);
}

inline void write_flow_csv(const std::string& path, const FlowResult& result) {
  std::vector<std::vector<double>> rows;
  for (const auto& s : result.samples)
    rows.push_back({s.t, s.cr_residual, s.min_re_f, s.gamma_norm, s.radius_mean, s.radius_min,
                    s.radius_max});
  write_csv(path, {"t", "cr_residual", "min_abs_re_f", "gamma_norm", "radius_mean", "radius_min",
                   "radius_max"},
            rows);
}

// ------------------------------------------------------------------
// Polynomial fixture language

namespace detail {

class PolyParser {
 public:
  explicit PolyParser(std::string text) : text_(std::move(text)) {}

  PolyQ parse() {
    PolyQ p = expression();
    skip_space();
    if (pos_ != text_.size()) fail("trailing input");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("parse error at 1:" + std::to_string(pos_ + 1) + ": " + what);
  }
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool consume(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  PolyQ expression() {
    PolyQ p = consume('-') ? -term() : (consume('+'), term());
    while (true) {
      if (consume('+'))
        p += term();
      else if (consume('-'))
        p -= term();
      else
        return p;
    }
  }

  PolyQ term() {
    PolyQ p = factor();
    while (consume('*')) p = p * factor();
    return p;
  }

  PolyQ factor() {
    PolyQ p = atom();
    if (consume('^')) {
      skip_space();
      size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == start) fail("expected exponent");
      int e = std::stoi(text_.substr(start, pos_ - start));
      PolyQ out = PolyQ::constant(RationalComplex(1));
      for (int i = 0; i < e; ++i) out = out * p;
      return out;
    }
    return p;
  }

  PolyQ atom() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      PolyQ p = expression();
      if (!consume(')')) fail("expected ')'");
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) return rational_literal();
    if (text_.compare(pos_, 5, "conj(") == 0) {
      pos_ += 5;
      PolyQ p = expression();
      if (!consume(')')) fail("expected ')' after conj argument");
      return p.conjugated();
    }
    if (c == 'z') {
      ++pos_;
      return PolyQ::z();
    }
    if (c == 'w') {
      ++pos_;
      return PolyQ::w();
    }
    if (c == 'i' && !(pos_ + 1 < text_.size() &&
                      std::isalnum(static_cast<unsigned char>(text_[pos_ + 1])))) {
      ++pos_;
      return PolyQ::constant(RationalComplex::i());
    }
    if (c == '-') {
      ++pos_;
      return -factor();
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  PolyQ rational_literal() {
    size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::string num = text_.substr(start, pos_ - start);
    std::string den = "1";
    size_t save = pos_;
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '/') {
      ++pos_;
      skip_space();
      size_t ds = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == ds) fail("expected denominator digits");
      den = text_.substr(ds, pos_ - ds);
    } else {
      pos_ = save;
    }
    return PolyQ::constant(RationalComplex(rational_from_string(num + "/" + den)));
  }

  std::string text_;
  size_t pos_ = 0;
};

}  // namespace detail

inline PolyQ parse_polynomial(const std::string& text) {
  return detail::PolyParser(text).parse();
}

// ------------------------------------------------------------------
// Run manifest

inline std::string fnv1a_hex(const std::string& data) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

inline void write_manifest(const std::string& output_path, const json& config,
                           const std::vector<std::pair<std::string, double>>& timings) {
  json t = json::object();
  for (const auto& [name, secs] : timings) t[name] = secs;
  json manifest{{"tool", "crsphere"},
                {"version", "0.1.0"},
                {"config", config},
                {"config_hash", fnv1a_hex(config.dump())},
                {"timings_seconds", t}};
  std::ofstream out(output_path);
  out << manifest.dump(2) << "\n";
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

}  // namespace crsphere
