#pragma once

// Textual grid-measure format (bit-exact contract):
//   # wotgrid v1
//   dim: 1|2
//   shape: NX [NY]
//   extent: X0 X1 [Y0 Y1]
//   data:
//   <whitespace-separated values, row-major, x outer / y inner>
// plus the JSON run report the CLI emits.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wot/grid.hpp"
#include "wot/solver.hpp"

namespace wot {

struct ParseError : std::runtime_error {
  int line = 0;
  ParseError(const std::string& msg, int line_no)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::string shortest_repr(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline MeasureField parse_measure_stream(std::istream& in) {
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError("unexpected end of file", line_no);
    ++line_no;
    return detail::trim(line);
  };

  if (next_line() != "# wotgrid v1")
    throw ParseError("expected header '# wotgrid v1'", line_no);

  MeasureField f;
  {
    std::istringstream ls(next_line());
    std::string key;
    int d = 0;
    if (!(ls >> key >> d) || key != "dim:" || (d != 1 && d != 2))
      throw ParseError("expected 'dim: 1' or 'dim: 2'", line_no);
    f.spec.dim = d;
  }
  {
    std::istringstream ls(next_line());
    std::string key;
    if (!(ls >> key) || key != "shape:") throw ParseError("expected 'shape: ...'", line_no);
    if (!(ls >> f.spec.nx)) throw ParseError("bad shape", line_no);
    if (f.spec.dim == 2 && !(ls >> f.spec.ny)) throw ParseError("bad shape (need NX NY)", line_no);
    if (f.spec.nx < 1 || (f.spec.dim == 2 && f.spec.ny < 1))
      throw ParseError("shape must be positive", line_no);
  }
  {
    std::istringstream ls(next_line());
    std::string key;
    if (!(ls >> key) || key != "extent:") throw ParseError("expected 'extent: ...'", line_no);
    if (!(ls >> f.spec.x0 >> f.spec.x1)) throw ParseError("bad extent", line_no);
    if (f.spec.dim == 2 && !(ls >> f.spec.y0 >> f.spec.y1))
      throw ParseError("bad extent (need X0 X1 Y0 Y1)", line_no);
    if (!(f.spec.x1 > f.spec.x0) || (f.spec.dim == 2 && !(f.spec.y1 > f.spec.y0)))
      throw ParseError("extent must have positive length", line_no);
  }
  if (next_line() != "data:") throw ParseError("expected 'data:'", line_no);

  const size_t want = (size_t)f.spec.ncells();
  f.values.reserve(want);
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    double v;
    while (ls >> v) {
      if (!std::isfinite(v))
        throw ParseError("non-finite value at index " + std::to_string(f.values.size()),
                         line_no);
      if (v < 0.0)
        throw ParseError("negative value at index " + std::to_string(f.values.size()),
                         line_no);
      f.values.push_back(v);
    }
    std::string rest;
    if (ls.clear(), ls >> rest)
      throw ParseError("unparsable token '" + rest + "'", line_no);
  }
  if (f.values.size() != want)
    throw ParseError("value count " + std::to_string(f.values.size()) +
                         " does not match shape product " + std::to_string(want),
                     line_no);
  return f;
}

inline MeasureField parse_measure(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open measure file: " + path);
  try {
    return parse_measure_stream(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line);
  }
}

inline std::string serialize_measure(const MeasureField& f) {
  std::ostringstream out;
  out << "# wotgrid v1\n";
  out << "dim: " << f.spec.dim << "\n";
  if (f.spec.dim == 1) {
    out << "shape: " << f.spec.nx << "\n";
    out << "extent: " << detail::shortest_repr(f.spec.x0) << " "
        << detail::shortest_repr(f.spec.x1) << "\n";
  } else {
    out << "shape: " << f.spec.nx << " " << f.spec.ny << "\n";
    out << "extent: " << detail::shortest_repr(f.spec.x0) << " "
        << detail::shortest_repr(f.spec.x1) << " " << detail::shortest_repr(f.spec.y0) << " "
        << detail::shortest_repr(f.spec.y1) << "\n";
  }
  out << "data:\n";
  const int per_line = f.spec.dim == 2 ? f.spec.ny : 16;
  for (size_t i = 0; i < f.values.size(); ++i) {
    out << detail::shortest_repr(f.values[i]);
    out << (((int)(i % per_line) == per_line - 1 || i + 1 == f.values.size()) ? "\n" : " ");
  }
  return out.str();
}

inline void write_measure(const std::string& path, const MeasureField& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << serialize_measure(f);
}

inline nlohmann::json grid_json(const GridSpec& g) {
  nlohmann::json j{{"dim", g.dim}, {"nx", g.nx}, {"nt", g.nt},
                   {"extent", {g.x0, g.x1}}};
  if (g.dim == 2) {
    j["ny"] = g.ny;
    j["extent"] = {g.x0, g.x1, g.y0, g.y1};
  }
  return j;
}

inline nlohmann::json params_json(const ActionParams& ap) {
  nlohmann::json j{{"p", ap.p}, {"alpha", ap.alpha}, {"q", ap.q()}, {"theta", ap.theta()}};
  if (auto k = ap.kappa()) j["kappa"] = *k;
  else j["kappa"] = nullptr;
  return j;
}

inline nlohmann::json run_report(const GeodesicResult& r,
                                 const nlohmann::json& oracle_comparisons = nullptr) {
  nlohmann::json j;
  j["params"] = params_json(r.params);
  j["grid"] = grid_json(r.spec);
  j["distance"] = r.distance;
  j["distance_p"] = r.distance_p;
  j["per_time_action"] = r.per_time_action;
  j["mass_per_slice"] = r.mass_per_slice;
  j["residuals"] = {{"continuity", r.residuals.continuity},
                    {"endpoint", r.residuals.endpoint},
                    {"coupling", r.residuals.coupling},
                    {"dr_gap", r.dr_gap}};
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["wall_time_seconds"] = r.wall_time_seconds;
  j["clip"] = {{"negative_mass_l1", r.clip.negative_mass_l1},
               {"flux_on_vacuum", r.clip.flux_on_vacuum}};
  if (!oracle_comparisons.is_null()) j["oracles"] = oracle_comparisons;
  return j;
}

}  // namespace wot
