// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "newton.hpp"

namespace nematic {

// One table line in the layout of the published result tables.  Absent
// quantities (no analytic solution, diverged run) are NaN and serialize to
// empty CSV fields; diverged rows carry no numeric result columns at all.
struct ReportRow {
  std::string method;
  double zeta = std::numeric_limits<double>::quiet_NaN();
  double energy = std::numeric_limits<double>::quiet_NaN();
  double l2_error = std::numeric_limits<double>::quiet_NaN();
  double min_dev = std::numeric_limits<double>::quiet_NaN();
  double max_dev = std::numeric_limits<double>::quiet_NaN();
  double wu = std::numeric_limits<double>::quiet_NaN();
  double time_s = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

inline constexpr const char* kReportHeader =
    "method,zeta,energy,l2_error,min_dev,max_dev,wu,time_s,converged";

namespace detail {

inline bool same_value(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

}  // namespace detail

inline bool operator==(const ReportRow& a, const ReportRow& b) {
  return a.method == b.method && detail::same_value(a.zeta, b.zeta) &&
         detail::same_value(a.energy, b.energy) &&
         detail::same_value(a.l2_error, b.l2_error) &&
         detail::same_value(a.min_dev, b.min_dev) &&
         detail::same_value(a.max_dev, b.max_dev) &&
         detail::same_value(a.wu, b.wu) &&
         detail::same_value(a.time_s, b.time_s) && a.converged == b.converged;
}

inline bool operator!=(const ReportRow& a, const ReportRow& b) {
  return !(a == b);
}

// 6 significant digits, '.' decimal point; NaN prints as an empty field.
inline std::string format_number(double v) {
  if (std::isnan(v)) return {};
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string serialize_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << kReportHeader << '\n';
  for (const ReportRow& r : rows) {
    os << r.method << ',' << format_number(r.zeta) << ','
       << format_number(r.energy) << ',' << format_number(r.l2_error) << ','
       << format_number(r.min_dev) << ',' << format_number(r.max_dev) << ','
       << format_number(r.wu) << ',' << format_number(r.time_s) << ','
       << (r.converged ? '1' : '0') << '\n';
  }
  return os.str();
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line,
                                             char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_field(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw std::invalid_argument("malformed numeric field '" + s + "'");
  return v;
}

}  // namespace detail

inline std::vector<ReportRow> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kReportHeader)
    throw std::invalid_argument("missing or unexpected header row");
  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_fields(line, ',');
    if (f.size() != 9)
      throw std::invalid_argument("row does not have 9 fields: " + line);
    ReportRow r;
    r.method = f[0];
    r.zeta = detail::parse_field(f[1]);
    r.energy = detail::parse_field(f[2]);
    r.l2_error = detail::parse_field(f[3]);
    r.min_dev = detail::parse_field(f[4]);
    r.max_dev = detail::parse_field(f[5]);
    r.wu = detail::parse_field(f[6]);
    r.time_s = detail::parse_field(f[7]);
    if (f[8] != "0" && f[8] != "1")
      throw std::invalid_argument("converged flag must be 0 or 1");
    r.converged = f[8] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

// JSON pieces for the hierarchical report; NaN maps to null.
namespace detail {

inline nlohmann::json num_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace detail

inline nlohmann::json to_json(const ReportRow& r) {
  return {{"method", r.method},
          {"zeta", detail::num_or_null(r.zeta)},
          {"energy", detail::num_or_null(r.energy)},
          {"l2_error", detail::num_or_null(r.l2_error)},
          {"min_dev", detail::num_or_null(r.min_dev)},
          {"max_dev", detail::num_or_null(r.max_dev)},
          {"wu", detail::num_or_null(r.wu)},
          {"time_s", detail::num_or_null(r.time_s)},
          {"converged", r.converged}};
}

inline nlohmann::json to_json(const LevelReport& lr) {
  return {{"level", lr.level},
          {"cells_x", lr.cells_x},
          {"iterations", lr.iterations},
          {"accepted", lr.accepted},
          {"rejected", lr.rejected},
          {"nnz", lr.nnz},
          {"energy", detail::num_or_null(lr.energy)},
          {"objective", detail::num_or_null(lr.objective)},
          {"residual", detail::num_or_null(lr.residual)},
          {"min_dev", detail::num_or_null(lr.deviation.min_dev)},
          {"max_dev", detail::num_or_null(lr.deviation.max_dev)},
          {"status", static_cast<int>(lr.status)},
          {"mg_cycles", lr.mg_cycles},
          {"seconds", lr.seconds}};
}

}  // namespace nematic
