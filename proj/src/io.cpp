#include "hmcfs/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace hmcfs {

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

bool parse_int(std::string_view s, long long& out) {
  s = strip(s);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

}  // namespace

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("model", "", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("model", "", std::string("invalid JSON: ") + e.what());
  }
}

std::vector<int> read_observations(std::istream& in, int m) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<int> ys;
  while (std::getline(in, line)) {
    ++line_no;
    const auto s = strip(line);
    if (s.empty()) continue;
    if (!header) {
      if (s != "t,y") throw ValidationError("obs", "line " + std::to_string(line_no), "expected header \"t,y\"");
      header = true;
      continue;
    }
    const auto comma = s.find(',');
    long long t = 0;
    long long y = 0;
    if (comma == std::string_view::npos || !parse_int(s.substr(0, comma), t) || !parse_int(s.substr(comma + 1), y))
      throw ValidationError("obs", "line " + std::to_string(line_no), "expected \"t,y\" with integers");
    if (t != static_cast<long long>(ys.size()))
      throw ValidationError("t", "line " + std::to_string(line_no),
                            "expected t=" + std::to_string(ys.size()) + ", got " + std::to_string(t));
    if (y < 1 || y > m)
      throw ValidationError("y", "line " + std::to_string(line_no),
                            "symbol " + std::to_string(y) + " outside 1.." + std::to_string(m));
    ys.push_back(static_cast<int>(y - 1));
  }
  if (!header) throw ValidationError("obs", "", "missing header \"t,y\"");
  if (ys.empty()) throw ValidationError("obs", "", "no observations");
  return ys;
}

std::vector<int> read_observations_file(const std::string& path, int m) {
  std::ifstream in(path);
  if (!in) throw ValidationError("obs", "", "cannot open " + path);
  return read_observations(in, m);
}

json to_json(const CheckResult& c) {
  json out{{"check", c.check}};
  out["t"] = c.t >= 0 ? json(c.t) : json(nullptr);
  out["pass"] = c.pass;
  if (!c.pass) {
    out["witness"] = c.witness;
    out["lhs"] = c.lhs;
    out["rhs"] = c.rhs;
  }
  return out;
}

json to_json(const Report& r) {
  json checks = json::array();
  std::size_t failed = 0;
  for (const auto& c : r.checks) {
    checks.push_back(to_json(c));
    if (!c.pass) ++failed;
  }
  return json{{"pass", failed == 0}, {"checks_total", r.checks.size()}, {"checks_failed", failed}, {"checks", checks}};
}

}  // namespace hmcfs
