#pragma once

#include "serrin/operator_profiles.hpp"
#include "serrin/rigidity_lab.hpp"
#include "serrin/space_form.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace serrin {

/// Parse or validation failure; line is 1-based, 0 when not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& msg)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  [[nodiscard]] int line() const { return line_; }

 private:
  int line_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string unquote(const std::string& v, int line) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'')) {
    if (v.back() != v.front()) throw ConfigError(line, "unterminated string " + v);
    return v.substr(1, v.size() - 2);
  }
  return v;
}

/// Splits at separators that are outside quotes and brackets.
inline std::vector<std::string> split_top(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  char quote = 0;
  for (char ch : s) {
    if (quote) {
      if (ch == quote) quote = 0;
    } else if (ch == '"' || ch == '\'') {
      quote = ch;
    } else if (ch == '[') {
      ++depth;
    } else if (ch == ']') {
      --depth;
    } else if (ch == sep && depth == 0) {
      out.push_back(cur);
      cur.clear();
      continue;
    }
    cur.push_back(ch);
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& v, const std::string& key, int line) {
  const std::string t = unquote(trim(v), line);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(line, key + ": expected a number, got '" + t + "'");
  }
  if (used != t.size() || !std::isfinite(out)) throw ConfigError(line, key + ": expected a number, got '" + t + "'");
  return out;
}

inline int parse_int(const std::string& v, const std::string& key, int line) {
  const double d = parse_double(v, key, line);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError(line, key + ": expected an integer");
  return static_cast<int>(d);
}

inline bool parse_bool(const std::string& v, const std::string& key, int line) {
  const std::string t = unquote(trim(v), line);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(line, key + ": expected true or false, got '" + t + "'");
}

inline std::vector<std::string> parse_list(const std::string& v, int line) {
  std::string t = trim(v);
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']') throw ConfigError(line, "unterminated list " + t);
    t = t.substr(1, t.size() - 2);
  }
  t = unquote(trim(t), line);
  std::vector<std::string> out;
  if (trim(t).empty()) return out;
  for (const auto& item : split_top(t, ',')) out.push_back(unquote(trim(item), line));
  return out;
}

/// "64x64" or "64" (square).
inline std::pair<int, int> parse_grid(const std::string& v, const std::string& key, int line) {
  const std::string t = unquote(trim(v), line);
  const auto x = t.find_first_of("xX");
  if (x == std::string::npos) {
    const int n = parse_int(t, key, line);
    return {n, n};
  }
  return {parse_int(t.substr(0, x), key, line), parse_int(t.substr(x + 1), key, line)};
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Checks every field; throws ConfigError without a line.
inline void validate_config(const ExperimentConfig& cfg) {
  try {
    (void)SpaceForm::from_name(cfg.space_form);
  } catch (const std::exception& e) {
    throw ConfigError(0, std::string("space_form: ") + e.what());
  }
  try {
    (void)make_profile(cfg.profile);
  } catch (const std::exception& e) {
    throw ConfigError(0, std::string("profile: ") + e.what());
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 2.0 * std::numbers::pi)) {
    throw ConfigError(0, "alpha must lie in (0, 2 pi], got " + detail::format_number(cfg.alpha));
  }
  if (!(cfg.R0 > 0.0)) throw ConfigError(0, "R0 must be positive");
  if (cfg.epsilons.empty()) throw ConfigError(0, "epsilons must not be empty");
  for (double e : cfg.epsilons)
    if (!(e >= 0.0 && e < 1.0)) throw ConfigError(0, "epsilons must lie in [0, 1)");
  if (cfg.k < 1) throw ConfigError(0, "k must be >= 1");
  if (cfg.nr < 8 || cfg.nt < 8) throw ConfigError(0, "grid needs at least 8 cells per direction");
  if (cfg.grids.empty()) throw ConfigError(0, "grids must not be empty");
  for (std::size_t i = 0; i < cfg.grids.size(); ++i) {
    if (cfg.grids[i] < 8) throw ConfigError(0, "grids entries must be >= 8");
    if (i > 0 && cfg.grids[i] != 2 * cfg.grids[i - 1]) throw ConfigError(0, "grids must be dyadically ordered");
  }
  if (!(cfg.linear_tol > 0.0) || !(cfg.picard_tol > 0.0)) throw ConfigError(0, "tolerances must be positive");
  if (cfg.omega && !(*cfg.omega > 0.0 && *cfg.omega <= 1.0)) throw ConfigError(0, "omega must lie in (0, 1]");
  if (!(cfg.sigma_rel_tol > 0.0)) throw ConfigError(0, "sigma_rel_tol must be positive");
  if (cfg.output_dir.empty()) throw ConfigError(0, "output_dir must not be empty");
  if (SpaceForm::from_name(cfg.space_form).curvature() != 0 && !make_profile(cfg.profile).is_laplacian) {
    throw ConfigError(0, "space forms with K != 0 support the laplacian profile only");
  }
}

/// Parses a key/value document into an ExperimentConfig with defaults.
///
/// One entry per line as `key = value` or `key: value`; `#` starts a comment.
/// A document wrapped in braces may instead separate entries by commas.
/// Lists are comma separated, optionally bracketed. Unknown or repeated keys
/// are errors.
inline ExperimentConfig parse_config(const std::string& text) {
  struct Entry {
    int line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  const std::string whole = detail::trim(text);
  if (!whole.empty() && whole.front() == '{') {
    if (whole.back() != '}') throw ConfigError(1, "unterminated '{'");
    const std::string body = whole.substr(1, whole.size() - 2);
    int line = 1;
    for (const auto& raw : detail::split_top(body, ',')) {
      const std::string item = detail::trim(raw);
      if (!item.empty()) entries.push_back({line, item, ""});
      for (char ch : raw) line += ch == '\n' ? 1 : 0;
    }
  } else {
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      // strip comments outside quotes
      char quote = 0;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (quote) {
          if (raw[i] == quote) quote = 0;
        } else if (raw[i] == '"' || raw[i] == '\'') {
          quote = raw[i];
        } else if (raw[i] == '#') {
          raw.resize(i);
          break;
        }
      }
      const std::string item = detail::trim(raw);
      if (!item.empty()) entries.push_back({line, item, ""});
    }
  }
  for (auto& e : entries) {
    const auto pos = e.key.find_first_of(":=");
    if (pos == std::string::npos) throw ConfigError(e.line, "expected 'key = value', got '" + e.key + "'");
    e.value = detail::trim(e.key.substr(pos + 1));
    e.key = detail::unquote(detail::trim(e.key.substr(0, pos)), e.line);
    if (e.key.empty()) throw ConfigError(e.line, "missing key");
  }

  ExperimentConfig cfg;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.key).second) throw ConfigError(e.line, "duplicate key '" + e.key + "'");
    const std::string& k = e.key;
    const int ln = e.line;
    if (k == "space_form") {
      cfg.space_form = detail::unquote(e.value, ln);
    } else if (k == "profile") {
      cfg.profile = detail::unquote(e.value, ln);
    } else if (k == "alpha") {
      cfg.alpha = detail::parse_double(e.value, k, ln);
    } else if (k == "R0") {
      cfg.R0 = detail::parse_double(e.value, k, ln);
    } else if (k == "epsilons") {
      cfg.epsilons.clear();
      for (const auto& item : detail::parse_list(e.value, ln)) cfg.epsilons.push_back(detail::parse_double(item, k, ln));
    } else if (k == "k") {
      cfg.k = detail::parse_int(e.value, k, ln);
    } else if (k == "grid") {
      std::tie(cfg.nr, cfg.nt) = detail::parse_grid(e.value, k, ln);
    } else if (k == "grids") {
      cfg.grids.clear();
      for (const auto& item : detail::parse_list(e.value, ln)) cfg.grids.push_back(detail::parse_int(item, k, ln));
    } else if (k == "linear_tol") {
      cfg.linear_tol = detail::parse_double(e.value, k, ln);
    } else if (k == "picard_tol") {
      cfg.picard_tol = detail::parse_double(e.value, k, ln);
    } else if (k == "omega") {
      cfg.omega = detail::parse_double(e.value, k, ln);
    } else if (k == "sigma_rel_tol") {
      cfg.sigma_rel_tol = detail::parse_double(e.value, k, ln);
    } else if (k == "convexity_off") {
      cfg.convexity_off = detail::parse_bool(e.value, k, ln);
    } else if (k == "output_dir") {
      cfg.output_dir = detail::unquote(e.value, ln);
    } else {
      throw ConfigError(ln, "unknown key '" + k + "'");
    }
  }
  try {
    validate_config(cfg);
  } catch (const ConfigError& err) {
    // attach the line of the offending key when the message names it
    for (const auto& e : entries) {
      const std::string msg = err.what();
      if (msg.rfind(e.key + " ", 0) == 0 || msg.rfind(e.key + ":", 0) == 0) throw ConfigError(e.line, msg);
    }
    throw;
  }
  return cfg;
}

/// Canonical text form; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  using detail::format_number;
  auto join_d = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
    return s;
  };
  std::string grids;
  for (std::size_t i = 0; i < cfg.grids.size(); ++i) grids += (i ? ", " : "") + std::to_string(cfg.grids[i]);
  std::ostringstream out;
  out << "space_form = \"" << cfg.space_form << "\"\n"
      << "profile = \"" << cfg.profile << "\"\n"
      << "alpha = " << format_number(cfg.alpha) << "\n"
      << "R0 = " << format_number(cfg.R0) << "\n"
      << "epsilons = [" << join_d(cfg.epsilons) << "]\n"
      << "k = " << cfg.k << "\n"
      << "grid = \"" << cfg.nr << "x" << cfg.nt << "\"\n"
      << "grids = [" << grids << "]\n"
      << "linear_tol = " << format_number(cfg.linear_tol) << "\n"
      << "picard_tol = " << format_number(cfg.picard_tol) << "\n";
  if (cfg.omega) out << "omega = " << format_number(*cfg.omega) << "\n";
  out << "sigma_rel_tol = " << format_number(cfg.sigma_rel_tol) << "\n"
      << "convexity_off = " << (cfg.convexity_off ? "true" : "false") << "\n"
      << "output_dir = \"" << cfg.output_dir << "\"\n";
  return out.str();
}

}  // namespace serrin
