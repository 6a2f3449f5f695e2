#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace serrin {

using ScalarMap = std::function<double(double)>;

/// Convex scalar profile f generating the operator
/// L_f u = div(f'(|grad u|) grad u / |grad u|).
///
/// All derivatives are supplied in closed form. g' is the inverse of f' and
/// is the derivative of the Fenchel conjugate g; g'' = 1 / f''(g'). The
/// conjugate g itself is never stored: g(f'(t)) = t f'(t) - f(t).
struct OperatorProfile {
  std::string name;
  ScalarMap f;
  ScalarMap f_prime;
  ScalarMap f_second;
  ScalarMap g_prime;
  ScalarMap g_second;
  /// Supremum of the range of f' (the open upper end of dom g').
  double g_domain_sup = std::numeric_limits<double>::infinity();
  /// p for power profiles.
  std::optional<double> degeneracy_exponent;
  bool is_laplacian = false;

  /// t f'(t) - f(t), the conjugate evaluated at f'(t).
  [[nodiscard]] double conjugate_at_slope(double t) const {
    return t * f_prime(t) - f(t);
  }
};

/// f(t) = t^p / p.
inline OperatorProfile make_power_profile(double p) {
  if (!(p > 1.0)) {
    throw std::invalid_argument("power profile requires p > 1 (superlinear growth), got p = " +
                                std::to_string(p));
  }
  OperatorProfile prof;
  prof.degeneracy_exponent = p;
  if (p == 2.0) {
    prof.name = "laplacian";
    prof.is_laplacian = true;
    prof.f = [](double t) { return 0.5 * t * t; };
    prof.f_prime = [](double t) { return t; };
    prof.f_second = [](double) { return 1.0; };
    prof.g_prime = [](double s) {
      if (s < 0.0) throw std::domain_error("g' evaluated at negative argument");
      return s;
    };
    prof.g_second = [](double) { return 1.0; };
    return prof;
  }
  const double q = 1.0 / (p - 1.0);
  prof.name = "p-laplacian:" + [&] {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", p);
    return std::string(buf);
  }();
  prof.f = [p](double t) { return std::pow(t, p) / p; };
  prof.f_prime = [p](double t) { return std::pow(t, p - 1.0); };
  prof.f_second = [p](double t) { return (p - 1.0) * std::pow(t, p - 2.0); };
  prof.g_prime = [q](double s) {
    if (s < 0.0) throw std::domain_error("g' evaluated at negative argument");
    return std::pow(s, q);
  };
  prof.g_second = [q](double s) { return q * std::pow(s, q - 1.0); };
  return prof;
}

/// f(t) = sqrt(1 + t^2) - 1. Bounded slope: f' < 1, so g' lives on [0, 1).
inline OperatorProfile make_mean_curvature_profile() {
  OperatorProfile prof;
  prof.name = "mean-curvature";
  prof.f = [](double t) {
    // sqrt(1+t^2) - 1 without cancellation near 0
    return t * t / (std::sqrt(1.0 + t * t) + 1.0);
  };
  prof.f_prime = [](double t) { return t / std::sqrt(1.0 + t * t); };
  prof.f_second = [](double t) { return std::pow(1.0 + t * t, -1.5); };
  prof.g_prime = [](double s) {
    if (s < 0.0 || s >= 1.0) {
      throw std::domain_error("mean-curvature g' is defined on [0, 1) only");
    }
    return s / std::sqrt((1.0 - s) * (1.0 + s));
  };
  prof.g_second = [](double s) {
    if (s < 0.0 || s >= 1.0) {
      throw std::domain_error("mean-curvature g'' is defined on [0, 1) only");
    }
    return std::pow((1.0 - s) * (1.0 + s), -1.5);
  };
  prof.g_domain_sup = 1.0;
  return prof;
}

inline OperatorProfile make_laplacian_profile() { return make_power_profile(2.0); }

// Programmatic registration hook. Factories receive the text after "name:".
using ProfileFactory = std::function<OperatorProfile(const std::string& argument)>;

namespace detail {
inline std::map<std::string, ProfileFactory>& profile_registry() {
  static std::map<std::string, ProfileFactory> registry;
  return registry;
}
inline std::mutex& profile_registry_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline void register_profile(const std::string& name, ProfileFactory factory) {
  std::lock_guard lock(detail::profile_registry_mutex());
  detail::profile_registry()[name] = std::move(factory);
}

/// Resolves "laplacian", "p-laplacian:<p>", "mean-curvature" or a registered name.
inline OperatorProfile make_profile(const std::string& id) {
  const auto colon = id.find(':');
  const std::string head = id.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string{} : id.substr(colon + 1);
  if (head == "laplacian" && arg.empty()) return make_laplacian_profile();
  if (head == "mean-curvature" && arg.empty()) return make_mean_curvature_profile();
  if (head == "p-laplacian") {
    if (arg.empty()) throw std::invalid_argument("profile 'p-laplacian' needs an exponent, e.g. p-laplacian:3");
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != arg.size()) throw std::invalid_argument("bad p-laplacian exponent '" + arg + "'");
    return make_power_profile(p);
  }
  {
    std::lock_guard lock(detail::profile_registry_mutex());
    const auto& reg = detail::profile_registry();
    if (auto it = reg.find(head); it != reg.end()) return it->second(arg);
  }
  throw std::invalid_argument("unknown operator profile '" + id + "'");
}

/// f_eps(t) = f(sqrt(eps^2 + t^2)) - f(eps). Removes the degeneracy of L_f at
/// critical points: the frozen coefficient f_eps'(t)/t is continuous at 0.
class RegularizedProfile {
 public:
  RegularizedProfile(OperatorProfile base, double epsilon) : base_(std::move(base)), eps_(epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("regularization requires epsilon > 0");
  }

  [[nodiscard]] const OperatorProfile& base() const { return base_; }
  [[nodiscard]] double epsilon() const { return eps_; }

  [[nodiscard]] double f_eps(double t) const {
    return base_.f(std::sqrt(eps_ * eps_ + t * t)) - base_.f(eps_);
  }
  [[nodiscard]] double f_eps_prime(double t) const {
    const double rho = std::sqrt(eps_ * eps_ + t * t);
    return base_.f_prime(rho) * t / rho;
  }
  /// f_eps'(t)/t, equal to f'(eps)/eps at t = 0.
  [[nodiscard]] double coefficient(double t) const {
    const double rho = std::sqrt(eps_ * eps_ + t * t);
    return base_.f_prime(rho) / rho;
  }

 private:
  OperatorProfile base_;
  double eps_;
};

inline RegularizedProfile regularize(const OperatorProfile& profile, double epsilon) {
  return RegularizedProfile(profile, epsilon);
}

struct AdmissibilityClause {
  std::string name;
  double worst = 0.0;  // worst observed violation (0 when satisfied)
  bool pass = true;
  std::string note;
};

struct AdmissibilityReport {
  std::string profile;
  std::vector<AdmissibilityClause> clauses;

  [[nodiscard]] bool all_pass() const {
    return std::all_of(clauses.begin(), clauses.end(), [](const auto& c) { return c.pass; });
  }
  [[nodiscard]] const AdmissibilityClause& clause(const std::string& name) const {
    for (const auto& c : clauses) {
      if (c.name == name) return c;
    }
    throw std::out_of_range("no admissibility clause '" + name + "'");
  }
};

/// Evaluates the structural hypotheses on a logarithmic grid over [1e-6, 1e3].
/// Failures are reported, never thrown.
inline AdmissibilityReport check_admissibility(const OperatorProfile& prof, int sample_count) {
  if (sample_count < 8) throw std::invalid_argument("check_admissibility needs sample_count >= 8");
  constexpr double s_min = 1e-6;
  constexpr double s_max = 1e3;
  std::vector<double> s(static_cast<std::size_t>(sample_count));
  for (int i = 0; i < sample_count; ++i) {
    const double a = static_cast<double>(i) / (sample_count - 1);
    s[static_cast<std::size_t>(i)] = s_min * std::pow(s_max / s_min, a);
  }

  AdmissibilityReport rep;
  rep.profile = prof.name;

  constexpr double zero_tol = 1e-14;
  AdmissibilityClause zero{"zero_at_origin"};
  zero.worst = std::max(std::abs(prof.f(0.0)), std::abs(prof.f_prime(0.0)));
  zero.pass = zero.worst <= zero_tol;
  rep.clauses.push_back(zero);

  AdmissibilityClause convex{"strict_convexity"};
  for (double x : s) {
    const double fpp = prof.f_second(x);
    if (!(fpp > 0.0)) {
      convex.pass = false;
      convex.worst = std::max(convex.worst, std::isfinite(fpp) ? -fpp : 1.0);
    }
  }
  rep.clauses.push_back(convex);

  AdmissibilityClause inverse{"inverse_round_trip"};
  for (double x : s) {
    const double rel = std::abs(prof.g_prime(prof.f_prime(x)) - x) / x;
    inverse.worst = std::max(inverse.worst, rel);
  }
  inverse.pass = inverse.worst <= 1e-10;
  rep.clauses.push_back(inverse);

  // f(s)/s must increase, and keep growing over the last sampled decade.
  AdmissibilityClause superlinear{"superlinearity"};
  double prev = prof.f(s.front()) / s.front();
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double r = prof.f(s[i]) / s[i];
    if (r < prev) superlinear.worst = std::max(superlinear.worst, prev - r);
    prev = r;
  }
  const double last = prof.f(s_max) / s_max;
  const double decade = prof.f(s_max / 10.0) / (s_max / 10.0);
  const double growth = last / decade;
  constexpr double min_growth = 1.01;
  superlinear.pass = superlinear.worst == 0.0 && growth >= min_growth;
  if (growth < min_growth) {
    superlinear.worst = std::max(superlinear.worst, min_growth - growth);
    superlinear.note = "f(s)/s saturates (last-decade growth factor " + std::to_string(growth) +
                       "); rigidity hypotheses exclude this profile, oracles remain usable for bounded slopes";
  }
  rep.clauses.push_back(superlinear);
  return rep;
}

}  // namespace serrin
