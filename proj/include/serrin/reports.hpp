#pragma once

#include "serrin/config.hpp"
#include "serrin/identity_auditor.hpp"
#include "serrin/mixed_bvp_solver.hpp"
#include "serrin/pfunction_auditor.hpp"
#include "serrin/rigidity_lab.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace serrin {

inline constexpr const char* tool_version = "1.0.0";

using Json = nlohmann::json;  // std::map-backed: keys serialize sorted

/// 17 significant digits; non-finite values spelled nan / inf / -inf.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// JSON number, or null when not finite.
inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json json_optional(const std::optional<double>& v) { return v ? json_number(*v) : Json(nullptr); }

/// Pretty JSON text with a trailing newline.
inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- JSON views ----------------------------------------------------------------

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["space_form"] = c.space_form;
  j["profile"] = c.profile;
  j["alpha"] = c.alpha;
  j["R0"] = c.R0;
  j["epsilons"] = c.epsilons;
  j["k"] = c.k;
  j["grid"] = std::to_string(c.nr) + "x" + std::to_string(c.nt);
  j["grids"] = c.grids;
  j["linear_tol"] = c.linear_tol;
  j["picard_tol"] = c.picard_tol;
  j["omega"] = json_optional(c.omega);
  j["sigma_rel_tol"] = c.sigma_rel_tol;
  j["convexity_off"] = c.convexity_off;
  j["output_dir"] = c.output_dir;
  return j;
}

inline Json to_json(const SolveReport& r) {
  Json j;
  j["iterations"] = r.iterations;
  j["final_residual"] = json_number(r.final_residual);
  j["epsilon_schedule"] = r.epsilon_schedule;
  j["stage_iterations"] = r.stage_iterations;
  j["omega"] = r.omega;
  j["converged"] = r.converged;
  j["message"] = r.message;
  return j;
}

inline Json to_json(const AuditEntry& e) {
  Json values = Json::object();
  for (const auto& [k, v] : e.values) values[k] = json_number(v);
  return Json{{"name", e.name},       {"values", values}, {"tolerance", json_number(e.tolerance)},
              {"pass", e.pass},       {"informational", e.informational}, {"note", e.note}};
}

inline Json to_json(const AuditReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) entries.push_back(to_json(e));
  return Json{{"entries", entries},
              {"all_pass", r.all_pass()},
              {"masked_cells", r.masked_cells},
              {"total_cells", r.total_cells}};
}

inline Json to_json(const PFieldReport& r) {
  return Json{{"c", json_number(r.c)},
              {"c_squared", json_number(r.c_squared)},
              {"c_spread", json_number(r.c_spread)},
              {"max_P", json_number(r.max_P)},
              {"max_abs_P_minus_c2", json_number(r.max_abs_P_minus_c2)},
              {"laplacian_P",
               {{"min", json_number(r.laplacian.min_laplacian)},
                {"violation_fraction", json_number(r.laplacian.violation_fraction)},
                {"tolerance", json_number(r.laplacian.tolerance)},
                {"cells", r.laplacian.cells}}},
              {"max_principle",
               {{"max_P", json_number(r.max_principle.max_P)},
                {"c_squared", json_number(r.max_principle.c_squared)},
                {"max_gamma0_P", json_number(r.max_principle.max_gamma0_P)},
                {"max_wall_dnu_P", json_number(r.max_principle.max_wall_dnu_P)},
                {"below_fraction", json_number(r.max_principle.below_fraction)},
                {"tolerance", json_number(r.max_principle.tolerance)}}},
              {"step3",
               {{"lhs", json_number(r.step3.lhs)},
                {"rhs", json_number(r.step3.rhs)},
                {"residual", json_number(r.step3.residual)},
                {"relative", json_number(r.step3.relative)}}},
              {"hessian_defect", json_number(r.hessian_defect)},
              {"verdicts", to_json(r.verdicts)}};
}

inline Json to_json(const RigidityReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"epsilon", row.epsilon},
                        {"sigma", json_number(row.sigma)},
                        {"sigma_max", json_number(row.sigma_max)},
                        {"c_mean", json_number(row.c_mean)},
                        {"c_formula", json_number(row.c_formula)},
                        {"defect", json_number(row.defect)},
                        {"converged", row.converged},
                        {"iterations", row.iterations},
                        {"residual", json_number(row.residual)},
                        {"audit_pass_rate", json_number(row.audit_pass_rate)},
                        {"pass", row.pass},
                        {"message", row.message},
                        {"audits", to_json(row.audits)}});
  }
  return Json{{"config", to_json(r.config)},
              {"grid_hash", r.grid_hash},
              {"rows", rows},
              {"sigma_increasing", r.sigma_increasing},
              {"symmetric_case_small", r.symmetric_case_small}};
}

inline Json to_json(const ContrastReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"epsilon", row.epsilon},
                        {"converged", row.converged},
                        {"inequality_gap", json_optional(row.inequality_gap)},
                        {"inequality_scale", json_optional(row.inequality_scale)},
                        {"max_wall_dnu_P", json_optional(row.max_wall_dnu_P)},
                        {"equality_audits_pass", row.equality_audits_pass},
                        {"audits", to_json(row.audits)}});
  }
  return Json{{"config", to_json(r.config)}, {"convex", r.convex}, {"rows", rows}};
}

inline Json to_json(const ConvergenceReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"n", row.n},
                        {"h", row.h},
                        {"linf", json_number(row.linf)},
                        {"l2", json_number(row.l2)},
                        {"order_linf", json_optional(row.order_linf)},
                        {"order_l2", json_optional(row.order_l2)},
                        {"c_error", json_number(row.c_error)},
                        {"residual", json_number(row.residual)},
                        {"iterations", row.iterations},
                        {"converged", row.converged}});
  }
  return Json{{"config", to_json(r.config)}, {"rows", rows}, {"errors_decreasing", r.errors_decreasing}};
}

// --- CSV views -------------------------------------------------------------------

inline std::string rigidity_csv(const RigidityReport& r) {
  std::string out = "epsilon,sigma,c_mean,c_formula,defect,pass\n";
  for (const auto& row : r.rows) {
    out += csv_number(row.epsilon) + "," + csv_number(row.sigma) + "," + csv_number(row.c_mean) + "," +
           csv_number(row.c_formula) + "," + csv_number(row.defect) + "," + (row.pass ? "1" : "0") + "\n";
  }
  return out;
}

inline std::string convergence_csv(const ConvergenceReport& r) {
  std::string out = "n,h,linf,l2,order_linf,order_l2,c_error,residual,iterations,converged\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); };
  for (const auto& row : r.rows) {
    out += std::to_string(row.n) + "," + csv_number(row.h) + "," + csv_number(row.linf) + "," + csv_number(row.l2) +
           "," + opt(row.order_linf) + "," + opt(row.order_l2) + "," + csv_number(row.c_error) + "," +
           csv_number(row.residual) + "," + std::to_string(row.iterations) + "," + (row.converged ? "1" : "0") + "\n";
  }
  return out;
}

inline std::string contrast_csv(const ContrastReport& r) {
  std::string out = "epsilon,inequality_gap,inequality_scale,max_wall_dnu_P,equality_audits_pass\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); };
  for (const auto& row : r.rows) {
    out += csv_number(row.epsilon) + "," + opt(row.inequality_gap) + "," + opt(row.inequality_scale) + "," +
           opt(row.max_wall_dnu_P) + "," + (row.equality_audits_pass ? "1" : "0") + "\n";
  }
  return out;
}

/// One line per recorded value of every check.
inline std::string audit_csv(const AuditReport& r) {
  std::string out = "check,key,value,tolerance,pass,informational\n";
  for (const auto& e : r.entries) {
    for (const auto& [k, v] : e.values) {
      out += e.name + "," + k + "," + csv_number(v) + "," + csv_number(e.tolerance) + "," + (e.pass ? "1" : "0") +
             "," + (e.informational ? "1" : "0") + "\n";
    }
  }
  return out;
}

/// Cell-ordered field dump: r, theta, u.
inline std::string solution_csv(const ScalarField& u) {
  const SectorGrid& g = *u.grid;
  std::string out = "r,theta,u\n";
  for (int c = 0; c < g.cell_count(); ++c) {
    out += csv_number(g.r(c)) + "," + csv_number(g.cell_theta(c)) + "," + csv_number(u[c]) + "\n";
  }
  return out;
}

/// Reads a solution CSV written for the same grid; the (r, theta) columns must
/// match the grid's cell centres.
inline ScalarField read_solution_csv(const GridPtr& grid, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "r,theta,u") {
    throw std::runtime_error("solution CSV must start with the header r,theta,u");
  }
  std::vector<double> values;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split_top(line, ',');
    if (cols.size() != 3) throw std::runtime_error("solution CSV line " + std::to_string(lineno) + ": expected 3 columns");
    double r = 0, th = 0, u = 0;
    try {
      r = std::stod(cols[0]);
      th = std::stod(cols[1]);
      u = std::stod(cols[2]);
    } catch (const std::exception&) {
      throw std::runtime_error("solution CSV line " + std::to_string(lineno) + ": not a number");
    }
    const int c = static_cast<int>(values.size());
    if (c >= grid->cell_count()) throw std::runtime_error("solution CSV has more rows than the grid has cells");
    const double scale = 1.0 + std::abs(grid->r(c));
    if (std::abs(r - grid->r(c)) > 1e-12 * scale || std::abs(th - grid->cell_theta(c)) > 1e-12 * (1.0 + std::abs(th))) {
      throw std::runtime_error("solution CSV line " + std::to_string(lineno) + " does not match the grid's cell centre");
    }
    values.push_back(u);
  }
  if (static_cast<int>(values.size()) != grid->cell_count()) {
    throw std::runtime_error("solution CSV has " + std::to_string(values.size()) + " rows, grid has " +
                             std::to_string(grid->cell_count()) + " cells");
  }
  return ScalarField(grid, std::move(values));
}

// --- run manifest ------------------------------------------------------------------

struct RunManifest {
  std::string subcommand;
  Json config;  // resolved configuration or flags
  std::string grid_hash;
  std::vector<std::string> outputs;
  std::optional<double> seconds;  // only when timing is requested

  [[nodiscard]] Json to_json() const {
    Json j{{"subcommand", subcommand},
           {"config", config},
           {"tool_version", tool_version},
           {"grid_hash", grid_hash},
           {"outputs", outputs}};
    j["timing_seconds"] = seconds ? Json(*seconds) : Json(nullptr);
    return j;
  }
};

}  // namespace serrin
