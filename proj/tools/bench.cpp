// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nematic/runner.hpp>

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::istringstream is(csv);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (item.empty()) continue;
    size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size())
      throw std::invalid_argument("bad value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<nematic::ReportRow> rows_of(
    const std::vector<nematic::RunRecord>& recs) {
  std::vector<nematic::ReportRow> rows;
  rows.reserve(recs.size());
  for (const auto& rec : recs) rows.push_back(rec.row);
  return rows;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "'");
  os << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equilibrium director fields: benchmark driver"};
  app.require_subcommand(1);

  nematic::RunConfig cfg;
  std::string method = "lagrangian";
  std::string stepping = "tr-simple";
  std::string out_path;
  std::string values_csv;
  int table = 0;

  CLI::Option* method_opt = nullptr;
  CLI::Option* values_opt = nullptr;
  CLI::Option* problem_opt = nullptr;
  CLI::Option* levels_opt = nullptr;

  auto add_common = [&](CLI::App* sub) {
    problem_opt =
        sub->add_option("--problem", cfg.problem, "twist | tilt-twist | nano | flexo");
    method_opt =
        sub->add_option("--method", method, "lagrangian | penalty | penalty-renorm");
    sub->add_option("--stepping", stepping, "damped | tr-simple | tr-2d");
    sub->add_option("--zeta", cfg.zeta, "penalty weight");
    levels_opt =
        sub->add_option("--levels", cfg.levels, "grids in the continuation ladder");
    sub->add_option("--coarse-n", cfg.coarse_n, "cells per side on the first grid");
    sub->add_option("--solver", cfg.solver, "auto | direct | mg");
    sub->add_option("--gamma-b", cfg.gamma_b, "coupled-relaxation weight");
    sub->add_option("--tol", cfg.tolerance, "nonlinear stopping tolerance");
    sub->add_option("--out", out_path, "write the JSON report here");
    sub->add_option("--perturb", cfg.perturb, "initial-guess perturbation size");
  };

  CLI::App* run = app.add_subcommand("run", "one solve, one table row");
  add_common(run);

  CLI::App* sweep_z = app.add_subcommand("sweep-zeta", "one row per penalty weight");
  add_common(sweep_z);
  auto* z_method = method_opt;
  values_opt = sweep_z->add_option("--values", values_csv,
                                   "comma-separated weights (default 1e1..1e5)");
  auto* z_values = values_opt;

  CLI::App* sweep_g =
      app.add_subcommand("sweep-gamma", "average cycle count per relaxation weight");
  add_common(sweep_g);
  auto* g_problem = problem_opt;
  auto* g_levels = levels_opt;
  auto* g_values = sweep_g->add_option(
      "--values", values_csv, "comma-separated weights (default 1.10..2.00)");

  CLI::App* rep = app.add_subcommand("reproduce", "canned experiment tables");
  add_common(rep);
  rep->add_option("--table", table, "table number, 3..10")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.method = nematic::parse_method(method);
    cfg.stepping = nematic::parse_stepping(stepping);

    if (run->parsed()) {
      const nematic::RunRecord rec = nematic::execute_run_guarded(cfg);
      std::cout << nematic::serialize_csv({rec.row});
      if (!out_path.empty()) write_json(out_path, nematic::json_report({rec}));
      return nematic::exit_code_for({rec.row});
    }

    if (sweep_z->parsed()) {
      if (z_method->count() == 0) cfg.method = nematic::Method::Penalty;
      std::vector<double> values{1e1, 1e2, 1e3, 1e4, 1e5};
      if (z_values->count() > 0) values = parse_values(values_csv);
      const auto recs = nematic::sweep_zeta(cfg, values);
      const auto rows = rows_of(recs);
      std::cout << nematic::serialize_csv(rows);
      if (!out_path.empty()) write_json(out_path, nematic::json_report(recs));
      return nematic::exit_code_for(rows);
    }

    if (sweep_g->parsed()) {
      if (g_problem->count() == 0) cfg.problem = "flexo";
      if (g_levels->count() == 0) cfg.levels = 4;  // 64 cells per side
      std::vector<double> values;
      if (g_values->count() > 0) {
        values = parse_values(values_csv);
      } else {
        for (int i = 0; i <= 18; ++i) values.push_back(1.10 + 0.05 * i);
      }
      const auto rows = nematic::sweep_gamma(cfg, values);
      std::cout << nematic::serialize_gamma_csv(rows);
      if (!out_path.empty()) {
        nlohmann::json jrows = nlohmann::json::array();
        for (const auto& r : rows)
          jrows.push_back({{"gamma_b", r.gamma_b},
                           {"avg_cycles", nematic::detail::num_or_null(r.avg_cycles)},
                           {"converged", r.converged}});
        write_json(out_path, {{"gamma", jrows}});
      }
      for (const auto& r : rows)
        if (!r.converged) return 2;
      return 0;
    }

    // reproduce
    const auto recs = nematic::reproduce_table(table, cfg);
    const auto rows = rows_of(recs);
    std::cout << nematic::serialize_csv(rows);
    if (!out_path.empty()) write_json(out_path, nematic::json_report(recs));
    return nematic::exit_code_for(rows);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
