#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commrate/commrate.hpp"

namespace commrate::cli {

enum ExitCode { kOk = 0, kUsage = 2, kNoProfit = 3, kNoConvergence = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::optional<double> alpha, beta, E, Z;
  double rho = 5.0;
  double loss = 1.0;
  double theta = 0.0;
  double r = 0.0;
  SolverConfig solver;
  int ez_grid = 64;
  int theta_grid = 512;
  double threshold = -1e-9;
  std::vector<double> rhos;
  std::string out;
  std::string format = "csv";
  std::string svg;
  std::string config;
  int jobs = default_jobs();
};

// 12 significant digits, so csv and json carry the same numbers.
inline double rounded(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

inline nlohmann::ordered_json to_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return rounded(*v);
}

// Ordered name/value record printed as one csv row or one json object.
struct Record {
  std::vector<std::pair<std::string, std::string>> text;
  std::vector<std::pair<std::string, bool>> flags;
  std::vector<std::pair<std::string, std::optional<double>>> numbers;
};

inline void emit(std::ostream& os, const std::vector<Record>& recs, const std::string& format) {
  if (format == "json") {
    auto object = [](const Record& rec) {
      nlohmann::ordered_json obj;
      for (const auto& [k, v] : rec.text) obj[k] = v;
      for (const auto& [k, v] : rec.flags) obj[k] = v;
      for (const auto& [k, v] : rec.numbers) obj[k] = to_json(v);
      return obj;
    };
    if (recs.size() == 1) {
      os << object(recs[0]).dump(2) << '\n';
    } else {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& rec : recs) arr.push_back(object(rec));
      os << arr.dump(2) << '\n';
    }
    return;
  }
  if (recs.empty()) return;
  bool first = true;
  for (const auto& [k, v] : recs[0].text) os << (first ? "" : ",") << k, first = false;
  for (const auto& [k, v] : recs[0].flags) os << (first ? "" : ",") << k, first = false;
  for (const auto& [k, v] : recs[0].numbers) os << (first ? "" : ",") << k, first = false;
  os << '\n';
  for (const auto& rec : recs) {
    first = true;
    for (const auto& [k, v] : rec.text) os << (first ? "" : ",") << v, first = false;
    for (const auto& [k, v] : rec.flags) os << (first ? "" : ",") << (v ? "true" : "false"), first = false;
    for (const auto& [k, v] : rec.numbers) {
      os << (first ? "" : ",") << (v && std::isfinite(*v) ? format_number(*v) : std::string());
      first = false;
    }
    os << '\n';
  }
}

inline Record record_of(const SweepRow& row) {
  Record rec;
  rec.text = {{"regime", row.regime}};
  rec.flags = {{"profitable", row.profitable}};
  rec.numbers = {{"rho", row.rho}, {"E", row.E}, {"Z", row.Z}, {"loss", row.loss}};
  for (const auto& c : kSweepColumns) rec.numbers.emplace_back(c.name, row.*c.field);
  return rec;
}

inline Record record_of(const OptimumReport& rep) {
  Record rec;
  rec.text = {{"regime", std::string(to_string(rep.regime))}};
  rec.flags = {{"profitable", rep.profitable}, {"multimodal", rep.multimodal}};
  rec.numbers = {{"theta_star", rep.theta_star}, {"r_star", rep.r_star},     {"premium", rep.premium},
                 {"take_up", rep.take_up},       {"profit", rep.profit},     {"surplus", rep.surplus},
                 {"welfare", rep.welfare},       {"elasticity", rep.elasticity}, {"MC", rep.marginal_cost},
                 {"cond_mean", rep.cond_mean},   {"cond_sd", rep.cond_sd}};
  for (const char* k : {"lerner", "lerner_rel", "foc_a", "foc_a_rel", "foc_b", "foc_b_rel", "foc_r"}) {
    const auto it = rep.residuals.find(k);
    rec.numbers.emplace_back(k, it == rep.residuals.end() ? std::optional<double>{} : it->second);
  }
  return rec;
}

inline std::optional<double> maybe(auto&& f) {
  try {
    const double v = f();
    return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

inline Record eval_record(const MarketModel& mm, double theta, double r) {
  const auto& m = mm.measure();
  Record rec;
  rec.numbers = {
      {"theta", theta},
      {"r", r},
      {"premium", wtp(mm.prim(), theta, r)},
      {"take_up", survival(m, theta)},
      {"profit", profit(mm, theta, r)},
      {"surplus", surplus(mm, theta, r)},
      {"welfare", welfare(mm, theta, r)},
      {"elasticity", maybe([&] { return elasticity(mm, theta, r); })},
      {"MC", marginal_cost(theta, r)},
      {"avg_damage", avg_damage(m, theta)},
      {"lerner", maybe([&] { return lerner_residual(mm, theta, r); })},
      {"foc_a", maybe([&] { return foc_residual_a(mm, theta, r); })},
      {"foc_b", maybe([&] { return foc_residual_b(mm, theta, r); })},
      {"foc_r", maybe([&] { return foc_residual_r(mm, theta, r); })},
  };
  return rec;
}

inline TypeMeasure measure_from(const Options& o, bool benchmark_default) {
  const bool ab = o.alpha || o.beta;
  const bool ez = o.E || o.Z;
  if (ab && ez) throw UsageError("give either --alpha/--beta or --E/--Z, not both");
  if (ab) {
    if (!(o.alpha && o.beta)) throw UsageError("--alpha and --beta must be given together");
    return TypeMeasure(BetaParams(*o.alpha, *o.beta));
  }
  if (ez) {
    if (!(o.E && o.Z)) throw UsageError("--E and --Z must be given together");
    return TypeMeasure::from_ez(EZPoint(*o.E, *o.Z));
  }
  if (!benchmark_default) throw UsageError("a measure is required: --alpha/--beta or --E/--Z");
  const Benchmark b;
  return TypeMeasure::from_ez(EZPoint(b.E, b.Z));
}

// Opens --out or falls back to `fallback`.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw UsageError("cannot open output file: " + path);
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

inline void write_svg_file(const std::string& path, auto&& writer) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open svg file: " + path);
  writer(f);
}

inline std::vector<std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file: " + path);
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Single-contract monopoly insurance: evaluation, optimal contracts and experiments", "commrate"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto add_measure = [&](CLI::App* sub) {
    auto* a = sub->add_option("--alpha", o.alpha, "Beta shape alpha");
    auto* b = sub->add_option("--beta", o.beta, "Beta shape beta");
    auto* e = sub->add_option("--E", o.E, "EZ-square mean coordinate");
    auto* z = sub->add_option("--Z", o.Z, "EZ-square slope coordinate");
    a->excludes(e)->excludes(z);
    b->excludes(e)->excludes(z);
  };
  auto add_market = [&](CLI::App* sub) {
    sub->add_option("--rho", o.rho, "relative risk aversion")->capture_default_str();
    sub->add_option("--loss", o.loss, "nondimensional loss l in (0, 1]")->capture_default_str();
  };
  auto add_solver = [&](CLI::App* sub, const char* grid_flag) {
    sub->add_option("--theta-tol", o.solver.theta_tol, "theta tolerance")->capture_default_str();
    sub->add_option(grid_flag, o.solver.coarse_grid, "coarse grid points per axis")->capture_default_str();
    sub->add_option("--multistart", o.solver.multistart_points, "multistart seeds")->capture_default_str();
  };
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "output file (default stdout)");
    sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    sub->add_option("--config", o.config, "key=value file; command-line flags win");
  };

  auto* eval = app.add_subcommand("eval", "evaluate one contract (theta, r)");
  add_measure(eval);
  add_market(eval);
  eval->add_option("--theta", o.theta, "segmentation theta in [0, 1]")->required();
  eval->add_option("--r", o.r, "indemnity r in [0, loss]")->required();
  add_output(eval);

  auto* reg = app.add_subcommand("regulated", "welfare-maximizing indemnity with profit-maximizing segmentation");
  auto* unreg = app.add_subcommand("unregulated", "profit-maximizing contract");
  for (auto* sub : {reg, unreg}) {
    add_measure(sub);
    add_market(sub);
    add_solver(sub, "--grid");
    add_output(sub);
  }

  auto* table1 = app.add_subcommand("table1", "regulated vs unregulated deltas on the benchmark");
  auto* sweep_rho = app.add_subcommand("sweep-rho", "both regimes over a rho grid");
  for (auto* sub : {table1, sweep_rho}) {
    add_measure(sub);
    sub->add_option("--loss", o.loss, "nondimensional loss l in (0, 1]")->capture_default_str();
    sub->add_option("--rhos", o.rhos, "rho values")->delimiter(',');
    add_solver(sub, "--grid");
    add_output(sub);
    sub->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
  }
  sweep_rho->add_option("--svg", o.svg, "write line charts to this file");

  auto* sweep_ez = app.add_subcommand("sweep-ez", "relative indemnity increase over the EZ-square");
  add_market(sweep_ez);
  sweep_ez->add_option("--grid", o.ez_grid, "cells per axis")->capture_default_str();
  add_solver(sweep_ez, "--solver-grid");
  add_output(sweep_ez);
  sweep_ez->add_option("--svg", o.svg, "write the heatmap to this file");
  sweep_ez->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();

  auto* conj = app.add_subcommand("verify-conjecture", "scan A'' on the alpha >= 1 half of the EZ-square");
  conj->add_option("--grid", o.ez_grid, "cells per axis")->capture_default_str();
  conj->add_option("--theta-grid", o.theta_grid, "theta points per cell")->capture_default_str();
  conj->add_option("--threshold", o.threshold, "pass threshold for min A''")->capture_default_str();
  add_output(conj);
  conj->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();

  // config file values go right after the subcommand so later flags override them
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] != "--config") continue;
      const auto extra = read_config(args[i + 1]);
      std::size_t pos = 0;
      while (pos < args.size() && !app.get_subcommand_no_throw(args[pos])) ++pos;
      if (pos == args.size()) throw UsageError("--config needs a subcommand");
      const CLI::App* sub = app.get_subcommand_no_throw(args[pos]);
      std::vector<std::string> known;
      for (std::size_t k = 0; k + 1 < extra.size(); k += 2) {
        if (extra[k] == "--config" || !sub->get_option_no_throw(extra[k])) continue;
        known.push_back(extra[k]);
        known.push_back(extra[k + 1]);
      }
      args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos) + 1, known.begin(), known.end());
      break;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    validate(o.solver);
    if (!(o.jobs >= 1)) throw UsageError("--jobs must be >= 1");
    const std::vector<double> rhos = o.rhos.empty() ? table1_rhos() : o.rhos;

    if (*eval) {
      const MarketModel mm(measure_from(o, false), MarketPrimitives(o.rho, o.loss));
      if (!(o.theta >= 0.0 && o.theta <= 1.0)) throw DomainError("--theta must lie in [0, 1]");
      if (!(o.r >= 0.0 && o.r <= o.loss)) throw DomainError("--r must lie in [0, loss]");
      Sink sink(o.out, out);
      emit(sink.stream(), {eval_record(mm, o.theta, o.r)}, o.format);
      return kOk;
    }
    if (*reg || *unreg) {
      const MarketModel mm(measure_from(o, false), MarketPrimitives(o.rho, o.loss));
      const OptimumReport rep = *reg ? regulated_opt(mm, o.solver) : unregulated_opt(mm, o.solver);
      Sink sink(o.out, out);
      emit(sink.stream(), {record_of(rep)}, o.format);
      if (!rep.profitable) {
        err << "no profitable contract exists\n";
        return kNoProfit;
      }
      return kOk;
    }
    if (*table1 || *sweep_rho) {
      const EZPoint ez = measure_from(o, true).ez();
      const std::vector<double> grid = *table1 || !o.rhos.empty()
                                           ? rhos
                                           : std::vector<double>{0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5,
                                                                 5.5, 6, 6.5, 7, 7.5, 8, 8.5, 9, 9.5, 10};
      const auto rows = *table1 ? run_table1(ez.e(), ez.z(), o.loss, grid, o.solver, o.jobs)
                                : run_rho_sweep(ez.e(), ez.z(), o.loss, grid, o.solver, o.jobs);
      {
        Sink sink(o.out, out);
        std::vector<Record> recs;
        for (const auto& row : rows) recs.push_back(record_of(row));
        emit(sink.stream(), recs, o.format);
      }
      write_svg_file(o.svg, [&](std::ostream& f) { write_svg(f, rows); });
      int missing = 0;
      for (const auto& row : rows) missing += row.profitable ? 0 : 1;
      const AuditResult audit = audit_rows(rows, o.solver, 10);
      std::ostream& summary = o.out.empty() ? err : out;
      summary << (*table1 ? "table1" : "sweep-rho") << ": " << rows.size() << " rows, " << missing
              << " without a profitable contract; audit " << audit.checked << " rows, " << audit.mismatches
              << " mismatches\n";
      return audit.mismatches ? kNoConvergence : kOk;
    }
    if (*sweep_ez) {
      if (!(o.ez_grid >= 1)) throw UsageError("--grid must be >= 1");
      MarketPrimitives(o.rho, o.loss);  // validates
      const EzSweepResult res = run_ez_sweep(o.rho, o.loss, o.ez_grid, o.solver, o.jobs);
      {
        Sink sink(o.out, out);
        if (o.format == "json") {
          std::vector<Record> recs;
          for (const auto& c : res.cells) {
            Record rec;
            rec.flags = {{"failed", c.failed}};
            rec.numbers = {{"E", c.E}, {"Z", c.Z}, {"r_unregulated", c.r_unregulated},
                           {"r_regulated", c.r_regulated}, {"value", c.value}};
            recs.push_back(std::move(rec));
          }
          emit(sink.stream(), recs, o.format);
        } else {
          write_csv(sink.stream(), res);
        }
      }
      write_svg_file(o.svg, [&](std::ostream& f) { write_svg(f, res); });
      std::ostream& summary = o.out.empty() ? err : out;
      if (res.max_value)
        summary << "sweep-ez: max increase " << detail::fixed(100.0 * *res.max_value, 1) << "% at E="
                << format_number(res.max_E) << " Z=" << format_number(res.max_Z);
      else
        summary << "sweep-ez: no cell with a profitable contract";
      summary << "; " << res.cells.size() << " cells, " << res.missing << " missing\n";
      summary << "failed cells: " << res.failed << '\n';
      return res.failed ? kNoConvergence : kOk;
    }
    if (*conj) {
      const ConjectureResult res = run_conjecture(o.ez_grid, o.theta_grid, o.threshold, o.jobs);
      {
        Sink sink(o.out, out);
        if (o.format == "json") {
          std::vector<Record> recs;
          for (const auto& c : res.report.cells) {
            Record rec;
            rec.flags = {{"pass", c.min_second_deriv >= res.report.threshold}};
            rec.numbers = {{"E", c.ez.e()},
                           {"Z", c.ez.z()},
                           {"min_second_deriv", c.min_second_deriv},
                           {"argmin_theta", c.argmin_theta}};
            recs.push_back(std::move(rec));
          }
          emit(sink.stream(), recs, o.format);
        } else {
          write_csv(sink.stream(), res);
        }
      }
      std::ostream& summary = o.out.empty() ? err : out;
      summary << (res.report.holds_on_grid ? "PASS" : "FAIL") << ": min A'' = " << format_number(res.report.worst)
              << " over " << res.report.cells.size() << " cells x " << res.theta_n << " theta points (threshold "
              << format_number(res.report.threshold) << ")\n";
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace commrate::cli
