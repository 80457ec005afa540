#pragma once

// Experiment drivers: regime comparison over rho (Table 1 and the rho sweep),
// the EZ-square heatmap of the regulated indemnity increase, and the A''
// convexity scan. Cells run on a small thread pool and are merged in
// row-major order, so output does not depend on the worker count.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "commrate/errors.hpp"
#include "commrate/solve.hpp"

namespace commrate {

// Runs fn(0..n-1) on up to `jobs` threads. The first exception is rethrown
// after all workers finish.
inline void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline int default_jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct SweepRow {
  std::string regime;
  double rho = 0.0;
  double E = 0.0;
  double Z = 0.0;
  double loss = 1.0;
  bool profitable = false;
  std::optional<double> theta_star, r_star, premium, take_up, profit, surplus, welfare, elasticity, MC, cond_mean,
      cond_sd;
  std::optional<double> delta_r, delta_take_up, delta_profit, delta_premium;
};

struct SweepColumn {
  const char* name;
  std::optional<double> SweepRow::*field;
};

inline constexpr std::array<SweepColumn, 15> kSweepColumns{{
    {"theta_star", &SweepRow::theta_star},
    {"r_star", &SweepRow::r_star},
    {"premium", &SweepRow::premium},
    {"take_up", &SweepRow::take_up},
    {"profit", &SweepRow::profit},
    {"surplus", &SweepRow::surplus},
    {"welfare", &SweepRow::welfare},
    {"elasticity", &SweepRow::elasticity},
    {"MC", &SweepRow::MC},
    {"cond_mean", &SweepRow::cond_mean},
    {"cond_sd", &SweepRow::cond_sd},
    {"delta_r", &SweepRow::delta_r},
    {"delta_take_up", &SweepRow::delta_take_up},
    {"delta_profit", &SweepRow::delta_profit},
    {"delta_premium", &SweepRow::delta_premium},
}};

struct RegimePair {
  OptimumReport unregulated;
  OptimumReport regulated;
};

inline MarketModel benchmark_model(double E, double Z, double loss, double rho, const QuadratureSpec& quad = {}) {
  return MarketModel(TypeMeasure::from_ez(EZPoint(E, Z)), MarketPrimitives(rho, loss), quad);
}

inline RegimePair compare_regimes(const MarketModel& mm, const SolverConfig& cfg) {
  RegimePair out{unregulated_opt(mm, cfg), {}};
  // same feasible set: no profitable contract at all means no profitable r for the regulator
  if (out.unregulated.profitable)
    out.regulated = regulated_opt(mm, cfg);
  else
    out.regulated = make_report(mm, Regime::Regulated, 1.0, mm.prim().loss(), false);
  return out;
}

inline double relative_change(double reg, double unreg) { return (reg - unreg) / unreg; }

inline SweepRow make_row(const OptimumReport& rep, double rho, double E, double Z, double loss) {
  SweepRow row;
  row.regime = std::string(to_string(rep.regime));
  row.rho = rho;
  row.E = E;
  row.Z = Z;
  row.loss = loss;
  row.profitable = rep.profitable;
  if (!rep.profitable) return row;
  row.theta_star = rep.theta_star;
  row.r_star = rep.r_star;
  row.premium = rep.premium;
  row.take_up = rep.take_up;
  row.profit = rep.profit;
  row.surplus = rep.surplus;
  row.welfare = rep.welfare;
  if (std::isfinite(rep.elasticity)) row.elasticity = rep.elasticity;
  row.MC = rep.marginal_cost;
  row.cond_mean = rep.cond_mean;
  row.cond_sd = rep.cond_sd;
  return row;
}

// Unregulated row, then the regulated row carrying the relative deltas.
inline std::array<SweepRow, 2> comparison_rows(double E, double Z, double loss, double rho, const SolverConfig& cfg) {
  const MarketModel mm = benchmark_model(E, Z, loss, rho);
  const RegimePair p = compare_regimes(mm, cfg);
  std::array<SweepRow, 2> rows{make_row(p.unregulated, rho, E, Z, loss), make_row(p.regulated, rho, E, Z, loss)};
  if (p.unregulated.profitable && p.regulated.profitable) {
    const auto& u = p.unregulated;
    const auto& g = p.regulated;
    rows[1].delta_r = relative_change(g.r_star, u.r_star);
    rows[1].delta_take_up = relative_change(g.take_up, u.take_up);
    rows[1].delta_profit = relative_change(g.profit, u.profit);
    rows[1].delta_premium = relative_change(g.premium, u.premium);
  }
  return rows;
}

struct Benchmark {
  double E = 0.05;
  double Z = 0.989;
  double loss = 1.0;
};

inline std::vector<double> table1_rhos() { return {0.5, 1.0, 2.5, 5.0, 7.5, 10.0}; }

inline std::vector<SweepRow> run_rho_sweep(double E, double Z, double loss, const std::vector<double>& rho_grid,
                                           const SolverConfig& cfg = {}, int jobs = 1) {
  for (double rho : rho_grid) {
    if (!(rho > 0.0 && rho <= 50.0)) throw DomainError("run_rho_sweep: rho must lie in (0, 50]");
  }
  std::vector<std::array<SweepRow, 2>> pairs(rho_grid.size());
  parallel_for(static_cast<int>(rho_grid.size()), jobs,
               [&](int i) { pairs[i] = comparison_rows(E, Z, loss, rho_grid[i], cfg); });
  std::vector<SweepRow> rows;
  for (auto& p : pairs) {
    rows.push_back(std::move(p[0]));
    rows.push_back(std::move(p[1]));
  }
  return rows;
}

// One regulated row per rho with the four deltas.
inline std::vector<SweepRow> run_table1(double E, double Z, double loss, const std::vector<double>& rho_list,
                                        const SolverConfig& cfg = {}, int jobs = 1) {
  std::vector<SweepRow> rows;
  for (auto& row : run_rho_sweep(E, Z, loss, rho_list, cfg, jobs)) {
    if (row.regime == to_string(Regime::Regulated)) rows.push_back(std::move(row));
  }
  return rows;
}

// ---- EZ-square sweep ----

struct EzCell {
  double E = 0.0;
  double Z = 0.0;
  std::optional<double> r_unregulated;
  std::optional<double> r_regulated;
  std::optional<double> value;  // (r_reg - r_unreg) / r_unreg
  bool failed = false;
};

struct EzSweepResult {
  int grid_n = 0;
  double rho = 0.0;
  double loss = 1.0;
  std::vector<EzCell> cells;  // row-major: index = j * grid_n + i, E_i across, Z_j up
  std::optional<double> max_value;
  double max_E = std::numeric_limits<double>::quiet_NaN();
  double max_Z = std::numeric_limits<double>::quiet_NaN();
  int missing = 0;
  int failed = 0;
};

inline double cell_center(int i, int n) { return (i + 0.5) / n; }

inline EzCell ez_cell(double E, double Z, double rho, double loss, const SolverConfig& cfg) {
  EzCell cell;
  cell.E = E;
  cell.Z = Z;
  try {
    const MarketModel mm = benchmark_model(E, Z, loss, rho);
    const RegimePair p = compare_regimes(mm, cfg);
    if (p.unregulated.profitable) cell.r_unregulated = p.unregulated.r_star;
    if (p.regulated.profitable) cell.r_regulated = p.regulated.r_star;
    if (cell.r_unregulated && cell.r_regulated)
      cell.value = relative_change(*cell.r_regulated, *cell.r_unregulated);
  } catch (const Error&) {
    cell.failed = true;
  }
  return cell;
}

inline EzSweepResult run_ez_sweep(double rho = 5.0, double loss = 1.0, int grid_n = 64, const SolverConfig& cfg = {},
                                  int jobs = 1) {
  detail::require(grid_n >= 1, "run_ez_sweep: grid_n must be >= 1");
  EzSweepResult out;
  out.grid_n = grid_n;
  out.rho = rho;
  out.loss = loss;
  const int total = grid_n * grid_n;
  out.cells.resize(total);
  parallel_for(total, jobs, [&](int k) {
    out.cells[k] = ez_cell(cell_center(k % grid_n, grid_n), cell_center(k / grid_n, grid_n), rho, loss, cfg);
  });
  for (const EzCell& c : out.cells) {
    if (c.failed) ++out.failed;
    if (!c.value) {
      ++out.missing;
      continue;
    }
    if (!out.max_value || *c.value > *out.max_value) {
      out.max_value = c.value;
      out.max_E = c.E;
      out.max_Z = c.Z;
    }
  }
  return out;
}

// ---- convexity of A on the alpha >= 1 half of the square ----

struct ConjectureResult {
  int grid_n = 0;
  int theta_n = 0;
  ConvexityReport report;
};

inline ConjectureResult run_conjecture(int grid_n = 64, int theta_n = 512, double threshold = -1e-9, int jobs = 1) {
  detail::require(grid_n >= 1 && theta_n >= 1, "run_conjecture: grid sizes must be >= 1");
  std::vector<EZPoint> points;
  for (int j = 0; j < grid_n; ++j) {
    for (int i = 0; i < grid_n; ++i) {
      const double E = cell_center(i, grid_n);
      const double Z = cell_center(j, grid_n);
      if (Z >= 1.0 - E - 1e-12) points.emplace_back(E, Z);
    }
  }
  std::vector<double> thetas(theta_n);
  for (int k = 0; k < theta_n; ++k) thetas[k] = cell_center(k, theta_n);
  ConjectureResult out{grid_n, theta_n, {}};
  std::vector<ConvexityReport> parts(points.size());
  parallel_for(static_cast<int>(points.size()), jobs, [&](int k) {
    parts[k] = verify_convexity(std::span<const EZPoint>(&points[k], 1), thetas, threshold);
  });
  out.report.threshold = threshold;
  for (const auto& p : parts) {
    const ConvexityCell& c = p.cells.front();
    out.report.cells.push_back(c);
    out.report.worst = std::min(out.report.worst, c.min_second_deriv);
    if (c.min_second_deriv < threshold) out.report.holds_on_grid = false;
  }
  return out;
}

// ---- round-trip audit ----

inline bool same_value(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || *a == *b || (std::isnan(*a) && std::isnan(*b));
}

inline bool same_row(const SweepRow& a, const SweepRow& b) {
  if (a.regime != b.regime || a.rho != b.rho || a.E != b.E || a.Z != b.Z || a.loss != b.loss ||
      a.profitable != b.profitable)
    return false;
  return std::all_of(kSweepColumns.begin(), kSweepColumns.end(),
                     [&](const SweepColumn& c) { return same_value(a.*c.field, b.*c.field); });
}

struct AuditResult {
  int checked = 0;
  int mismatches = 0;
};

// Re-solves up to `count` randomly chosen rows from their inputs and compares.
inline AuditResult audit_rows(const std::vector<SweepRow>& rows, const SolverConfig& cfg, int count = 10,
                              unsigned seed = 12345u) {
  AuditResult out;
  if (rows.empty()) return out;
  std::vector<std::size_t> idx(rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937 gen(seed);
  std::shuffle(idx.begin(), idx.end(), gen);
  idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(count)));
  std::sort(idx.begin(), idx.end());
  for (std::size_t i : idx) {
    const SweepRow& row = rows[i];
    const auto fresh = comparison_rows(row.E, row.Z, row.loss, row.rho, cfg);
    const SweepRow& match = row.regime == to_string(Regime::Regulated) ? fresh[1] : fresh[0];
    ++out.checked;
    if (!same_row(row, match)) ++out.mismatches;
  }
  return out;
}

inline AuditResult audit_cells(const EzSweepResult& sweep, const SolverConfig& cfg, int count = 10,
                               unsigned seed = 12345u) {
  AuditResult out;
  const int total = static_cast<int>(sweep.cells.size());
  if (total == 0) return out;
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> pick(0, total - 1);
  for (int k = 0; k < std::min(count, total); ++k) {
    const EzCell& c = sweep.cells[pick(gen)];
    const EzCell fresh = ez_cell(c.E, c.Z, sweep.rho, sweep.loss, cfg);
    ++out.checked;
    if (!same_value(c.value, fresh.value) || c.failed != fresh.failed) ++out.mismatches;
  }
  return out;
}

// ---- writers ----

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_field(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "regime,rho,E,Z,loss,profitable";
  for (const auto& c : kSweepColumns) os << ',' << c.name;
  os << '\n';
  for (const SweepRow& r : rows) {
    os << r.regime << ',' << format_number(r.rho) << ',' << format_number(r.E) << ',' << format_number(r.Z) << ','
       << format_number(r.loss) << ',' << (r.profitable ? "true" : "false");
    for (const auto& c : kSweepColumns) os << ',' << format_field(r.*c.field);
    os << '\n';
  }
}

inline void write_csv(std::ostream& os, const EzSweepResult& sweep) {
  os << "E,Z,r_unregulated,r_regulated,value,failed\n";
  for (const EzCell& c : sweep.cells) {
    os << format_number(c.E) << ',' << format_number(c.Z) << ',' << format_field(c.r_unregulated) << ','
       << format_field(c.r_regulated) << ',' << format_field(c.value) << ',' << (c.failed ? "true" : "false") << '\n';
  }
}

inline void write_csv(std::ostream& os, const ConjectureResult& res) {
  os << "E,Z,alpha,beta,min_second_deriv,argmin_theta,pass\n";
  for (const ConvexityCell& c : res.report.cells) {
    const EZPoint& ez = c.ez;
    const double alpha = ez.e() * ez.z() / ((1.0 - ez.e()) * (1.0 - ez.z()));
    const double beta = ez.z() / (1.0 - ez.z());
    os << format_number(ez.e()) << ',' << format_number(ez.z()) << ',' << format_number(alpha) << ','
       << format_number(beta) << ',' << format_number(c.min_second_deriv) << ',' << format_number(c.argmin_theta)
       << ',' << (c.min_second_deriv >= res.report.threshold ? "true" : "false") << '\n';
  }
}

namespace detail {

struct Rgb {
  int r, g, b;
};

// Hue ramp from purple (0) to red (1) at full saturation.
inline Rgb spectrum(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double hue = 270.0 * (1.0 - t);
  const double h = hue / 60.0;
  const double x = 1.0 - std::fabs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  if (h < 1) r = 1, g = x;
  else if (h < 2) r = x, g = 1;
  else if (h < 3) g = 1, b = x;
  else if (h < 4) g = x, b = 1;
  else r = x, b = 1;
  return {static_cast<int>(std::lround(255 * r)), static_cast<int>(std::lround(255 * g)),
          static_cast<int>(std::lround(255 * b))};
}

inline std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

inline std::string fixed(double v, int digits = 2) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

// Discrete heatmap; E across, Z up. Missing cells are left blank.
inline void write_svg(std::ostream& os, const EzSweepResult& sweep) {
  const int n = sweep.grid_n;
  const double plot = 512.0;
  const double cell = plot / n;
  const double left = 60.0, top = 20.0;
  const double width = left + plot + 120.0, height = top + plot + 50.0;
  const double vmax = sweep.max_value.value_or(0.0);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot << "\" height=\"" << plot
     << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const EzCell& c = sweep.cells[static_cast<std::size_t>(j) * n + i];
      if (!c.value) continue;
      const double t = vmax > 0.0 ? std::max(*c.value, 0.0) / vmax : 0.0;
      os << "<rect x=\"" << detail::fixed(left + i * cell, 3) << "\" y=\""
         << detail::fixed(top + plot - (j + 1) * cell, 3) << "\" width=\"" << detail::fixed(cell, 3)
         << "\" height=\"" << detail::fixed(cell, 3) << "\" fill=\"" << detail::hex(detail::spectrum(t)) << "\"/>\n";
    }
  }
  os << "<text x=\"" << left + plot / 2 << "\" y=\"" << top + plot + 35 << "\" text-anchor=\"middle\">E</text>\n";
  os << "<text x=\"" << left - 35 << "\" y=\"" << top + plot / 2 << "\" text-anchor=\"middle\">Z</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    os << "<text x=\"" << left + v * plot << "\" y=\"" << top + plot + 15 << "\" font-size=\"10\" text-anchor=\"middle\">"
       << detail::fixed(v) << "</text>\n";
    os << "<text x=\"" << left - 5 << "\" y=\"" << top + plot - v * plot + 3
       << "\" font-size=\"10\" text-anchor=\"end\">" << detail::fixed(v) << "</text>\n";
  }
  // legend: purple at 0, red at the maximum
  const double lx = left + plot + 30.0;
  const int steps = 64;
  for (int k = 0; k < steps; ++k) {
    const double t = (k + 0.5) / steps;
    os << "<rect x=\"" << lx << "\" y=\"" << detail::fixed(top + plot - (k + 1) * plot / steps, 3)
       << "\" width=\"20\" height=\"" << detail::fixed(plot / steps + 0.5, 3) << "\" fill=\""
       << detail::hex(detail::spectrum(t)) << "\"/>\n";
  }
  os << "<text x=\"" << lx + 25 << "\" y=\"" << top + plot << "\" font-size=\"10\">0%</text>\n";
  os << "<text x=\"" << lx + 25 << "\" y=\"" << top + 10 << "\" font-size=\"10\">" << detail::fixed(100.0 * vmax, 1)
     << "%</text>\n";
  os << "</svg>\n";
}

// Small multiples of each series against rho, one line per regime.
inline void write_svg(std::ostream& os, const std::vector<SweepRow>& rows) {
  struct Panel {
    const char* name;
    std::optional<double> SweepRow::*field;
  };
  const std::array<Panel, 9> panels{{{"profit", &SweepRow::profit},
                                     {"welfare", &SweepRow::welfare},
                                     {"take_up", &SweepRow::take_up},
                                     {"theta_star", &SweepRow::theta_star},
                                     {"cond_mean", &SweepRow::cond_mean},
                                     {"r_star", &SweepRow::r_star},
                                     {"premium", &SweepRow::premium},
                                     {"MC", &SweepRow::MC},
                                     {"elasticity", &SweepRow::elasticity}}};
  const char* regimes[2] = {"Unregulated", "Regulated"};
  const char* colours[2] = {"#1f5fbf", "#c0282d"};
  const double pw = 260, ph = 180, pad = 50;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 3 * (pw + pad) + pad << "\" height=\""
     << 3 * (ph + pad) + pad << "\">\n";
  double rlo = std::numeric_limits<double>::infinity(), rhi = -rlo;
  for (const auto& r : rows) rlo = std::min(rlo, r.rho), rhi = std::max(rhi, r.rho);
  if (!(rhi > rlo)) rhi = rlo + 1.0;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const double x0 = pad + (p % 3) * (pw + pad);
    const double y0 = pad + (p / 3) * (ph + pad);
    double vlo = std::numeric_limits<double>::infinity(), vhi = -vlo;
    for (const auto& r : rows) {
      if (const auto& v = r.*panels[p].field) vlo = std::min(vlo, *v), vhi = std::max(vhi, *v);
    }
    if (!(vhi > vlo)) {
      if (!std::isfinite(vlo)) vlo = 0.0;
      vhi = vlo + 1.0;
    }
    os << "<g>\n<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << y0 - 8 << "\" text-anchor=\"middle\">" << panels[p].name
       << "</text>\n";
    os << "<text x=\"" << x0 - 4 << "\" y=\"" << y0 + 10 << "\" font-size=\"9\" text-anchor=\"end\">"
       << format_number(vhi).substr(0, 8) << "</text>\n";
    os << "<text x=\"" << x0 - 4 << "\" y=\"" << y0 + ph << "\" font-size=\"9\" text-anchor=\"end\">"
       << format_number(vlo).substr(0, 8) << "</text>\n";
    for (int g = 0; g < 2; ++g) {
      std::string pts;
      for (const auto& r : rows) {
        const auto& v = r.*panels[p].field;
        if (r.regime != regimes[g] || !v) continue;
        const double x = x0 + (r.rho - rlo) / (rhi - rlo) * pw;
        const double y = y0 + ph - (*v - vlo) / (vhi - vlo) * ph;
        pts += detail::fixed(x, 2) + "," + detail::fixed(y, 2) + " ";
      }
      if (!pts.empty())
        os << "<polyline fill=\"none\" stroke=\"" << colours[g] << "\" stroke-width=\"1.5\" points=\"" << pts
           << "\"/>\n";
    }
    os << "</g>\n";
  }
  os << "<text x=\"" << pad << "\" y=\"" << 3 * (ph + pad) + pad - 10 << "\" font-size=\"11\">rho from "
     << format_number(rlo) << " to " << format_number(rhi) << "; blue: Unregulated, red: Regulated</text>\n";
  os << "</svg>\n";
}

}  // namespace commrate
