#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "metroflow/error.hpp"
#include "metroflow/experiments/experiments.hpp"
#include "metroflow/util/csv.hpp"

namespace metroflow::experiments {
namespace {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

// Line chart with axes, five ticks per axis and a legend; one polyline per series.
std::string line_plot(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<Series>& series) {
  constexpr double W = 720, H = 440, L = 70, R = 180, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape_xml(title) << "</text>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    svg << "<text x=\"" << fixed(px(xv), 1) << "\" y=\"" << H - B + 18
        << "\" text-anchor=\"middle\">" << fixed(xv, 1) << "</text>\n"
        << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(yv) + 4, 1) << "\" text-anchor=\"end\">"
        << fixed(yv) << "</text>\n";
  }
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
      << escape_xml(x_label) << "</text>\n"
      << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << escape_xml(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t p = 0; p < series[i].points.size(); ++p) {
      if (p > 0) svg << ' ';
      svg << fixed(px(series[i].points[p].first), 2) << ',' << fixed(py(series[i].points[p].second), 2);
    }
    svg << "\"><title>" << escape_xml(series[i].name) << "</title></polyline>\n";
    const double ly = T + 16.0 * static_cast<double>(i);
    svg << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 35 << "\" y2=\""
        << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << W - R + 40 << "\" y=\"" << ly + 4 << "\">" << escape_xml(series[i].name)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCategory::io, "failed writing " + path.string());
}

std::string file_task_name(Task task) {
  std::string name = task.name();
  std::replace(name.begin(), name.end(), '-', '_');
  return name;
}

std::vector<Task> tasks_in(const ExperimentResult& result) {
  std::vector<Task> tasks;
  for (const auto& row : result.rows) {
    if (std::find(tasks.begin(), tasks.end(), row.task) == tasks.end()) tasks.push_back(row.task);
  }
  return tasks;
}

double row_norm(const Tensor& t, std::size_t r) {
  double s = 0.0;
  for (double v : t.row(r)) s += v * v;
  return std::sqrt(s);
}

}  // namespace

std::string results_csv_header() {
  return "variant,sampling_rate,k,layers,task,seed,best_val_mape,test_mape,best_epoch,status,message";
}

void write_results(const ExperimentResult& result, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row(csv::split(results_csv_header()));
  for (const auto& r : result.rows) {
    w.row({std::string(model::to_string(r.variant.variant)),
           r.variant.sampling_rate ? csv::format_double(*r.variant.sampling_rate) : "",
           std::to_string(r.k), std::to_string(r.layers), r.task.name(), std::to_string(r.seed),
           csv::format_double(r.best_val_mape), csv::format_double(r.test_mape),
           std::to_string(r.best_epoch), r.ok ? "ok" : "failed", r.message});
  }
  w.close();
}

ExperimentResult read_results(const std::filesystem::path& path) {
  const auto table = csv::read(path, csv::split(results_csv_header()));
  ExperimentResult result;
  for (const auto& [line_no, f] : table.rows) {
    const std::string ctx = path.string() + ":" + std::to_string(line_no);
    ResultRow r;
    try {
      r.variant.variant = model::parse_variant(f[0]);
      if (!f[1].empty()) r.variant.sampling_rate = csv::parse_double(f[1], ctx);
      r.task = Task::parse(f[4]);
    } catch (const Error& e) {
      fail(ErrorCategory::data, ctx + ": " + e.what());
    }
    r.k = static_cast<int>(csv::parse_int(f[2], ctx));
    r.layers = static_cast<std::size_t>(csv::parse_int(f[3], ctx));
    r.seed = static_cast<std::uint64_t>(csv::parse_int(f[5], ctx));
    r.best_val_mape = csv::parse_double(f[6], ctx);
    r.test_mape = csv::parse_double(f[7], ctx);
    r.best_epoch = static_cast<int>(csv::parse_int(f[8], ctx));
    if (f[9] != "ok" && f[9] != "failed") {
      fail(ErrorCategory::data, ctx + ": status must be ok or failed");
    }
    r.ok = f[9] == "ok";
    r.message = f[10];
    result.rows.push_back(std::move(r));
  }
  return result;
}

void emit_report(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  write_results(result, out_dir / "results.csv");
  {
    csv::Writer w(out_dir / "timings.csv");
    w.row({"variant", "k", "layers", "task", "seed", "wall_time"});
    for (const auto& r : result.rows) {
      w.row({r.variant.label(), std::to_string(r.k), std::to_string(r.layers), r.task.name(),
             std::to_string(r.seed), csv::format_double(r.wall_time)});
    }
    w.close();
  }
  const auto medians = hop_medians(result);
  auto best = best_hops(result);
  for (const Task task : tasks_in(result)) {
    std::vector<HopSummary> rows;
    for (const auto& b : best) {
      if (b.task == task) rows.push_back(b);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const HopSummary& a, const HopSummary& b) {
      return a.median_test_mape < b.median_test_mape;
    });
    csv::Writer w(out_dir / ("table_" + file_task_name(task) + ".csv"));
    w.row({"model", "mape", "hop", "seeds"});
    for (const auto& r : rows) {
      w.row({r.variant, csv::format_double(r.median_test_mape), std::to_string(r.k),
             std::to_string(r.seeds)});
    }
    w.close();

    std::vector<Series> series;
    for (const auto& m : medians) {
      if (!(m.task == task)) continue;
      auto it = std::find_if(series.begin(), series.end(),
                             [&](const Series& s) { return s.name == m.variant; });
      if (it == series.end()) {
        series.push_back({m.variant, {}});
        it = series.end() - 1;
      }
      it->points.emplace_back(m.k, m.median_test_mape);
    }
    for (auto& s : series) std::sort(s.points.begin(), s.points.end());
    write_text(out_dir / ("mape_vs_hop_" + file_task_name(task) + ".svg"),
               line_plot("Test MAPE by hop, " + task.name(), "hop k", "median test MAPE (%)", series));
  }
}

void emit_report(const OversmoothingReport& report, const std::filesystem::path& out_dir) {
  {
    csv::Writer w(out_dir / "diagnostic_seeds.csv");
    w.row({"seed", "year", "gcn_test_mape", "sage_test_mape"});
    for (const auto& r : report.runs) {
      w.row({std::to_string(r.seed), std::to_string(r.year), csv::format_double(r.gcn_test_mape),
             csv::format_double(r.sage_test_mape)});
    }
    w.close();
  }
  {
    csv::Writer w(out_dir / "diagnostic_overlap.csv");
    w.row({"k", "mean_overlap", "full_fraction"});
    for (const auto& o : report.overlap) {
      w.row({std::to_string(o.k), csv::format_double(o.mean_overlap),
             csv::format_double(o.full_fraction)});
    }
    w.close();
  }
  if (report.runs.empty()) return;
  const DiagnosticRun& run = report.runs.front();
  {
    csv::Writer w(out_dir / "diagnostic_vertices.csv");
    w.row({"station", "fully_connected", "truth", "gcn_prediction", "sage_prediction",
           "self_part_norm", "neighbor_part_norm"});
    for (std::size_t v = 0; v < report.stations.size(); ++v) {
      const bool full = std::binary_search(report.fully_connected.begin(),
                                           report.fully_connected.end(), v);
      w.row({report.stations[v], full ? "1" : "0", csv::format_double(run.truth[v]),
             csv::format_double(run.gcn_predictions[v]), csv::format_double(run.sage_predictions[v]),
             csv::format_double(row_norm(run.self_part, v)),
             csv::format_double(row_norm(run.neighbor_part, v))});
    }
    w.close();
  }
  Series truth{"truth", {}}, gcn{"GCN", {}}, sage{"SAGE (mean)", {}};
  Series self{"self part", {}}, neighbor{"neighbor part", {}};
  for (std::size_t v = 0; v < report.stations.size(); ++v) {
    const double x = static_cast<double>(v);
    truth.points.emplace_back(x, run.truth[v]);
    gcn.points.emplace_back(x, run.gcn_predictions[v]);
    sage.points.emplace_back(x, run.sage_predictions[v]);
    self.points.emplace_back(x, row_norm(run.self_part, v));
    neighbor.points.emplace_back(x, row_norm(run.neighbor_part, v));
  }
  write_text(out_dir / "predictions.svg",
             line_plot("Predictions vs truth, " + report.task.name() + ", " +
                           std::to_string(run.year),
                       "station", "flow", {truth, gcn, sage}));
  write_text(out_dir / "decomposition.svg",
             line_plot("First SAGE layer addends", "station", "row norm", {self, neighbor}));
}

}  // namespace metroflow::experiments
