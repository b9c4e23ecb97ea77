#include "metroflow/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "metroflow/error.hpp"
#include "metroflow/util/csv.hpp"

namespace metroflow {
namespace {

constexpr std::array<std::string_view, kNumTimestamps> kTimestampNames = {"early", "am", "mid",
                                                                          "pm", "late"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

int parse_timestamp(std::string_view text, const std::string& context) {
  const std::string t = lower(text);
  for (int i = 0; i < kNumTimestamps; ++i) {
    if (t == kTimestampNames[i]) return i + 1;
  }
  if (t.size() == 1 && t[0] >= '1' && t[0] <= '5') return t[0] - '0';
  fail(ErrorCategory::data, context + ": unknown timestamp '" + std::string(text) + "'");
}

Direction parse_direction(std::string_view text, const std::string& context) {
  const std::string t = lower(text);
  if (t == "entry") return Direction::entry;
  if (t == "exit") return Direction::exit;
  fail(ErrorCategory::data, context + ": unknown direction '" + std::string(text) + "'");
}

}  // namespace

std::string_view timestamp_name(int timestamp) {
  if (timestamp < 1 || timestamp > kNumTimestamps) {
    fail(ErrorCategory::contract, "timestamp must be 1..5, got " + std::to_string(timestamp));
  }
  return kTimestampNames[timestamp - 1];
}

std::string_view direction_name(Direction direction) {
  return direction == Direction::entry ? "entry" : "exit";
}

std::string Task::name() const {
  return std::string(timestamp_name(timestamp)) + "-" + std::string(direction_name(direction));
}

Task Task::parse(std::string_view name) {
  const std::size_t dash = name.find('-');
  if (dash == std::string_view::npos) {
    fail(ErrorCategory::contract, "task '" + std::string(name) + "' is not <timestamp>-<direction>");
  }
  try {
    return Task{parse_timestamp(name.substr(0, dash), "task"),
                parse_direction(name.substr(dash + 1), "task")};
  } catch (const Error& e) {
    fail(ErrorCategory::contract, e.what());
  }
}

std::vector<Task> Task::all() {
  std::vector<Task> out;
  for (int t = 1; t <= kNumTimestamps; ++t) {
    out.push_back({t, Direction::entry});
    out.push_back({t, Direction::exit});
  }
  return out;
}

std::array<int, kNumFeatures> Task::feature_columns() const {
  if (timestamp < 1 || timestamp > kNumTimestamps) {
    fail(ErrorCategory::contract, "timestamp must be 1..5, got " + std::to_string(timestamp));
  }
  std::array<int, kNumFeatures> cols{};
  std::size_t i = 0;
  for (int t = 1; t <= kNumTimestamps; ++t) {
    if (t == timestamp) continue;
    cols[i++] = column_index(t, Direction::entry);
    cols[i++] = column_index(t, Direction::exit);
  }
  return cols;
}

StationDataset::StationDataset(std::vector<std::string> stations, std::vector<int> years,
                               std::vector<double> traffic, std::vector<SocialFeatures> social,
                               std::vector<Line> lines, BaseGraph base_graph)
    : stations_(std::move(stations)),
      years_(std::move(years)),
      traffic_(std::move(traffic)),
      social_(std::move(social)),
      lines_(std::move(lines)),
      base_graph_(std::move(base_graph)) {
  const std::size_t n = stations_.size();
  if (traffic_.size() != n * years_.size() * kNumColumns) {
    fail(ErrorCategory::data, "traffic has " + std::to_string(traffic_.size()) + " values, expected " +
                                  std::to_string(n) + " stations x " +
                                  std::to_string(years_.size()) + " years x 10");
  }
  if (social_.size() != n) fail(ErrorCategory::data, "social features missing for some stations");
  if (base_graph_.size() != n) fail(ErrorCategory::data, "base graph size does not match stations");
  for (std::size_t i = 0; i < traffic_.size(); ++i) {
    if (!std::isfinite(traffic_[i]) || traffic_[i] < 0.0) {
      const std::size_t s = i / (years_.size() * kNumColumns);
      fail(ErrorCategory::data, "station '" + stations_[s] + "' has negative or non-finite flow");
    }
  }
  std::vector<bool> on_line(n, false);
  for (const auto& line : lines_) {
    for (std::size_t s : line.stations) {
      if (s >= n) fail(ErrorCategory::reference, "line '" + line.id + "' names an unknown station");
      on_line[s] = true;
    }
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (!on_line[s] && !lines_.empty()) {
      fail(ErrorCategory::data, "station '" + stations_[s] + "' is on no line");
    }
  }
}

std::size_t StationDataset::year_index(int year) const {
  auto it = std::find(years_.begin(), years_.end(), year);
  if (it == years_.end()) fail(ErrorCategory::data, "year " + std::to_string(year) + " not in dataset");
  return static_cast<std::size_t>(it - years_.begin());
}

std::size_t StationDataset::station_index(std::string_view id) const {
  auto it = std::find(stations_.begin(), stations_.end(), id);
  if (it == stations_.end()) {
    fail(ErrorCategory::reference, "unknown station '" + std::string(id) + "'");
  }
  return static_cast<std::size_t>(it - stations_.begin());
}

Hypergraph StationDataset::hypergraph() const {
  std::vector<std::vector<std::size_t>> members;
  members.reserve(lines_.size());
  for (const auto& line : lines_) members.push_back(line.stations);
  return Hypergraph::from_members(stations_.size(), members, stations_);
}

StationDataset StationDataset::subset(const std::vector<std::size_t>& stations) const {
  std::vector<std::string> ids;
  std::vector<SocialFeatures> social;
  std::vector<double> traffic;
  std::vector<long> remap(stations_.size(), -1);
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const std::size_t s = stations[i];
    if (s >= stations_.size()) fail(ErrorCategory::reference, "subset names an unknown station");
    remap[s] = static_cast<long>(i);
    ids.push_back(stations_[s]);
    social.push_back(social_[s]);
    const auto begin = traffic_.begin() + static_cast<std::ptrdiff_t>(s * years_.size() * kNumColumns);
    traffic.insert(traffic.end(), begin,
                   begin + static_cast<std::ptrdiff_t>(years_.size() * kNumColumns));
  }
  std::vector<Line> lines;
  for (const auto& line : lines_) {
    Line kept{line.id, {}};
    for (std::size_t s : line.stations) {
      if (remap[s] >= 0) kept.stations.push_back(static_cast<std::size_t>(remap[s]));
    }
    if (kept.stations.size() >= 2) lines.push_back(std::move(kept));
  }
  StationDataset out;
  out.stations_ = std::move(ids);
  out.years_ = years_;
  out.traffic_ = std::move(traffic);
  out.social_ = std::move(social);
  out.lines_ = std::move(lines);
  out.base_graph_ = base_graph_.induced(stations);
  return out;
}

bool operator==(const StationDataset& a, const StationDataset& b) {
  if (a.stations_ != b.stations_ || a.years_ != b.years_ || a.traffic_ != b.traffic_) return false;
  if (a.social_.size() != b.social_.size() || a.lines_.size() != b.lines_.size()) return false;
  for (std::size_t i = 0; i < a.social_.size(); ++i) {
    const auto& x = a.social_[i];
    const auto& y = b.social_[i];
    if (x.zone != y.zone || x.housing_price != y.housing_price ||
        x.life_expectancy != y.life_expectancy) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.lines_.size(); ++i) {
    if (a.lines_[i].id != b.lines_[i].id || a.lines_[i].stations != b.lines_[i].stations) return false;
  }
  return a.base_graph_.adjacency() == b.base_graph_.adjacency();
}

TaskMatrix build_task(const StationDataset& dataset, int year, Task task) {
  const auto columns = task.feature_columns();
  const std::size_t y = dataset.year_index(year);
  const std::size_t n = dataset.num_stations();
  TaskMatrix m{Tensor(n, kNumFeatures), Tensor(n, 1), task, year};
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < columns.size(); ++j) m.features(s, j) = dataset.flow(s, y, columns[j]);
    m.target(s, 0) = dataset.flow(s, y, task.target_column());
  }
  return m;
}

std::array<double, 3> social_diff_features(const StationDataset& dataset, std::string_view a,
                                           std::string_view b, const SocialScaler& scaler) {
  const auto& social = dataset.social();
  return scaler.diff(social[dataset.station_index(a)], social[dataset.station_index(b)]);
}

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "traffic.csv", dir / "social.csv", dir / "edges.csv", dir / "lines.csv"};
}

StationDataset load_dataset(const DatasetPaths& paths) {
  // Station order is the order of social.csv.
  const auto social_table = csv::read(
      paths.social, {"station_id", "zone", "housing_price", "life_expectancy"});
  std::vector<std::string> stations;
  std::vector<SocialFeatures> social;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& [line_no, row] : social_table.rows) {
    const std::string ctx = paths.social.string() + ":" + std::to_string(line_no);
    if (!index.emplace(row[0], stations.size()).second) {
      fail(ErrorCategory::data, ctx + ": duplicate station '" + row[0] + "'");
    }
    SocialFeatures f;
    f.zone = static_cast<int>(csv::parse_int(row[1], ctx));
    f.housing_price = csv::parse_double(row[2], ctx);
    f.life_expectancy = csv::parse_double(row[3], ctx);
    if (!(f.housing_price > 0.0) || !(f.life_expectancy > 0.0) || !std::isfinite(f.housing_price) ||
        !std::isfinite(f.life_expectancy)) {
      fail(ErrorCategory::data, ctx + ": social features must be positive and finite");
    }
    stations.push_back(row[0]);
    social.push_back(f);
  }
  auto lookup = [&](const std::string& id, const std::string& ctx) {
    auto it = index.find(id);
    if (it == index.end()) {
      fail(ErrorCategory::reference, ctx + ": unknown station '" + id + "'");
    }
    return it->second;
  };

  const auto traffic_table =
      csv::read(paths.traffic, {"station_id", "year", "direction", "timestamp", "flow"});
  std::map<std::tuple<std::size_t, int, int>, double> cells;
  std::set<int> year_set;
  for (const auto& [line_no, row] : traffic_table.rows) {
    const std::string ctx = paths.traffic.string() + ":" + std::to_string(line_no);
    const std::size_t s = lookup(row[0], ctx);
    const int year = static_cast<int>(csv::parse_int(row[1], ctx));
    const Direction dir = parse_direction(row[2], ctx);
    const int ts = parse_timestamp(row[3], ctx);
    const double flow = csv::parse_double(row[4], ctx);
    if (!std::isfinite(flow) || flow < 0.0) {
      fail(ErrorCategory::data, ctx + ": flow must be nonnegative and finite, got " + row[4]);
    }
    if (!cells.emplace(std::make_tuple(s, year, column_index(ts, dir)), flow).second) {
      fail(ErrorCategory::data, ctx + ": duplicate traffic entry");
    }
    year_set.insert(year);
  }
  std::vector<int> years(year_set.begin(), year_set.end());
  std::vector<double> traffic(stations.size() * years.size() * kNumColumns, 0.0);
  for (std::size_t s = 0; s < stations.size(); ++s) {
    for (std::size_t y = 0; y < years.size(); ++y) {
      for (int c = 0; c < kNumColumns; ++c) {
        auto it = cells.find(std::make_tuple(s, years[y], c));
        if (it == cells.end()) {
          fail(ErrorCategory::data, paths.traffic.string() + ": station '" + stations[s] +
                                        "' is missing " + std::string(timestamp_name(c / 2 + 1)) +
                                        "-" + std::string(direction_name(Direction(c % 2))) +
                                        " for year " + std::to_string(years[y]));
        }
        traffic[(s * years.size() + y) * kNumColumns + c] = it->second;
      }
    }
  }

  const auto edge_table = csv::read(paths.edges, {"station_id_a", "station_id_b"});
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& [line_no, row] : edge_table.rows) {
    const std::string ctx = paths.edges.string() + ":" + std::to_string(line_no);
    edges.emplace_back(lookup(row[0], ctx), lookup(row[1], ctx));
    if (edges.back().first == edges.back().second) {
      fail(ErrorCategory::data, ctx + ": self-loop at '" + row[0] + "'");
    }
  }

  const auto line_table = csv::read(paths.lines, {"line_id", "station_id"});
  std::vector<Line> lines;
  for (const auto& [line_no, row] : line_table.rows) {
    const std::string ctx = paths.lines.string() + ":" + std::to_string(line_no);
    const std::size_t s = lookup(row[1], ctx);
    auto it = std::find_if(lines.begin(), lines.end(), [&](const Line& l) { return l.id == row[0]; });
    if (it == lines.end()) {
      lines.push_back({row[0], {}});
      it = lines.end() - 1;
    }
    if (std::find(it->stations.begin(), it->stations.end(), s) == it->stations.end()) {
      it->stations.push_back(s);
    }
  }

  BaseGraph graph(stations, edges);
  return StationDataset(std::move(stations), std::move(years), std::move(traffic),
                        std::move(social), std::move(lines), std::move(graph));
}

void save_dataset(const StationDataset& dataset, const DatasetPaths& paths) {
  const auto& stations = dataset.stations();
  {
    csv::Writer w(paths.social);
    w.row({"station_id", "zone", "housing_price", "life_expectancy"});
    for (std::size_t s = 0; s < stations.size(); ++s) {
      const auto& f = dataset.social()[s];
      w.row({stations[s], std::to_string(f.zone), csv::format_double(f.housing_price),
             csv::format_double(f.life_expectancy)});
    }
    w.close();
  }
  {
    csv::Writer w(paths.traffic);
    w.row({"station_id", "year", "direction", "timestamp", "flow"});
    for (std::size_t s = 0; s < stations.size(); ++s) {
      for (std::size_t y = 0; y < dataset.num_years(); ++y) {
        for (int c = 0; c < kNumColumns; ++c) {
          w.row({stations[s], std::to_string(dataset.years()[y]),
                 std::string(direction_name(Direction(c % 2))),
                 std::string(timestamp_name(c / 2 + 1)), csv::format_double(dataset.flow(s, y, c))});
        }
      }
    }
    w.close();
  }
  {
    csv::Writer w(paths.edges);
    w.row({"station_id_a", "station_id_b"});
    for (auto [a, b] : dataset.base_graph().edges()) w.row({stations[a], stations[b]});
    w.close();
  }
  {
    csv::Writer w(paths.lines);
    w.row({"line_id", "station_id"});
    for (const auto& line : dataset.lines()) {
      for (std::size_t s : line.stations) w.row({line.id, stations[s]});
    }
    w.close();
  }
}

}  // namespace metroflow
