#include "metroflow/util/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metroflow/error.hpp"

namespace metroflow::csv {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

}  // namespace

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string_view field =
        line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.emplace_back(trim(field));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Table read(const std::filesystem::path& path, const std::vector<std::string>& expected) {
  std::ifstream in(path);
  if (!in) fail(ErrorCategory::io, "cannot open '" + path.string() + "' for reading");
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      if (line_no == 1 && !fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) {
        fields[0].erase(0, 3);
      }
      if (fields != expected) {
        fail(ErrorCategory::data, path.string() + ": header must be '" + join(expected) +
                                      "', found '" + join(fields) + "'");
      }
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != expected.size()) {
      fail(ErrorCategory::data, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                    std::to_string(expected.size()) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    table.rows.emplace_back(line_no, std::move(fields));
  }
  if (!have_header) fail(ErrorCategory::data, path.string() + ": missing header row");
  return table;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

double parse_double(std::string_view text, const std::string& context) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    fail(ErrorCategory::data, context + ": '" + std::string(text) + "' is not a number");
  }
  return value;
}

long long parse_int(std::string_view text, const std::string& context) {
  long long value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    fail(ErrorCategory::data, context + ": '" + std::string(text) + "' is not an integer");
  }
  return value;
}

Writer::Writer(const std::filesystem::path& path) : path_(path) {}

Writer& Writer::row(const std::vector<std::string>& fields) {
  buffer_ += join(fields);
  buffer_ += '\n';
  return *this;
}

void Writer::close() {
  if (closed_) return;
  closed_ = true;
  std::error_code ec;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
  std::ofstream out(path_, std::ios::binary);
  if (!out) fail(ErrorCategory::io, "cannot open '" + path_.string() + "' for writing");
  out << buffer_;
  if (!out) fail(ErrorCategory::io, "failed writing '" + path_.string() + "'");
}

Writer::~Writer() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

}  // namespace metroflow::csv
