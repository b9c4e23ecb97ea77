#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace metroflow::csv {

// Plain comma-separated files: no quoting, one header row, fields trimmed.

struct Table {
  std::vector<std::string> header;
  /// Each row with its 1-based line number in the file.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

/// Reads a file and checks that its header matches `expected` exactly.
Table read(const std::filesystem::path& path, const std::vector<std::string>& expected);

std::vector<std::string> split(std::string_view line);

/// Shortest text that parses back to the same double ("nan" for NaN).
std::string format_double(double value);
double parse_double(std::string_view text, const std::string& context);
long long parse_int(std::string_view text, const std::string& context);

/// Opens for writing (creating parent directories) or throws an io error.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  Writer& row(const std::vector<std::string>& fields);
  void close();
  ~Writer();

 private:
  std::filesystem::path path_;
  std::string buffer_;
  bool closed_ = false;
};

}  // namespace metroflow::csv
