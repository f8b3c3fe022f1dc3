#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace habtox::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source text
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

// Comma-separated, optional double-quoted fields, LF or CRLF line ends.
// Blank lines and lines starting with '#' are skipped. An empty text yields an
// empty table with no header.
Table parse(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view text);

// Shortest text that parses back to the same double.
std::string format_double(double value);
std::string format_optional(const std::optional<double>& value);

std::optional<double> parse_double(std::string_view text);

class Writer {
 public:
  explicit Writer(std::vector<std::string> header);

  Writer& field(std::string_view text);
  Writer& field(double value);
  Writer& field(const std::optional<double>& value);
  Writer& field(long long value);
  Writer& field(int value) { return field(static_cast<long long>(value)); }
  Writer& field(std::size_t value) { return field(static_cast<long long>(value)); }
  void end_row();

  const std::string& str() const { return out_; }

 private:
  void separator();

  std::string out_;
  std::size_t columns_ = 0;
  std::size_t current_ = 0;
};

}  // namespace habtox::csv
