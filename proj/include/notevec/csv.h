#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace notevec::csv {

using Record = std::vector<std::string>;

/// RFC 4180 style reader. Quoted fields may contain commas, doubled quotes,
/// and newlines. CRLF line endings are accepted.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Reads the next record; std::nullopt at end of input. Throws a format
  /// error (naming the 1-based record number) on an unterminated quote.
  std::optional<Record> next();

  /// 1-based number of the record most recently returned.
  std::size_t record_number() const { return record_number_; }

 private:
  std::istream& in_;
  std::size_t record_number_ = 0;
};

/// Reads a whole file. The first record is returned as the header.
struct Table {
  Record header;
  std::vector<Record> rows;

  /// Column position of `name`, or std::nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Column position of `name`; throws a schema error naming the column.
  std::size_t require_column(std::string_view name,
                             const std::filesystem::path& source) const;
};

Table read_file(const std::filesystem::path& path, bool has_header = true);

void write_field(std::ostream& out, std::string_view field);
void write_record(std::ostream& out, const Record& record);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);
/// Fixed-point text with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

/// Strict numeric parsing of a whole field (surrounding blanks allowed).
std::optional<double> parse_real(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

}  // namespace notevec::csv
