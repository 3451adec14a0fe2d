#include "notevec/csv.h"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "notevec/error.h"

namespace notevec::csv {

namespace {

std::string_view trim(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  return text;
}

}  // namespace

std::optional<Record> Reader::next() {
  Record record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool saw_any = false;

  for (;;) {
    const int c = in_.get();
    if (c == std::char_traits<char>::eof()) {
      if (in_quotes) {
        throw Error(ErrorCategory::format,
                    "unterminated quoted field in record " + std::to_string(record_number_ + 1));
      }
      if (!saw_any) return std::nullopt;
      record.push_back(std::move(field));
      ++record_number_;
      return record;
    }
    saw_any = true;
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw Error(ErrorCategory::format,
                      "stray quote inside unquoted field in record " +
                          std::to_string(record_number_ + 1));
        }
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
        break;
      case '\r':
        if (in_.peek() == '\n') in_.get();
        [[fallthrough]];
      case '\n':
        record.push_back(std::move(field));
        ++record_number_;
        return record;
      default:
        if (field_was_quoted) {
          throw Error(ErrorCategory::format,
                      "text after closing quote in record " + std::to_string(record_number_ + 1));
        }
        field.push_back(ch);
    }
  }
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t Table::require_column(std::string_view name,
                                  const std::filesystem::path& source) const {
  if (auto pos = column(name)) return *pos;
  throw Error(ErrorCategory::schema,
              source.string() + ": missing required column '" + std::string(name) + "'");
}

Table read_file(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path.string());
  Reader reader(in);
  Table table;
  try {
    if (has_header) {
      auto header = reader.next();
      if (!header) {
        throw Error(ErrorCategory::schema, path.string() + ": empty file, expected a header row");
      }
      // Excel-style UTF-8 byte order mark.
      if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) {
        header->front().erase(0, 3);
      }
      table.header = std::move(*header);
    }
    while (auto record = reader.next()) {
      // A lone blank line is not a record.
      if (record->size() == 1 && record->front().empty()) continue;
      table.rows.push_back(std::move(*record));
    }
  } catch (const Error& e) {
    if (e.category() == ErrorCategory::format) {
      throw Error(ErrorCategory::format, path.string() + ": " + e.what());
    }
    throw;
  }
  return table;
}

void write_field(std::ostream& out, std::string_view field) {
  const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) {
    out << field;
    return;
  }
  out << '"';
  for (char ch : field) {
    if (ch == '"') out << '"';
    out << ch;
  }
  out << '"';
}

void write_record(std::ostream& out, const Record& record) {
  for (std::size_t i = 0; i < record.size(); ++i) {
    if (i > 0) out << ',';
    write_field(out, record[i]);
  }
  out << '\n';
}

std::string format_real(double value) {
  if (std::isnan(value)) return "NA";
  std::array<char, 64> buffer{};
  auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buffer.data(), end);
}

std::string format_fixed(double value, int decimals) {
  std::array<char, 128> buffer{};
  auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value,
                                 std::chars_format::fixed, decimals);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buffer.data(), end);
}

std::optional<double> parse_real(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<long long> parse_integer(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

}  // namespace notevec::csv
