#include "notevec/csv.h"

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "notevec/error.h"

namespace notevec::csv {
namespace {

TEST(CsvReader, UnterminatedQuoteIsFormatError) {
  std::istringstream in("a,\"open\n");
  Reader reader(in);
  try {
    reader.next();
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::format);
  }
}

TEST(CsvReader, EmptyFieldsAndTrailingComma) {
  std::istringstream in("a,,b,\n");
  Reader reader(in);
  EXPECT_EQ(*reader.next(), (Record{"a", "", "b", ""}));
  EXPECT_FALSE(reader.next());
}

TEST(CsvRecords, WriteThenReadIsIdentity) {
  std::mt19937_64 rng(3);
  const std::string alphabet = "ab,\"\n\r x";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 6), width(1, 4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Record> records(3);
    std::ostringstream out;
    for (auto& r : records) {
      r.resize(width(rng));
      for (auto& f : r) {
        for (std::size_t i = len(rng); i > 0; --i) f.push_back(alphabet[pick(rng)]);
      }
      write_record(out, r);
    }
    std::istringstream in(out.str());
    Reader reader(in);
    for (const auto& r : records) EXPECT_EQ(*reader.next(), r);
    EXPECT_FALSE(reader.next());
  }
}

TEST(Numbers, RealFormattingRoundTrips) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = normal(rng) / (i + 1);
    EXPECT_EQ(*parse_real(format_real(x)), x);
  }
  EXPECT_EQ(format_fixed(0.70929807, 6), "0.709298");
  EXPECT_EQ(format_fixed(0.65281, 4), "0.6528");
}

TEST(Numbers, StrictParsing) {
  EXPECT_FALSE(parse_real("1.5x"));
  EXPECT_FALSE(parse_real(""));
  EXPECT_EQ(*parse_real(" -2.5 "), -2.5);
  EXPECT_FALSE(parse_integer("3.0"));
  EXPECT_EQ(*parse_integer("+30"), 30);
}

}  // namespace
}  // namespace notevec::csv
