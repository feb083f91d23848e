#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace semistatic::bench {

inline constexpr const char* kCsvHeader = "scenario,variant,iter,value,counter";

struct CsvRow {
  std::string scenario;
  std::string variant;
  std::uint64_t iter = 0;
  std::uint64_t value = 0;
  std::string counter;  // may be empty
};

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const CsvRow& row);

/// Parses a whole CSV stream, header included. Throws std::runtime_error on a
/// malformed header or row.
std::vector<CsvRow> read_csv(std::istream& in);

}  // namespace semistatic::bench
