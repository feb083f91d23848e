#include "semistatic/bench/csv.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace semistatic::bench {

void write_csv_header(std::ostream& out) { out << kCsvHeader << '\n'; }

void write_csv_row(std::ostream& out, const CsvRow& row) {
  out << row.scenario << ',' << row.variant << ',' << row.iter << ',' << row.value << ','
      << row.counter << '\n';
}

namespace {

std::uint64_t parse_u64(const std::string& field, std::size_t line) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (field.empty() || used != field.size()) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

}  // namespace

std::vector<CsvRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::runtime_error("csv: missing or unexpected header");
  }
  std::vector<CsvRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) {
      fields.push_back(f);
    }
    if (!line.empty() && line.back() == ',') {
      fields.emplace_back();
    }
    if (fields.size() != 5) {
      throw std::runtime_error("csv line " + std::to_string(number) + ": expected 5 fields");
    }
    rows.push_back(CsvRow{fields[0], fields[1], parse_u64(fields[2], number),
                          parse_u64(fields[3], number), fields[4]});
  }
  return rows;
}

}  // namespace semistatic::bench
