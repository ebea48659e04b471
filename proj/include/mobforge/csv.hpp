#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mobforge::csv {

struct Row {
    std::size_t line = 0;  // 1-based line where the record starts
    std::vector<std::string> fields;
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    // Column index by exact header name.
    std::optional<std::size_t> column(std::string_view name) const;
};

// RFC 4180 style: comma separated, double-quoted fields may hold commas,
// quotes ("") and newlines. Blank lines are skipped. A UTF-8 BOM is ignored.
Table parse(std::istream& in);
Table read_file(const std::string& path);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace mobforge::csv
