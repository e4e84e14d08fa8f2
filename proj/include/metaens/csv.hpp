#pragma once

#include <string>
#include <vector>

namespace metaens {

// Minimal CSV support for numeric tables: comma separator, '.' decimal point,
// one header row, no quoting. Parse errors name the offending row and column.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // raw cells, unparsed
};

CsvTable read_csv(const std::string& path);

// Cell -> double. Empty cells and the literals nan/NaN parse as quiet NaN
// (missing value); anything else non-numeric throws DataError with location.
double parse_cell(const std::string& cell, size_t row, size_t col, const std::string& path);

// %.17g: round-trips every finite double exactly.
std::string format_double(double v);

}  // namespace metaens
