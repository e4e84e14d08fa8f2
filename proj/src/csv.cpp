#include "metaens/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "metaens/errors.hpp"

namespace metaens {

static std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path);
    CsvTable t;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
        auto cells = split_line(line);
        if (lineno == 1) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            std::ostringstream os;
            os << path << ": row " << lineno << " has " << cells.size()
               << " cells, header has " << t.header.size();
            throw DataError(os.str());
        }
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw DataError("empty CSV file: " + path);
    return t;
}

double parse_cell(const std::string& cell, size_t row, size_t col, const std::string& path) {
    if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NAN")
        return std::numeric_limits<double>::quiet_NaN();
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        std::ostringstream os;
        os << path << ": row " << row << ", column " << col << ": not a number: '" << cell << "'";
        throw DataError(os.str());
    }
    return v;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace metaens
