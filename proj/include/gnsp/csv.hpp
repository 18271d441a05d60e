#ifndef GNSP_CSV_HPP
#define GNSP_CSV_HPP

#include <istream>
#include <string>
#include <vector>

#include "gnsp/error.hpp"

namespace gnsp {

// Shortest decimal form that round-trips to the same double.
std::string format_double(double value);

class CsvError : public Error {
public:
    CsvError(const std::string& what, std::size_t row) : Error(what), row_(row) {}
    // 1-based line number in the file (the header is line 1).
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines;  // 1-based file line of each row

    // Index of a header column, or -1.
    int column(const std::string& name) const;
};

// Plain comma-separated values without quoting. Every row must have as many
// fields as the header; blank lines are skipped.
CsvTable read_csv(std::istream& in);

double parse_double(const std::string& text, std::size_t row);

}  // namespace gnsp

#endif  // GNSP_CSV_HPP
