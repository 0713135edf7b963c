#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace covaroc {

// Minimal comma-separated table: header row required, UTF-8, no quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based, per data row

    std::optional<std::size_t> column(const std::string& name) const;
    // Throws a schema error naming the column when absent.
    std::size_t require_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& origin);

// Throws a row-level error carrying the line number on bad cells.
double parse_cell_double(const std::string& cell, const std::string& column,
                         std::size_t line);
bool parse_cell_bool(const std::string& cell, const std::string& column,
                     std::size_t line);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void add_row(const std::vector<std::string>& cells);
    const std::string& text() const { return buf_; }
    void write(const std::string& path) const;

private:
    std::size_t columns_;
    std::string buf_;
};

}  // namespace covaroc
