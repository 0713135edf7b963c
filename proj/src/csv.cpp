#include "covaroc/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "covaroc/error.hpp"

namespace covaroc {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

std::size_t CsvTable::require_column(const std::string& name) const {
    auto idx = column(name);
    if (!idx)
        throw Error(ErrorKind::Schema, "missing column '" + name + "'");
    return *idx;
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
    CsvTable table;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (lineno == 1) {
            table.header = split_fields(line);
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != table.header.size())
            throw Error(ErrorKind::RowParse,
                        origin + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(lineno);
    }
    if (table.header.empty())
        throw Error(ErrorKind::Schema, origin + ": missing header row");
    return table;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path);
}

double parse_cell_double(const std::string& cell, const std::string& column,
                         std::size_t line) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0' || errno == ERANGE)
        throw Error(ErrorKind::RowParse, "line " + std::to_string(line) +
                                             ": cannot parse '" + cell +
                                             "' in column '" + column + "'");
    return v;
}

bool parse_cell_bool(const std::string& cell, const std::string& column,
                     std::size_t line) {
    if (cell == "1" || cell == "true") return true;
    if (cell == "0" || cell == "false") return false;
    throw Error(ErrorKind::RowParse, "line " + std::to_string(line) +
                                         ": '" + cell + "' in column '" + column +
                                         "' is not a boolean (0,1,true,false)");
}

CsvWriter::CsvWriter(std::vector<std::string> header)
    : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) buf_.push_back(',');
        buf_ += header[i];
    }
    buf_.push_back('\n');
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
        throw Error(ErrorKind::Precondition, "csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buf_.push_back(',');
        buf_ += cells[i];
    }
    buf_.push_back('\n');
}

void CsvWriter::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::Io, "cannot write '" + path + "'");
    out << buf_;
}

}  // namespace covaroc
