#pragma once

#include <stdexcept>
#include <string>

namespace covaroc {

// Failure categories. Bad user input (flags, config documents, data files)
// maps to CLI exit code 2; failures during computation map to exit code 1.
enum class ErrorKind {
    MalformedInput,
    Config,
    Schema,
    RowParse,
    EmptyDataset,
    DegenerateDimension,
    DegenerateRange,
    EmptyBasis,
    Numeric,
    Precondition,
    DegenerateOracle,
    Io,
    Usage,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    bool is_usage() const noexcept {
        return kind_ == ErrorKind::Config || kind_ == ErrorKind::Schema ||
               kind_ == ErrorKind::Usage || kind_ == ErrorKind::MalformedInput ||
               kind_ == ErrorKind::RowParse || kind_ == ErrorKind::EmptyDataset;
    }

private:
    ErrorKind kind_;
};

}  // namespace covaroc
