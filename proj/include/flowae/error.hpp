#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowae {

/// Bad arguments or configuration. CLI exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. CLI exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public DataError {
public:
    SchemaError(const std::string& message, std::string column)
        : DataError(message), column_(std::move(column)) {}
    const std::string& column() const { return column_; }

private:
    std::string column_;
};

/// Unparseable or invalid cell. `row` counts data rows from 1 (header excluded).
class RowError : public DataError {
public:
    RowError(std::size_t row, std::string column, const std::string& detail)
        : DataError("row " + std::to_string(row) + ", column '" + column + "': " + detail),
          row_(row), column_(std::move(column)) {}
    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

class EmptyDatasetError : public DataError {
public:
    using DataError::DataError;
};

/// Truncated, corrupt, or incompatible artifact file.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// Non-finite training loss. CLI exit code 3.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(int epoch)
        : std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
          epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

}  // namespace flowae
