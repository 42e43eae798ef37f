#pragma once

#include <stdexcept>
#include <string>

namespace lifecal {

// Malformed input file (CSV schema, checkpoint header, config).
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Premium coefficient non-positive: expenses exceed expected premium income.
class UnpriceableError : public std::runtime_error {
public:
    explicit UnpriceableError(const std::string& what) : std::runtime_error(what) {}
};

// Training diverged (NaN loss or non-finite parameters).
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint does not match the data it is applied to.
class ConsistencyError : public std::runtime_error {
public:
    explicit ConsistencyError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace lifecal
