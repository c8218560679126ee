#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for an op.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A precondition of a call was violated (e.g. backward on a non-scalar).
class ContractError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dataset content is unusable (empty train split, too few entities, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed dataset or checkpoint text; carries the file and 1-based line.
class ParseError : public DataError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : DataError(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

    const std::string& file() const { return file_; }
    std::size_t line() const { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(std::size_t step, const std::string& what)
        : Error("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

} // namespace kge
