#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lvsr {

/// Failure category; each maps onto a C status code and a CLI exit code.
enum class ErrorKind {
    argument,
    parse,
    bounds,
    numeric,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& what) : Error(ErrorKind::argument, what) {}
};

struct BoundsError : Error {
    explicit BoundsError(const std::string& what) : Error(ErrorKind::bounds, what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace lvsr
