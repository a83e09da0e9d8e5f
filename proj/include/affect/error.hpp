#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace affect {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file: missing columns, ragged rows, wrong point counts.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A cell or token could not be read as a number.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row)
        : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// An argument lies outside its documented domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// The input is valid but carries no usable information (constant series,
/// collinear template, ...).
class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// Configuration or dataset manifest failed validation.
class ValidationError : public Error {
public:
    using Error::Error;
};

using WarningSink = std::function<void(std::string_view)>;

inline WarningSink& warning_sink() {
    static WarningSink sink = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}

inline void warn(std::string_view msg) {
    if (auto& s = warning_sink()) s(msg);
}

}  // namespace affect
