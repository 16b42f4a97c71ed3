#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace bflow {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Input data is malformed or inconsistent with the model.
class DataError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to reach its tolerance. Carries the best
/// estimate obtained and the error bound actually achieved, when known.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what,
                   std::optional<double> best_estimate = std::nullopt,
                   std::optional<double> achieved_error = std::nullopt);

    std::optional<double> best_estimate() const noexcept { return best_; }
    std::optional<double> achieved_error() const noexcept { return achieved_; }

private:
    std::optional<double> best_;
    std::optional<double> achieved_;
};

namespace detail {

// Throws DomainError unless `ok`.
inline void require(bool ok, const char* message)
{
    if (!ok) {
        throw DomainError(message);
    }
}

// Rethrows the exception in flight with `context` prefixed to its message,
// keeping its type. Call only from inside a catch block.
[[noreturn]] void rethrow_with_context(const std::string& context);

} // namespace detail

} // namespace bflow
