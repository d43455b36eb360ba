// SPDX-License-Identifier: MIT
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ddeps {

/// Failure categories. Callers branch on these, so keep them stable.
enum class ErrorKind {
    InvalidArgument,  ///< precondition on user input violated
    Parse,            ///< expression syntax error (message carries byte offset)
    UnknownSymbol,    ///< unbound name or unknown function
    Domain,           ///< nonlinearity evaluated outside its smooth domain
    Conditioning,     ///< (D - lambda I) too close to singular
    Singular,         ///< characteristic matrix or Jacobian singular
    NoConvergence,    ///< iteration budget exhausted or diverged
    Simplicity,       ///< critical root not simple
    StepUnderflow,    ///< integrator or continuation step below floor
    NonFinite,        ///< NaN/Inf produced
    NotOscillatory,   ///< too few crossings to define a period
    NotPeriodic,      ///< crossing spacings too irregular
    NoPeriodJump,     ///< bisection range holds no period doubling
    Io,               ///< file could not be read or written
};

[[nodiscard]] constexpr std::string_view kind_name(ErrorKind k) noexcept {
    switch (k) {
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::UnknownSymbol: return "unknown_symbol";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Conditioning: return "conditioning";
        case ErrorKind::Singular: return "singular";
        case ErrorKind::NoConvergence: return "no_convergence";
        case ErrorKind::Simplicity: return "simplicity";
        case ErrorKind::StepUnderflow: return "step_underflow";
        case ErrorKind::NonFinite: return "non_finite";
        case ErrorKind::NotOscillatory: return "not_oscillatory";
        case ErrorKind::NotPeriodic: return "not_periodic";
        case ErrorKind::NoPeriodJump: return "no_period_jump";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Parse error with the byte offset of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : Error(ErrorKind::Parse, msg + " at offset " + std::to_string(offset)), offset_(offset) {}
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace ddeps
