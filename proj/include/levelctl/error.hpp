#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace levelctl {

enum class ErrorKind {
    invalid_argument,
    quantity_overflow,
    integration_failure,
    non_monotone_time,
    degenerate_gain,
    invalid_measurement,
    fixed_point_not_conscious,
    orbit_diverged,
    no_flip_in_bracket,
    requires_idealized_mode,
    usage,
    io
};

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid argument";
        case ErrorKind::quantity_overflow: return "quantity overflow";
        case ErrorKind::integration_failure: return "integration failure";
        case ErrorKind::non_monotone_time: return "non-monotone time";
        case ErrorKind::degenerate_gain: return "degenerate gain estimate";
        case ErrorKind::invalid_measurement: return "invalid measurement pair";
        case ErrorKind::fixed_point_not_conscious: return "fixed point not conscious";
        case ErrorKind::orbit_diverged: return "orbit diverged";
        case ErrorKind::no_flip_in_bracket: return "no flip in bracket";
        case ErrorKind::requires_idealized_mode: return "equivalence requires idealized mode";
        case ErrorKind::usage: return "usage error";
        case ErrorKind::io: return "I/O error";
    }
    return "unknown error";
}

/// Library-wide exception. `kind()` is stable; `what()` carries detail.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + (detail.empty() ? "" : ": " + detail)),
          kind_(kind) {}

    explicit Error(ErrorKind kind) : Error(kind, "") {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

namespace detail {

inline void require(bool condition, std::string_view what) {
    if (!condition) throw Error(ErrorKind::invalid_argument, std::string(what));
}

}  // namespace detail

}  // namespace levelctl
