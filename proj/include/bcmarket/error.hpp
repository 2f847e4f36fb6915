#pragma once

#include <stdexcept>
#include <string>

namespace bcmarket {

enum class ErrorCode {
    domain,               // argument outside a function's domain
    validation,           // malformed or inconsistent scenario data
    parse,                // scenario text is not valid JSON
    non_convergence,      // iteration or line search limit reached
    trivial_equilibrium,  // market clears only at zero consumption
    unsupported_scenario, // solver cannot handle this instance (e.g. zero budget in primal)
    internal,
};

const char* to_string(ErrorCode code) noexcept;

class MarketError : public std::runtime_error {
public:
    MarketError(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_domain(const std::string& what) {
    throw MarketError(ErrorCode::domain, what);
}

}  // namespace bcmarket
