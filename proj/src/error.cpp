#include "bcmarket/error.hpp"

namespace bcmarket {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::domain: return "domain error";
        case ErrorCode::validation: return "validation error";
        case ErrorCode::parse: return "parse error";
        case ErrorCode::non_convergence: return "non-convergence";
        case ErrorCode::trivial_equilibrium: return "trivial equilibrium";
        case ErrorCode::unsupported_scenario: return "unsupported scenario";
        case ErrorCode::internal: return "internal error";
    }
    return "unknown error";
}

}  // namespace bcmarket
