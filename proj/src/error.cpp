#include "abandonq/error.hpp"

namespace abandonq {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidParams: return "InvalidParams";
        case Errc::TabulationFailure: return "TabulationFailure";
        case Errc::UnsupportedFamily: return "UnsupportedFamily";
        case Errc::DomainError: return "DomainError";
        case Errc::EventOrderViolation: return "EventOrderViolation";
        case Errc::InsufficientReplications: return "InsufficientReplications";
        case Errc::NotOverloaded: return "NotOverloaded";
        case Errc::NoRoot: return "NoRoot";
        case Errc::HazardUnavailable: return "HazardUnavailable";
        case Errc::MemoryBudgetExceeded: return "MemoryBudgetExceeded";
        case Errc::TruncationTooSmall: return "TruncationTooSmall";
        case Errc::SingularSystem: return "SingularSystem";
        case Errc::NonConvergence: return "NonConvergence";
        case Errc::ReferenceMismatch: return "ReferenceMismatch";
        case Errc::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace abandonq
