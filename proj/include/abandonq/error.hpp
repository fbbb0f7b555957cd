#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace abandonq {

enum class Errc {
    InvalidParams,
    TabulationFailure,
    UnsupportedFamily,
    DomainError,
    EventOrderViolation,
    InsufficientReplications,
    NotOverloaded,
    NoRoot,
    HazardUnavailable,
    MemoryBudgetExceeded,
    TruncationTooSmall,
    SingularSystem,
    NonConvergence,
    ReferenceMismatch,
    ConfigError,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the Errc kinds.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what);
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace abandonq
