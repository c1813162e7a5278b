#pragma once

#include <stdexcept>
#include <string>

namespace ccswap {

// Base of every library error. name() is the stable identifier printed by the CLI.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* name() const noexcept { return "Error"; }
};

#define CCSWAP_DECLARE_ERROR(Name)                                      \
    class Name : public Error {                                         \
    public:                                                             \
        using Error::Error;                                             \
        const char* name() const noexcept override { return #Name; }    \
    }

CCSWAP_DECLARE_ERROR(ShapeError);
CCSWAP_DECLARE_ERROR(ParamError);
CCSWAP_DECLARE_ERROR(TimestepError);
CCSWAP_DECLARE_ERROR(TokenLimitExceeded);
CCSWAP_DECLARE_ERROR(PromptError);
CCSWAP_DECLARE_ERROR(ContractError);
CCSWAP_DECLARE_ERROR(DegenerateAttention);
CCSWAP_DECLARE_ERROR(EmptyMask);
CCSWAP_DECLARE_ERROR(UnsupportedBackend);
CCSWAP_DECLARE_ERROR(NumericalError);
CCSWAP_DECLARE_ERROR(ScorerUnavailable);
CCSWAP_DECLARE_ERROR(LayoutError);
CCSWAP_DECLARE_ERROR(ConfigError);
CCSWAP_DECLARE_ERROR(IoError);

#undef CCSWAP_DECLARE_ERROR

// Raised by multi-stage runs; carries the failing stage and the inner error name.
class StageError : public Error {
public:
    StageError(std::size_t stage, std::string inner_name, const std::string& what)
        : Error("stage " + std::to_string(stage) + ": " + inner_name + ": " + what),
          stage_(stage),
          inner_(std::move(inner_name)) {}

    const char* name() const noexcept override { return "StageError"; }
    std::size_t stage() const noexcept { return stage_; }
    const std::string& inner_name() const noexcept { return inner_; }

private:
    std::size_t stage_;
    std::string inner_;
};

}  // namespace ccswap
