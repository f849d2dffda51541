#pragma once

#include <stdexcept>
#include <string>

namespace dicbound {

/// Base for library errors. `invariant()` names the rule that was violated so
/// the CLI can report it verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string invariant, const std::string& what)
        : std::runtime_error(invariant + ": " + what), invariant_(std::move(invariant)) {}
    const std::string& invariant() const { return invariant_; }

private:
    std::string invariant_;
};

/// Malformed tables: wrong lengths, symbols outside their declared alphabet.
/// Distinct from a well-formed but invalid (non-injective) channel.
struct StructuralError : Error {
    explicit StructuralError(const std::string& what) : Error("table-totality", what) {}
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& what) : Error("distribution-dimension", what) {}
};

struct NormalizationError : Error {
    explicit NormalizationError(const std::string& what) : Error("distribution-normalization", what) {}
};

struct BudgetError : Error {
    explicit BudgetError(const std::string& what) : Error("budget", what) {}
};

struct InvariantError : Error {
    using Error::Error;
};

}  // namespace dicbound
