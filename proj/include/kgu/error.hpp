#pragma once

#include <stdexcept>
#include <string>

namespace kgu {

// Error taxonomy. The CLI maps these to exit codes: anything that means "your
// input or configuration is wrong" exits 2, a missing or stale upstream stage
// exits 3, and endpoint trouble exits 4.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text (TSV/CSV/JSON records, judge responses).
struct ParseError : Error { using Error::Error; };

// Unknown entity/relation label or out-of-range handle.
struct LookupError : Error { using Error::Error; };

// Numeric argument outside its documented domain, or degenerate data.
struct DomainError : Error { using Error::Error; };

// Prompt template missing a required placeholder.
struct TemplateError : Error { using Error::Error; };

// Run configuration failed validation.
struct ConfigError : Error { using Error::Error; };

// Fewer qualifying triples than requested when sampling a forget set.
struct SamplingError : Error { using Error::Error; };

// A pipeline stage's upstream artifact is missing or its hash changed.
struct DependencyError : Error { using Error::Error; };

// HTTP transport failure that survived the retry budget.
struct TransportError : Error { using Error::Error; };

// Endpoint returned 200 with a payload we cannot use; caller may retry.
struct ProtocolError : Error { using Error::Error; };

}  // namespace kgu
