#ifndef MBGP_ERRORS_HPP
#define MBGP_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mbgp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error {
    using Error::Error;
};

// No recognizable table header (or route-block structure) in an LG response.
struct MalformedTable : ParseError {
    using ParseError::ParseError;
};

// The LG response states that no route matches the queried address.
struct NoRoutesFound : Error {
    using Error::Error;
};

// A measurement result document violates the documented schema.
struct SchemaError : Error {
    explicit SchemaError(const std::string& field, const std::string& detail = "")
        : Error("schema violation in field '" + field + "'" +
                (detail.empty() ? "" : ": " + detail)),
          field(field) {}
    std::string field;
};

struct MissingRtt : Error {
    using Error::Error;
};

struct InsufficientData : Error {
    using Error::Error;
};

struct InvalidScenario : Error {
    using Error::Error;
};

struct EmptyInput : Error {
    using Error::Error;
};

struct PrefixTooSmall : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

// A record log is damaged before its final record.
struct CorruptStore : Error {
    CorruptStore(std::size_t offset, const std::string& detail)
        : Error("corrupt store at byte offset " + std::to_string(offset) + ": " + detail),
          offset(offset) {}
    std::size_t offset;
};

// Analysis asked for a case the store has never seen a campaign for.
struct MissingCampaign : Error {
    using Error::Error;
};

// Query or measurement transport failure (fixture miss, network error).
struct TransportError : Error {
    using Error::Error;
};

struct AuthError : Error {
    using Error::Error;
};

struct QuotaExceeded : Error {
    using Error::Error;
};

}  // namespace mbgp

#endif
