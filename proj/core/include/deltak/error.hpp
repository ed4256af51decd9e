#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace deltak {

// Exit-code mapping used by the CLI: usage/config problems -> 2,
// protocol and property failures -> 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Undefined metric, e.g. coefficient of variation at zero mean.
class MetricError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Remote oracle spoke something other than the agreed contract.
// Carries the offending payload for diagnostics.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::string payload)
        : Error(what), raw_payload(std::move(payload)) {}
    std::string raw_payload;
};

}  // namespace deltak
