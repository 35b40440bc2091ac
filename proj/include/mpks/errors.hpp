#pragma once

#include <stdexcept>
#include <string>

namespace mpks {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad user input: invalid grid parameters, malformed config, unknown preset.
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

// A solver gave up: non-contraction, NaN collapse, stability failure.
struct EngineAbort : Error {
    explicit EngineAbort(const std::string& what) : Error(what) {}
};

// A measurement could not be made at the requested accuracy.
struct DiagnosticError : Error {
    explicit DiagnosticError(const std::string& what) : Error(what) {}
};

// Under-resolved grid or quadrature detected by a guard.
struct ResolutionError : DiagnosticError {
    explicit ResolutionError(const std::string& what) : DiagnosticError(what) {}
};

}  // namespace mpks
