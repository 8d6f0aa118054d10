#pragma once

#include <stdexcept>
#include <string>

namespace cdm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnbalancedBraces : Error {
    using Error::Error;
};

struct PaletteExhausted : Error {
    using Error::Error;
};

enum class RenderErrorKind { CompileError, Timeout, RasterError };

inline const char* to_string(RenderErrorKind k) {
    switch (k) {
        case RenderErrorKind::CompileError: return "CompileError";
        case RenderErrorKind::Timeout: return "Timeout";
        case RenderErrorKind::RasterError: return "RasterError";
    }
    return "CompileError";
}

struct RenderFailure : Error {
    RenderErrorKind kind;
    RenderFailure(RenderErrorKind k, const std::string& msg)
        : Error(std::string(to_string(k)) + ": " + msg), kind(k) {}
};

struct DegenerateSample : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DuplicateId : Error {
    using Error::Error;
};

struct EmptyInput : Error {
    using Error::Error;
};

struct MissingArtifacts : Error {
    using Error::Error;
};

}  // namespace cdm
