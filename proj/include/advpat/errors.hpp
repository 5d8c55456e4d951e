#pragma once

#include <stdexcept>
#include <string>

namespace advpat {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct GeometryError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct TrainingError : Error {
    using Error::Error;
};
struct OptimizationError : Error {
    using Error::Error;
};
struct SamplingError : Error {
    using Error::Error;
};
struct ProtocolError : Error {
    using Error::Error;
};
struct NumericalError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

}  // namespace advpat
