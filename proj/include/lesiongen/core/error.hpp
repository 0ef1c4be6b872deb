#pragma once

#include <stdexcept>
#include <string>

namespace lesiongen {

// Invalid argument to a library operation (bad shapes, out-of-range values).
struct ArgumentError : std::invalid_argument {
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Input data violates a documented invariant (manifest records, mask values).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// File or directory could not be read/written.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Remote service failed after the configured retries.
struct ServiceError : std::runtime_error {
    explicit ServiceError(const std::string& msg) : std::runtime_error(msg) {}
};

// The LLM answered but the reply failed caption validation.
struct RejectedResponseError : std::runtime_error {
    explicit RejectedResponseError(const std::string& msg) : std::runtime_error(msg) {}
};

// A metric whose mathematical definition does not apply to the given input
// (e.g. surface distances with an empty boundary). Never reported as NaN.
struct UndefinedMetricError : std::runtime_error {
    explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

// Hybrid dataset request cannot be satisfied from the available records.
struct CompositionError : std::runtime_error {
    explicit CompositionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a non-finite loss.
struct TrainingDivergenceError : std::runtime_error {
    explicit TrainingDivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// External label set cannot be mapped onto the trained label set.
struct LabelMappingError : std::runtime_error {
    explicit LabelMappingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (unknown architecture, incompatible resolution).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lesiongen
