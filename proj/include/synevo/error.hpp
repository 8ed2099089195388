#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace synevo {

/// Base error for every failure raised by the library. `phase` names the
/// pipeline stage ("backbone", "curriculum", "datagen", ...) so the CLI can
/// report where a run stopped.
class Error : public std::runtime_error {
public:
    Error(std::string phase, const std::string& message)
        : std::runtime_error(phase + ": " + message), phase_(std::move(phase)) {}

    const std::string& phase() const noexcept { return phase_; }

private:
    std::string phase_;
};

class ShapeError : public Error {
public:
    ShapeError(std::string phase, const std::string& message) : Error(std::move(phase), message) {}
};

/// Training produced a non-finite loss. Carries the loss values recorded up to
/// the failure.
class DivergenceError : public Error {
public:
    DivergenceError(std::string phase, const std::string& message, std::vector<double> trace)
        : Error(std::move(phase), message), trace_(std::move(trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

} // namespace synevo
