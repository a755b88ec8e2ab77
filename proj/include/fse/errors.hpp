#ifndef FSE_ERRORS_HPP
#define FSE_ERRORS_HPP

/**
 * @file errors.hpp
 * @brief Exception hierarchy shared by all solver modules.
 *
 * Configuration problems derive from `ConfigError`, everything that goes wrong
 * while computing derives from `NumericalError`. The CLI maps the two families
 * to exit codes 1 and 2.
 */

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fse {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A linear system that should be solvable was singular.
class SolverFailure : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Inner Newton iteration of one Newmark step did not converge.
class StepFailure : public NumericalError {
public:
    StepFailure(std::size_t sample, std::size_t step, double residual)
        : NumericalError("Newmark step " + std::to_string(step) + " of sample " + std::to_string(sample) +
                         " did not converge (residual " + std::to_string(residual) + ")"),
          sample_(sample), step_(step), residual_(residual) {}

    std::size_t sample() const noexcept { return sample_; }
    std::size_t step() const noexcept { return step_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t sample_;
    std::size_t step_;
    double residual_;
};

/// Outer Newton (shooting or corrector) ran out of iterations.
class NonConvergence : public NumericalError {
public:
    NonConvergence(const std::string& what, double final_residual)
        : NumericalError(what + " (final residual " + std::to_string(final_residual) + ")"),
          final_residual_(final_residual) {}

    double final_residual() const noexcept { return final_residual_; }

private:
    double final_residual_;
};

/// Bordered Newton matrix is (numerically) singular.
class RankDeficiency : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace fse

#endif
