#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpctl {

/// Largest state, noise, mark or control dimension handled by the toolkit.
inline constexpr int kMaxDim = 4;

/// Small stack-allocated vector (state, mark, control, Brownian increment).
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
/// Small stack-allocated matrix (diffusion coefficient, Hessian).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline Vec vec(std::initializer_list<double> values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

inline Vec vec_from(std::span<const double> values) {
    Vec v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
    return v;
}

/// Monte Carlo estimate with its standard error.
struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

/// Sample mean and standard error of the mean.
Estimate mean_and_se(std::span<const double> samples);

// Error hierarchy. Every failure the library reports derives from Error.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on the inputs of an operation does not hold.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A user-supplied coefficient or mark function produced a nonfinite value.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Too many simulated paths diverged (nonfinite state).
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// The implicit BSDE step failed to contract.
class StepSizeError : public Error {
public:
    using Error::Error;
};

/// Regression normal equations are singular.
class BasisError : public Error {
public:
    using Error::Error;
};

/// The frozen-policy linear system could not be solved.
class DiscretizationError : public Error {
public:
    using Error::Error;
};

/// Policy iteration did not converge; carries the final residual profile.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> residual)
        : Error(what), residual_(std::move(residual)) {}
    const std::vector<double>& residual() const noexcept { return residual_; }

private:
    std::vector<double> residual_;
};

/// Simulated states left the value-function grid too often.
class CoverageError : public Error {
public:
    using Error::Error;
};

}  // namespace jumpctl
