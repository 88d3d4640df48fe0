#pragma once

#include <stdexcept>
#include <string>

namespace opdyn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument (shape, range, matrix class) does not hold.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An iterative procedure did not reach its tolerance within the iteration budget.
class NonConvergent : public Error {
public:
    NonConvergent(const std::string& what, std::size_t iterations)
        : Error(what), iterations_(iterations) {}

    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t iterations_;
};

/// The Friedkin-Johnsen iteration matrix is not Schur stable.
class Unstable : public Error {
public:
    Unstable(const std::string& what, double radius_estimate)
        : Error(what), radius_(radius_estimate) {}

    double radius_estimate() const noexcept { return radius_; }

private:
    double radius_;
};

/// The integrator produced a non-finite value.
class NumericalBreakdown : public Error {
public:
    using Error::Error;
};

} // namespace opdyn
