#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace softgrasp {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Scene or material configuration is inconsistent (missing material id, unmapped link, bad field).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Rigid configuration that cannot be evaluated (deep penetration, unreachable object).
class InvalidConfiguration : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// det F <= 0 somewhere in the element.
class ElementInversion : public Error {
public:
    ElementInversion(std::size_t element, double det)
        : Error("element " + std::to_string(element) + " inverted (det F = " + std::to_string(det) + ")"),
          element_(element), det_(det) {}
    std::size_t element() const { return element_; }
    double det() const { return det_; }

private:
    std::size_t element_;
    double det_;
};

/// Non-finite state after an explicit step.
class Divergence : public Error {
public:
    explicit Divergence(std::size_t step)
        : Error("explicit integration diverged at step " + std::to_string(step)), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

/// Dynamic relaxation did not reach the quasi-static criterion in the allotted time.
class NonConvergence : public Error {
public:
    explicit NonConvergence(double energy_ratio)
        : Error("not quasi-static at max_time (kinetic/strain energy ratio " + std::to_string(energy_ratio) + ")"),
          ratio_(energy_ratio) {}
    double energy_ratio() const { return ratio_; }

private:
    double ratio_;
};

}  // namespace softgrasp
