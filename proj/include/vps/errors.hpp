#pragma once

#include <stdexcept>
#include <string>

namespace vps {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// Adaptive quadrature could not reach the requested tolerance.
class QuadratureFailure : public Error {
public:
    using Error::Error;
};

class InversionFailure : public Error {
public:
    using Error::Error;
};

/// The radial solution stayed positive up to r_max (no compact support).
class NoCompactSupport : public Error {
public:
    NoCompactSupport(double r_max, double u_at_r_max)
        : Error("no compact support: u(r) > 0 up to r_max = " + std::to_string(r_max)
                + " (u(r_max) = " + std::to_string(u_at_r_max) + ")"),
          r_max(r_max), u_at_r_max(u_at_r_max) {}
    double r_max;
    double u_at_r_max;
};

class StiffnessFailure : public Error {
public:
    using Error::Error;
};

class SeedRejected : public Error {
public:
    using Error::Error;
};

/// Pivot failure in the bordered Newton system (fold or symmetry-breaking point).
class SingularJacobian : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration; the message lists every offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or mismatched checkpoint / field file.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace vps
