#pragma once

#include <stdexcept>
#include <string>

namespace maglev {

// Base class for every failure raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The mass matrix failed the leading-minor positivity test.
class SingularMass : public Error {
public:
    using Error::Error;
};

// A pseudo-inverse dropped a singular value (relative threshold 1e-10).
class RankDeficientInput : public Error {
public:
    using Error::Error;
};

// A scheduling strategy could not express the model matrices affinely.
class AffinityViolation : public Error {
public:
    using Error::Error;
};

// The input reaches the output earlier than the assumed relative degree.
class RelativeDegreeViolation : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class NoFeasibleEpsilon : public Error {
public:
    using Error::Error;
};

class EmptyRecord : public Error {
public:
    using Error::Error;
};

class PreconditionViolation : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// A run could not be completed (wraps the underlying numerical failure).
class SimulationError : public Error {
public:
    using Error::Error;
};

}  // namespace maglev
