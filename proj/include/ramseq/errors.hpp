#pragma once

// Error types raised across the library. All derive from ramseq::Error so
// callers can catch the library's failures in one place.

#include <stdexcept>
#include <string>

namespace ramseq {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidParameter : Error {
    using Error::Error;
};

// Trajectory left the policy domain before reaching the steady-state
// neighbourhood.
struct DivergedPolicy : Error {
    using Error::Error;
};

// Outward value-pair integration hit the edge of the solvable domain.
struct DomainEdge : Error {
    using Error::Error;
};

struct InadmissibleSteadyState : Error {
    using Error::Error;
};

struct UnsupportedTechnology : Error {
    using Error::Error;
};

struct NoSolution : Error {
    using Error::Error;
};

struct RootNotFound : Error {
    using Error::Error;
};

struct DegenerateValue : Error {
    using Error::Error;
};

struct SingularDrift : Error {
    using Error::Error;
};

struct InvalidPrice : Error {
    using Error::Error;
};

// Two redundant computations of the same quantity disagree beyond tolerance.
struct DiagnosticsError : Error {
    using Error::Error;
};

struct ScenarioError : Error {
    using Error::Error;
};

struct ArtifactError : Error {
    using Error::Error;
};

}  // namespace ramseq
