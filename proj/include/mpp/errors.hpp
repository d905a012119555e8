#pragma once

#include <stdexcept>
#include <string>

namespace mpp {

enum class ErrorCode {
    OpenLoop,
    OrientationError,
    SelfIntersection,
    DisjointnessViolation,
    InvalidInput,
    VertexNotOnFace,
    EndpointSplit,
    DegenerateCurve,
    InfeasibleConfig,
    SingularGlueSystem,
    RefinementCycle,
    DegeneratePolygon,
    SingularSystem,
    PointOutsideDomain,
    AllTemplated,
    NotApplicable,
    FoldedSurrogate,
    InfeasibleStart,
    UntangleFailed,
    NonconvexQuad,
    IncompatibleBases,
    MaxRecursionsExceeded,
    RankDeficient,
    NotASuperset,
    NonconformingKnots,
    KnotMismatch,
    NewtonDiverged,
    FoldedMap,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace mpp
