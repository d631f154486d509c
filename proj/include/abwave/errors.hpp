#pragma once

#include <stdexcept>
#include <string>

namespace abwave {

// Base class for every error raised by the library. The module name is kept
// so the CLI can report where a failure came from.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(what), module_(std::move(module)) {}
    const std::string& module() const { return module_; }

private:
    std::string module_;
};

#define ABWAVE_ERROR(Name, Module)                                             \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(Module, #Name ": " + what) {} \
    };

ABWAVE_ERROR(OverlapError, "geometry")
ABWAVE_ERROR(ResolutionError, "geometry")
ABWAVE_ERROR(OpenPathError, "geometry")
ABWAVE_ERROR(InterpolationError, "geometry")
ABWAVE_ERROR(MaskError, "geometry")

ABWAVE_ERROR(SuperluminalError, "media")
ABWAVE_ERROR(SignatureError, "media")

ABWAVE_ERROR(HyperbolicityError, "gauge")
ABWAVE_ERROR(CurlError, "gauge")
ABWAVE_ERROR(HolonomyError, "gauge")
ABWAVE_ERROR(BoundaryError, "gauge")

ABWAVE_ERROR(CFLViolation, "wavesolver")
ABWAVE_ERROR(JacobianError, "wavesolver")

ABWAVE_ERROR(MissingLayersError, "dnmap")
ABWAVE_ERROR(ShapeMismatch, "dnmap")
ABWAVE_ERROR(ChartError, "dnmap")
ABWAVE_ERROR(LeakageWarning, "dnmap")

ABWAVE_ERROR(CausticError, "goursat")
ABWAVE_ERROR(NonInvertibleError, "goursat")
ABWAVE_ERROR(EscapeError, "goursat")
ABWAVE_ERROR(ObstacleHit, "goursat")
ABWAVE_ERROR(RayMismatchError, "goursat")

ABWAVE_ERROR(DegenerateError, "experiments")
ABWAVE_ERROR(PreconditionError, "experiments")

ABWAVE_ERROR(ConfigError, "cli-io")
ABWAVE_ERROR(IOError, "cli-io")

#undef ABWAVE_ERROR

}  // namespace abwave
