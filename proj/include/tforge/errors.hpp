#pragma once

#include <stdexcept>
#include <string>

namespace tforge {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run specification or policy document. `path()` names the
/// offending field, e.g. "operationalizations[2].params.k".
class SpecError : public Error {
public:
    SpecError(std::string path, const std::string& message)
        : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

#define TFORGE_DEFINE_ERROR(Name)          \
    class Name : public Error {            \
    public:                                \
        using Error::Error;                \
    }

TFORGE_DEFINE_ERROR(IoError);
TFORGE_DEFINE_ERROR(GenError);
TFORGE_DEFINE_ERROR(SplitError);
TFORGE_DEFINE_ERROR(EmptyResult);
TFORGE_DEFINE_ERROR(UnknownFeature);
TFORGE_DEFINE_ERROR(InfeasibleK);
TFORGE_DEFINE_ERROR(NoPositives);
TFORGE_DEFINE_ERROR(DegenerateData);
TFORGE_DEFINE_ERROR(SchemaMismatch);
TFORGE_DEFINE_ERROR(NoFeasibleTheta);
TFORGE_DEFINE_ERROR(LengthMismatch);
TFORGE_DEFINE_ERROR(NoProtectedVariation);

#undef TFORGE_DEFINE_ERROR

} // namespace tforge
