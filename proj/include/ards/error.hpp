#pragma once

#include <stdexcept>
#include <string>

namespace ards {

// Base class for all workbench errors.  Subclasses carry no extra state;
// catching by type is the supported way to branch on failure kind.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define ARDS_DEFINE_ERROR(NAME)                                      \
    class NAME : public Error {                                      \
    public:                                                          \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
    }

// cohort-data
ARDS_DEFINE_ERROR(ParseError);
ARDS_DEFINE_ERROR(DuplicatePatient);
ARDS_DEFINE_ERROR(EmptySeries);
ARDS_DEFINE_ERROR(IoError);

// spectral
ARDS_DEFINE_ERROR(ImaginaryResidueExceeded);

// features
ARDS_DEFINE_ERROR(DegenerateMorphology);

// random forest
ARDS_DEFINE_ERROR(SingleClassTraining);
ARDS_DEFINE_ERROR(DimensionMismatch);

// cnn
ARDS_DEFINE_ERROR(ShapeMismatch);
ARDS_DEFINE_ERROR(BatchTooSmall);
ARDS_DEFINE_ERROR(StaleCache);
ARDS_DEFINE_ERROR(DivergenceDetected);

// evaluation harness
ARDS_DEFINE_ERROR(UnbalancedCohort);
ARDS_DEFINE_ERROR(EmptySide);
ARDS_DEFINE_ERROR(SingleClass);
ARDS_DEFINE_ERROR(NoWindows);
ARDS_DEFINE_ERROR(InsufficientSamples);

// synthetic cohort
ARDS_DEFINE_ERROR(ConfigInvalid);

#undef ARDS_DEFINE_ERROR

}  // namespace ards
