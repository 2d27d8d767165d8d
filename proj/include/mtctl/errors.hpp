#ifndef MTCTL_ERRORS_HPP
#define MTCTL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mtctl {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define MTCTL_DEFINE_ERROR(NAME)                                   \
    class NAME : public Error {                                    \
    public:                                                        \
        explicit NAME(const std::string& msg) : Error(msg) {}      \
    }

MTCTL_DEFINE_ERROR(ShapeError);           // mismatched/invalid array shapes
MTCTL_DEFINE_ERROR(ConstantVolumeError);  // normalize() on zero-variance data
MTCTL_DEFINE_ERROR(FormatError);          // unreadable or unknown file format
MTCTL_DEFINE_ERROR(MetadataError);        // missing/invalid shape or spacing metadata
MTCTL_DEFINE_ERROR(EmptyDatasetError);    // dataset split over zero cases
MTCTL_DEFINE_ERROR(DegenerateMaskError);  // all-zero or all-one mask where both classes required
MTCTL_DEFINE_ERROR(EmptyMaskError);       // surface metrics on an empty mask
MTCTL_DEFINE_ERROR(ContractError);        // caller violated an operation precondition
MTCTL_DEFINE_ERROR(NumericsError);        // non-finite values where finite required
MTCTL_DEFINE_ERROR(CheckpointError);      // unreadable or inconsistent checkpoint
MTCTL_DEFINE_ERROR(UselessSamplingError); // MC sampling with dropout disabled
MTCTL_DEFINE_ERROR(UsageError);           // bad command-line usage
MTCTL_DEFINE_ERROR(ConfigError);          // invalid run configuration file

#undef MTCTL_DEFINE_ERROR

} // namespace mtctl

#endif
