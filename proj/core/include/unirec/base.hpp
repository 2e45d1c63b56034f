#pragma once

#include <stdexcept>
#include <string>

// The library is compiled once per floating-point precision. Each build lives
// in its own inline namespace so an fp32 and an fp64 build can be linked into
// the same executable.
#if defined(UNIREC_REAL_DOUBLE)
#define UNIREC_PRECISION_NS fp64
#else
#define UNIREC_PRECISION_NS fp32
#endif

#define UNIREC_NAMESPACE_BEGIN \
    namespace unirec {         \
    inline namespace UNIREC_PRECISION_NS {
#define UNIREC_NAMESPACE_END \
    }                        \
    }

UNIREC_NAMESPACE_BEGIN

#if defined(UNIREC_REAL_DOUBLE)
using Real = double;
#else
using Real = float;
#endif

inline constexpr const char* precision_name() {
    return sizeof(Real) == 8 ? "fp64" : "fp32";
}

UNIREC_NAMESPACE_END

namespace unirec {

// Error taxonomy. The CLI maps these onto exit codes 1 (config), 2 (data) and
// 3 (numeric). Shared by both precisions, so an fp64 error is catchable from
// fp32 code.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class DataError : public Error {
  public:
    using Error::Error;
};

class NumericError : public Error {
  public:
    using Error::Error;
};

class ShapeError : public NumericError {
  public:
    using NumericError::NumericError;
};

}  // namespace unirec
