#pragma once

#include <stdexcept>
#include <string>

namespace semfew {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

#define SEMFEW_DEFINE_ERROR(Name)                                                                  \
    class Name : public Error {                                                                    \
      public:                                                                                      \
        using Error::Error;                                                                        \
    }

SEMFEW_DEFINE_ERROR(ArgumentError);
SEMFEW_DEFINE_ERROR(DimensionError);
SEMFEW_DEFINE_ERROR(IoError);
SEMFEW_DEFINE_ERROR(FormatError);
SEMFEW_DEFINE_ERROR(DataError);
SEMFEW_DEFINE_ERROR(EmptyClassError);
SEMFEW_DEFINE_ERROR(ClusterError);
SEMFEW_DEFINE_ERROR(ConfigError);
SEMFEW_DEFINE_ERROR(MissingSemanticsError);
SEMFEW_DEFINE_ERROR(NumericsError);
SEMFEW_DEFINE_ERROR(SamplingError);
SEMFEW_DEFINE_ERROR(LlmUnavailableError);
SEMFEW_DEFINE_ERROR(LlmResponseError);

#undef SEMFEW_DEFINE_ERROR

} // namespace semfew
