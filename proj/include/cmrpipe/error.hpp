#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cmrpipe {

/// Base of every error thrown by the library. `kind()` is a stable
/// machine-readable tag used in CLI error reports.
class Error : public std::runtime_error {
 public:
  Error(std::string_view kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define CMRPIPE_DEFINE_ERROR(Name, tag)                              \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(tag, what) {}     \
  };

CMRPIPE_DEFINE_ERROR(GeometryError, "geometry")
CMRPIPE_DEFINE_ERROR(DominanceError, "dominance")
CMRPIPE_DEFINE_ERROR(ParameterError, "parameter")
CMRPIPE_DEFINE_ERROR(UsageError, "usage")
CMRPIPE_DEFINE_ERROR(NumericError, "numeric")
CMRPIPE_DEFINE_ERROR(DegenerateHistogramError, "degenerate-histogram")
CMRPIPE_DEFINE_ERROR(MaskError, "mask")
CMRPIPE_DEFINE_ERROR(FormatError, "format")
CMRPIPE_DEFINE_ERROR(ManifestError, "manifest")
CMRPIPE_DEFINE_ERROR(ConfigError, "config")
CMRPIPE_DEFINE_ERROR(IoError, "io")

#undef CMRPIPE_DEFINE_ERROR

}  // namespace cmrpipe
