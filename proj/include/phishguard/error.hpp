#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phishguard {

enum class Errc {
  MalformedUrl,
  ResolverFailure,
  MissingFeature,
  MissingLabelColumn,
  NonNumericCell,
  EmptyDataset,
  UnmappableFeature,
  ExhaustedRuleSpace,
  DimensionMismatch,
  SingleClassDataset,
  NonFiniteLoss,
  InvalidM,
  LengthMismatch,
  EmptyInput,
  SingleClassInput,
  UnknownFeature,
  TooManyFeatures,
  DegeneratePerturbations,
  EmptyFeatureSets,
  EmptyReferenceSet,
  IdMismatch,
  ZeroBaseline,
  InvalidArgument,
  Io,
  Format,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure the library reports carries one of the codes above; callers
// switch on code() rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  Errc code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace phishguard
