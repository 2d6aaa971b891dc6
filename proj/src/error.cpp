#include "phishguard/error.hpp"

namespace phishguard {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedUrl: return "MalformedUrl";
    case Errc::ResolverFailure: return "ResolverFailure";
    case Errc::MissingFeature: return "MissingFeature";
    case Errc::MissingLabelColumn: return "MissingLabelColumn";
    case Errc::NonNumericCell: return "NonNumericCell";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::UnmappableFeature: return "UnmappableFeature";
    case Errc::ExhaustedRuleSpace: return "ExhaustedRuleSpace";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingleClassDataset: return "SingleClassDataset";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::InvalidM: return "InvalidM";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::SingleClassInput: return "SingleClassInput";
    case Errc::UnknownFeature: return "UnknownFeature";
    case Errc::TooManyFeatures: return "TooManyFeatures";
    case Errc::DegeneratePerturbations: return "DegeneratePerturbations";
    case Errc::EmptyFeatureSets: return "EmptyFeatureSets";
    case Errc::EmptyReferenceSet: return "EmptyReferenceSet";
    case Errc::IdMismatch: return "IdMismatch";
    case Errc::ZeroBaseline: return "ZeroBaseline";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
    case Errc::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace phishguard
