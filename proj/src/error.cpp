#include "scpseg/error.hpp"

namespace scpseg {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::config_error: return "ConfigError";
    case Errc::io_error: return "IoError";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::corrupt_image: return "CorruptImage";
    case Errc::corrupt_file: return "CorruptFile";
    case Errc::image_too_small: return "ImageTooSmall";
    case Errc::image_too_large: return "ImageTooLarge";
    case Errc::k_too_large: return "KTooLarge";
    case Errc::index_out_of_range: return "IndexOutOfRange";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::sample_too_large: return "SampleTooLarge";
    case Errc::inconsistent_constraints: return "InconsistentConstraints";
    case Errc::unselected_constraint_pixel: return "UnselectedConstraintPixel";
    case Errc::unselected_labeled_pixel: return "UnselectedLabeledPixel";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::missing_ground_truth: return "MissingGroundTruth";
    case Errc::size_guard: return "SizeGuard";
    case Errc::non_finite: return "NonFinite";
    case Errc::no_convergence: return "NoConvergence";
    case Errc::empty_cluster: return "EmptyCluster";
    case Errc::unknown_session: return "UnknownSession";
    case Errc::pixel_out_of_range: return "PixelOutOfRange";
  }
  return "Unknown";
}

ErrorCategory errc_category(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::config_error:
    case Errc::k_too_large:
    case Errc::sample_too_large:
    case Errc::size_guard:
      return ErrorCategory::config;
    case Errc::non_finite:
    case Errc::no_convergence:
    case Errc::empty_cluster:
      return ErrorCategory::numerical;
    default:
      return ErrorCategory::data;
  }
}

}  // namespace scpseg
