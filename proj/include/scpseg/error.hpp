#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scpseg {

enum class Errc {
  invalid_argument,
  config_error,
  io_error,
  unsupported_format,
  corrupt_image,
  corrupt_file,
  image_too_small,
  image_too_large,
  k_too_large,
  index_out_of_range,
  dimension_mismatch,
  sample_too_large,
  inconsistent_constraints,
  unselected_constraint_pixel,
  unselected_labeled_pixel,
  length_mismatch,
  missing_ground_truth,
  size_guard,
  non_finite,
  no_convergence,
  empty_cluster,
  unknown_session,
  pixel_out_of_range,
};

std::string_view errc_name(Errc code) noexcept;

/// Broad failure class, used for CLI exit codes and HTTP status mapping.
enum class ErrorCategory { config, data, numerical };

ErrorCategory errc_category(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return errc_category(code_); }

 private:
  Errc code_;
};

}  // namespace scpseg
