#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pcr {

enum class Errc {
  invalid_argument,
  degenerate_configuration,
  empty_input,
  parse_error,
  unsupported_format,
  io_error,
  negative_depth,
  missing_key,
  nonpositive_focal,
  zero_extent,
  nonpositive_depth,
  singular_system,
  nonpositive_scale,
  nonpositive_input,
  ambiguous_decomposition,
  insufficient_matches,
  no_consensus,
  empty_result,
  too_few_pairs,
  index_out_of_range,
  gimbal_lock,
  singular_hessian,
  non_symmetric_input,
  missing_input,
};

std::string_view to_string(Errc code) noexcept;

/// Structured failure raised by every module. The code identifies the
/// contract that was violated; the message carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace pcr
