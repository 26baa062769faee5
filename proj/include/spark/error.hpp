#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spark {

enum class Errc {
  malformed_line,
  schema_violation,
  invalid_config,
  step_out_of_range,
  length_mismatch,
  invalid_scores,
  out_of_range,
  invalid_observation,
  dimension_mismatch,
  unknown_loss,
  empty_batch,
  invalid_dataset,
  non_finite_loss,
  empty_task_set,
  empty_histogram,
  duplicate_variant_name,
  io_error,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace spark
