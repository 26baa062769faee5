#include "spark/error.hpp"

namespace spark {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_line: return "MalformedLine";
    case Errc::schema_violation: return "SchemaViolation";
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::step_out_of_range: return "StepOutOfRange";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::invalid_scores: return "InvalidScores";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::invalid_observation: return "InvalidObservation";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::unknown_loss: return "UnknownLoss";
    case Errc::empty_batch: return "EmptyBatch";
    case Errc::invalid_dataset: return "InvalidDataset";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::empty_task_set: return "EmptyTaskSet";
    case Errc::empty_histogram: return "EmptyHistogram";
    case Errc::duplicate_variant_name: return "DuplicateVariantName";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

}  // namespace spark
