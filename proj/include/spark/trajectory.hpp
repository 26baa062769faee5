#pragma once

// Trajectory dataset schema: one StepRecord per executed agent step, stored as
// JSONL with a `<name>.meta.json` sidecar.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spark/actions.hpp"

namespace spark {

struct StepRecord {
  std::string qid;
  int step = 1;
  std::vector<double> state;
  ActionId action = ActionId::cot;
  ActionScores scores{};
  double chosen_score = 0.0;
  double best_score = 0.0;
  bool process_ok = false;
  double reward_raw = 0.0;
  std::vector<double> next_state;
  bool is_final = false;
  std::optional<bool> correct;  // present iff is_final

  bool operator==(const StepRecord&) const = default;
};

struct DatasetMeta {
  int n_tasks = 0;  // tasks retained in the file
  int K = 5;
  std::string mode = "rarity";
  std::uint64_t seed = 0;
  double threshold = 6.0;
  // Provenance of the generation run.
  int raw_n_tasks = 0;
  bool filter_correct_only = false;
  std::uint64_t world_seed = 0;
  double difficulty = 0.0;
  double sigma = 0.5;
  int qid_begin = 0;
  int qid_end = 0;  // exclusive

  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  std::vector<StepRecord> records;
  DatasetMeta meta;
};

// Throws Error(schema_violation) if a record breaks the per-record invariants.
void check_record(const StepRecord& record);

std::string serialize_step(const StepRecord& record);

// Throws Error(malformed_line) for unparseable JSON, Error(schema_violation)
// for missing/mistyped fields or broken invariants.
StepRecord parse_step(std::string_view line);

enum class IssueKind { count_mismatch, ordering, duplicate_step, final_flag, record_invariant };

struct ValidationIssue {
  IssueKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

ValidationReport validate_dataset(const Dataset& dataset);

std::filesystem::path meta_path_for(const std::filesystem::path& jsonl_path);

std::string serialize_meta(const DatasetMeta& meta);
DatasetMeta parse_meta(std::string_view text);

// Writes the JSONL file and its sidecar. Throws Error(io_error).
void write_dataset(const Dataset& dataset, const std::filesystem::path& jsonl_path);

// Throws Error(io_error) when files are missing, and Error(malformed_line /
// schema_violation) with the 1-based line number in the message.
Dataset read_dataset(const std::filesystem::path& jsonl_path);

// Formats an integer task index the way qids appear in the dataset ("531_089").
std::string format_qid(int index);

}  // namespace spark
