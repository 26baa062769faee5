#include "spark/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spark/error.hpp"

namespace spark {

using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void violation(const std::string& what) { throw Error(Errc::schema_violation, what); }

bool in_score_range(double x) { return std::isfinite(x) && x >= 0.0 && x <= 10.0; }

const ojson& field(const ojson& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) violation(std::string("missing field '") + key + "'");
  return *it;
}

double number_field(const ojson& obj, const char* key) {
  const ojson& v = field(obj, key);
  if (!v.is_number()) violation(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

bool bool_field(const ojson& obj, const char* key) {
  const ojson& v = field(obj, key);
  if (!v.is_boolean()) violation(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<double> vector_field(const ojson& obj, const char* key) {
  const ojson& v = field(obj, key);
  if (!v.is_array()) violation(std::string("field '") + key + "' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) violation(std::string("field '") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

void check_record(const StepRecord& r) {
  if (r.qid.empty()) violation("empty qid");
  if (r.step < 1) violation("step must be >= 1");
  for (std::size_t a = 0; a < kNumActions; ++a)
    if (!in_score_range(r.scores[a])) violation("score out of [0,10] for " + std::string(kActionNames[a]));
  if (!in_score_range(r.chosen_score)) violation("chosen_score out of [0,10]");
  if (!in_score_range(r.best_score)) violation("best_score out of [0,10]");
  if (r.chosen_score != r.scores[index_of(r.action)]) violation("chosen_score != scores[action]");
  if (r.best_score != *std::max_element(r.scores.begin(), r.scores.end()))
    violation("best_score != max(scores)");
  if (r.reward_raw != r.chosen_score) violation("reward_raw != chosen_score");
  if (r.correct.has_value() != r.is_final) violation("correct must be present iff is_final");
  for (double x : r.state)
    if (!std::isfinite(x)) violation("non-finite state entry");
  for (double x : r.next_state)
    if (!std::isfinite(x)) violation("non-finite next_state entry");
}

std::string serialize_step(const StepRecord& r) {
  ojson j;
  j["qid"] = r.qid;
  j["step"] = r.step;
  j["state"] = r.state;
  j["action"] = std::string(action_name(r.action));
  j["scores"] = r.scores;
  j["chosen_score"] = r.chosen_score;
  j["best_score"] = r.best_score;
  j["process_ok"] = r.process_ok;
  j["reward_raw"] = r.reward_raw;
  j["next_state"] = r.next_state;
  j["is_final"] = r.is_final;
  j["correct"] = r.correct.has_value() ? ojson(*r.correct) : ojson(nullptr);
  return j.dump();
}

StepRecord parse_step(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line.begin(), line.end());
  } catch (const ojson::parse_error& e) {
    throw Error(Errc::malformed_line, e.what());
  }
  if (!j.is_object()) throw Error(Errc::malformed_line, "line is not a JSON object");

  StepRecord r;
  const ojson& qid = field(j, "qid");
  if (!qid.is_string()) violation("field 'qid' must be a string");
  r.qid = qid.get<std::string>();

  const ojson& step = field(j, "step");
  if (!step.is_number_integer()) violation("field 'step' must be an integer");
  r.step = step.get<int>();

  r.state = vector_field(j, "state");

  const ojson& action = field(j, "action");
  if (!action.is_string()) violation("field 'action' must be a string");
  auto id = action_from_name(action.get<std::string>());
  if (!id) violation("unknown action '" + action.get<std::string>() + "'");
  r.action = *id;

  auto scores = vector_field(j, "scores");
  if (scores.size() != kNumActions) violation("field 'scores' must hold 9 entries");
  std::copy(scores.begin(), scores.end(), r.scores.begin());

  r.chosen_score = number_field(j, "chosen_score");
  r.best_score = number_field(j, "best_score");
  r.process_ok = bool_field(j, "process_ok");
  r.reward_raw = number_field(j, "reward_raw");
  r.next_state = vector_field(j, "next_state");
  r.is_final = bool_field(j, "is_final");

  const ojson& correct = field(j, "correct");
  if (correct.is_boolean()) {
    r.correct = correct.get<bool>();
  } else if (!correct.is_null()) {
    violation("field 'correct' must be a boolean or null");
  }

  check_record(r);
  return r;
}

ValidationReport validate_dataset(const Dataset& d) {
  ValidationReport report;
  auto add = [&](IssueKind kind, std::string msg) { report.issues.push_back({kind, std::move(msg)}); };

  const long expected = static_cast<long>(d.meta.n_tasks) * d.meta.K;
  if (static_cast<long>(d.records.size()) != expected) {
    add(IssueKind::count_mismatch, "expected " + std::to_string(expected) + " records (" +
                                       std::to_string(d.meta.n_tasks) + " x " + std::to_string(d.meta.K) +
                                       "), found " + std::to_string(d.records.size()));
  }

  std::set<std::pair<std::string, int>> seen;
  std::set<std::string> closed;  // qids whose block has ended
  std::map<std::string, int> finals;
  std::string current;
  int expected_step = 1;

  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const StepRecord& r = d.records[i];
    const std::string where = "record " + std::to_string(i + 1) + " (" + r.qid + ", step " +
                              std::to_string(r.step) + ")";
    try {
      check_record(r);
    } catch (const Error& e) {
      add(IssueKind::record_invariant, where + ": " + e.what());
    }

    if (!seen.insert({r.qid, r.step}).second) add(IssueKind::duplicate_step, where + ": duplicate qid/step");

    if (r.qid != current) {
      if (!current.empty()) {
        if (expected_step != d.meta.K + 1)
          add(IssueKind::ordering, "qid " + current + " ended after step " + std::to_string(expected_step - 1));
        closed.insert(current);
      }
      if (closed.count(r.qid)) add(IssueKind::ordering, where + ": qid block is not contiguous");
      current = r.qid;
      expected_step = 1;
    }
    if (r.step != expected_step)
      add(IssueKind::ordering, where + ": expected step " + std::to_string(expected_step));
    expected_step = r.step + 1;

    if (r.is_final) {
      ++finals[r.qid];
      if (r.step != d.meta.K) add(IssueKind::final_flag, where + ": is_final before step K");
    } else if (r.step == d.meta.K) {
      add(IssueKind::final_flag, where + ": step K is not marked final");
    }
  }
  if (!current.empty() && expected_step != d.meta.K + 1)
    add(IssueKind::ordering, "qid " + current + " ended after step " + std::to_string(expected_step - 1));
  for (const auto& [qid, n] : finals)
    if (n != 1) add(IssueKind::final_flag, "qid " + qid + " has " + std::to_string(n) + " final steps");

  return report;
}

std::filesystem::path meta_path_for(const std::filesystem::path& jsonl_path) {
  auto p = jsonl_path;
  p.replace_extension(".meta.json");
  return p;
}

std::string serialize_meta(const DatasetMeta& m) {
  ojson j;
  j["n_tasks"] = m.n_tasks;
  j["K"] = m.K;
  j["mode"] = m.mode;
  j["seed"] = m.seed;
  j["threshold"] = m.threshold;
  j["raw_n_tasks"] = m.raw_n_tasks;
  j["filter_correct_only"] = m.filter_correct_only;
  j["world_seed"] = m.world_seed;
  j["difficulty"] = m.difficulty;
  j["sigma"] = m.sigma;
  j["qid_begin"] = m.qid_begin;
  j["qid_end"] = m.qid_end;
  return j.dump(2) + "\n";
}

DatasetMeta parse_meta(std::string_view text) {
  try {
    const auto j = ojson::parse(text.begin(), text.end());
    DatasetMeta m;
    m.n_tasks = j.at("n_tasks").get<int>();
    m.K = j.at("K").get<int>();
    m.mode = j.at("mode").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.threshold = j.at("threshold").get<double>();
    m.raw_n_tasks = j.value("raw_n_tasks", m.n_tasks);
    m.filter_correct_only = j.value("filter_correct_only", false);
    m.world_seed = j.value("world_seed", std::uint64_t{0});
    m.difficulty = j.value("difficulty", 0.0);
    m.sigma = j.value("sigma", 0.5);
    m.qid_begin = j.value("qid_begin", 0);
    m.qid_end = j.value("qid_end", m.qid_begin + m.raw_n_tasks);
    return m;
  } catch (const ojson::exception& e) {
    throw Error(Errc::schema_violation, std::string("dataset meta: ") + e.what());
  }
}

void write_dataset(const Dataset& d, const std::filesystem::path& jsonl_path) {
  std::ofstream out(jsonl_path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot open " + jsonl_path.string());
  for (const auto& r : d.records) out << serialize_step(r) << '\n';
  out.close();
  if (!out) throw Error(Errc::io_error, "write failed: " + jsonl_path.string());

  const auto meta_path = meta_path_for(jsonl_path);
  std::ofstream meta(meta_path, std::ios::binary);
  if (!meta) throw Error(Errc::io_error, "cannot open " + meta_path.string());
  meta << serialize_meta(d.meta);
  if (!meta) throw Error(Errc::io_error, "write failed: " + meta_path.string());
}

Dataset read_dataset(const std::filesystem::path& jsonl_path) {
  std::ifstream in(jsonl_path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + jsonl_path.string());

  const auto meta_path = meta_path_for(jsonl_path);
  std::ifstream meta_in(meta_path, std::ios::binary);
  if (!meta_in) throw Error(Errc::io_error, "cannot open " + meta_path.string());
  std::stringstream meta_text;
  meta_text << meta_in.rdbuf();

  Dataset d;
  d.meta = parse_meta(meta_text.str());

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      d.records.push_back(parse_step(line));
    } catch (const Error& e) {
      throw Error(e.code(), jsonl_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return d;
}

std::string format_qid(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03d_%03d", index / 1000, index % 1000);
  return buf;
}

}  // namespace spark
