#include "spark/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "spark/error.hpp"

namespace spark {

using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(Errc::invalid_config, msg); }

// Reads one section, rejecting keys that no handler consumed.
class Section {
 public:
  Section(const ojson& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) bad(name_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>)
      ok = v.is_boolean();
    else if constexpr (std::is_integral_v<T>)
      ok = v.is_number_integer();
    else
      ok = v.is_number();
    if (!ok) bad(path(key) + " has the wrong type");
    out = v.get<T>();
  }

  void get_u64(const char* key, std::uint64_t& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) bad(path(key) + " must be a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  template <class Fn>
  void get_enum(const char* key, Fn parse) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) bad(path(key) + " must be a string");
    parse(v.get<std::string>());
  }

  const ojson* sub(const char* key) {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      bool known = false;
      for (const auto& s : seen_) known = known || s == key;
      if (!known) bad("unknown config key '" + path(key) + "'");
    }
  }

 private:
  std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  const ojson& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  if (world.K < 1) bad("world.K must be >= 1");
  if (!(world.difficulty >= 0.0 && world.difficulty <= 1.0)) bad("world.difficulty must be in [0,1]");
  if (!(world.sigma >= 0.0)) bad("world.sigma must be >= 0");
  if (!(world.answer_threshold >= 0.0 && world.answer_threshold <= 1.0))
    bad("world.answer_threshold must be in [0,1]");
  if (generation.n_tasks < 1) bad("generation.n_tasks must be >= 1");
  if (!(generation.threshold >= 0.0 && generation.threshold <= 10.0)) bad("generation.threshold must be in [0,10]");
  if (!(reward.rho >= 0.0 && reward.rho <= 1.0)) bad("reward.rho must be in [0,1]");
  if (actor.rank < 1) bad("actor.rank must be >= 1");
  if (!(actor.alpha > 0.0)) bad("actor.alpha must be > 0");
  if (!(actor.dropout >= 0.0 && actor.dropout < 1.0)) bad("actor.dropout must be in [0,1)");
  if (!(actor.base_scale >= 0.0)) bad("actor.base_scale must be >= 0");
  trainer_config(*this).validate();
  if (eval.n_tasks < 1) bad("eval.n_tasks must be >= 1");
  if (eval.qid_offset < 0) bad("eval.qid_offset must be >= 0");
  if (!(gradcheck.h > 0.0)) bad("gradcheck.h must be > 0");
  if (gradcheck.n_coords < 1) bad("gradcheck.n_coords must be >= 1");
  if (gradcheck.batch_size < 1) bad("gradcheck.batch_size must be >= 1");
  if (!(gradcheck.tolerance > 0.0)) bad("gradcheck.tolerance must be > 0");
}

RunConfig reference_profile() { return RunConfig{}; }

RunConfig desk_profile() {
  RunConfig cfg;
  cfg.profile = "desk";
  cfg.trainer.lr = 0.1;
  cfg.generation.n_tasks = 100;
  cfg.eval.n_tasks = 200;
  cfg.world.difficulty = 0.0;
  return cfg;
}

RunConfig profile_by_name(std::string_view name) {
  if (name == "reference") return reference_profile();
  if (name == "desk") return desk_profile();
  bad("unknown profile '" + std::string(name) + "' (expected reference or desk)");
}

void apply_config_json(RunConfig& cfg, std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  Section top(j, "");
  top.get_u64("seed", cfg.seed);
  // A dumped config carries its profile; it must agree with the one selected.
  if (const ojson* p = top.sub("profile"))
    if (!p->is_string() || p->get<std::string>() != cfg.profile)
      bad("config profile " + p->dump() + " does not match the selected profile '" + cfg.profile + "'");

  if (const ojson* w = top.sub("world")) {
    Section s(*w, "world");
    s.get_u64("seed", cfg.world.seed);
    s.get("K", cfg.world.K);
    s.get("difficulty", cfg.world.difficulty);
    s.get("sigma", cfg.world.sigma);
    s.get("answer_threshold", cfg.world.answer_threshold);
    s.finish();
  }
  if (const ojson* g = top.sub("generation")) {
    Section s(*g, "generation");
    s.get("n_tasks", cfg.generation.n_tasks);
    s.get_enum("mode", [&](const std::string& v) { cfg.generation.mode = parse_behavior_mode(v); });
    s.get("threshold", cfg.generation.threshold);
    s.get("filter_correct_only", cfg.generation.filter_correct_only);
    s.finish();
  }
  if (const ojson* r = top.sub("reward")) {
    Section s(*r, "reward");
    s.get("rho", cfg.reward.rho);
    s.get_enum("process_ok_sign", [&](const std::string& v) { cfg.reward.process_ok_sign = parse_process_ok_sign(v); });
    s.finish();
  }
  if (const ojson* a = top.sub("actor")) {
    Section s(*a, "actor");
    s.get("rank", cfg.actor.rank);
    s.get("alpha", cfg.actor.alpha);
    s.get("dropout", cfg.actor.dropout);
    s.get("base_scale", cfg.actor.base_scale);
    s.finish();
  }
  if (const ojson* t = top.sub("trainer")) {
    Section s(*t, "trainer");
    s.get("lr", cfg.trainer.lr);
    s.get("clip_eps", cfg.trainer.clip_eps);
    s.get("kl_coef", cfg.trainer.kl_coef);
    s.get("target_kl", cfg.trainer.target_kl);
    s.get("batch_size", cfg.trainer.batch_size);
    s.get("epochs", cfg.trainer.epochs);
    s.finish();
  }
  if (const ojson* e = top.sub("eval")) {
    Section s(*e, "eval");
    s.get("n_tasks", cfg.eval.n_tasks);
    s.get("qid_offset", cfg.eval.qid_offset);
    s.finish();
  }
  if (const ojson* g = top.sub("gradcheck")) {
    Section s(*g, "gradcheck");
    s.get("h", cfg.gradcheck.h);
    s.get("n_coords", cfg.gradcheck.n_coords);
    s.get("batch_size", cfg.gradcheck.batch_size);
    s.get("tolerance", cfg.gradcheck.tolerance);
    s.finish();
  }
  top.finish();
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  apply_config_json(cfg, text.str());
}

void apply_env(RunConfig& cfg) {
  const char* raw = std::getenv("SPARK_SEED");
  if (raw == nullptr) return;
  const std::string_view text(raw);
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || end != text.data() + text.size())
    bad("SPARK_SEED must be an unsigned integer, got '" + std::string(text) + "'");
  cfg.seed = value;
}

std::string config_to_json(const RunConfig& cfg) {
  ojson j;
  j["profile"] = cfg.profile;
  j["seed"] = cfg.seed;
  j["world"] = {{"seed", cfg.world.seed},
                {"K", cfg.world.K},
                {"difficulty", cfg.world.difficulty},
                {"sigma", cfg.world.sigma},
                {"answer_threshold", cfg.world.answer_threshold}};
  j["generation"] = {{"n_tasks", cfg.generation.n_tasks},
                     {"mode", std::string(to_string(cfg.generation.mode))},
                     {"threshold", cfg.generation.threshold},
                     {"filter_correct_only", cfg.generation.filter_correct_only}};
  j["reward"] = {{"rho", cfg.reward.rho}, {"process_ok_sign", std::string(to_string(cfg.reward.process_ok_sign))}};
  j["actor"] = {{"rank", cfg.actor.rank},
                {"alpha", cfg.actor.alpha},
                {"dropout", cfg.actor.dropout},
                {"base_scale", cfg.actor.base_scale}};
  j["trainer"] = {{"lr", cfg.trainer.lr},
                  {"clip_eps", cfg.trainer.clip_eps},
                  {"kl_coef", cfg.trainer.kl_coef},
                  {"target_kl", cfg.trainer.target_kl},
                  {"batch_size", cfg.trainer.batch_size},
                  {"epochs", cfg.trainer.epochs}};
  j["eval"] = {{"n_tasks", cfg.eval.n_tasks}, {"qid_offset", cfg.eval.qid_offset}};
  j["gradcheck"] = {{"h", cfg.gradcheck.h},
                    {"n_coords", cfg.gradcheck.n_coords},
                    {"batch_size", cfg.gradcheck.batch_size},
                    {"tolerance", cfg.gradcheck.tolerance}};
  return j.dump(2) + "\n";
}

GenerationConfig generation_config(const RunConfig& cfg) {
  GenerationConfig g;
  g.n_tasks = cfg.generation.n_tasks;
  g.K = cfg.world.K;
  g.mode = cfg.generation.mode;
  g.threshold = cfg.generation.threshold;
  g.sigma = cfg.world.sigma;
  g.seed = cfg.seed;
  g.world_seed = cfg.world.seed;
  g.difficulty = cfg.world.difficulty;
  g.answer_threshold = cfg.world.answer_threshold;
  g.filter_correct_only = cfg.generation.filter_correct_only;
  g.qid_offset = 0;
  return g;
}

TrainerConfig trainer_config(const RunConfig& cfg) {
  TrainerConfig t;
  t.lr = cfg.trainer.lr;
  t.clip_eps = cfg.trainer.clip_eps;
  t.kl_coef = cfg.trainer.kl_coef;
  t.target_kl = cfg.trainer.target_kl;
  t.batch_size = cfg.trainer.batch_size;
  t.epochs = cfg.trainer.epochs;
  t.reward = cfg.reward;
  t.seed = cfg.seed;
  t.profile = cfg.profile;
  return t;
}

EvalConfig eval_config(const RunConfig& cfg) {
  EvalConfig e;
  e.n_tasks = cfg.eval.n_tasks;
  e.K = cfg.world.K;
  e.qid_offset = cfg.eval.qid_offset;
  e.world_seed = cfg.world.seed;
  e.difficulty = cfg.world.difficulty;
  e.answer_threshold = cfg.world.answer_threshold;
  e.sigma = cfg.world.sigma;
  e.seed = cfg.seed;
  return e;
}

}  // namespace spark
