#pragma once

// Command-line front end. Subcommands: generate, train, eval, compare,
// gradcheck, validate. All outputs go under --out.
//
// Exit codes:
//   0  success
//   1  gradient check failed
//   2  configuration or usage error
//   3  I/O error (missing input, unwritable output)
//   4  invalid dataset (malformed JSONL, schema or invariant violation)
//   5  non-finite loss during training

#include <iosfwd>

#include "spark/config.hpp"
#include "spark/error.hpp"
#include "spark/policy_net.hpp"

namespace spark::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitGradcheck = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDataset = 4;
inline constexpr int kExitNonFinite = 5;

int run(int argc, char** argv);

// Maps an error code to the exit codes above.
int exit_code_for(Errc code);

// Finite-difference check of both losses on a random batch drawn from
// cfg.seed. Prints one line per loss and returns kExitOk or kExitGradcheck.
// `analytic` is replaceable so tests can inject a faulty gradient.
int run_gradcheck(const RunConfig& cfg, std::ostream& out, const GradientFn& analytic = grad);

// The random batch and parameters run_gradcheck uses.
struct GradcheckSetup {
  ActorParams actor;
  CriticParams critic;
  LossBatch batch;
};
GradcheckSetup make_gradcheck_setup(const RunConfig& cfg, std::uint64_t seed);

}  // namespace spark::cli
