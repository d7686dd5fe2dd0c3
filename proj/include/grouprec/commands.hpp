#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grouprec/data_io.hpp"
#include "grouprec/evaluation.hpp"
#include "grouprec/training.hpp"
#include "grouprec/types.hpp"

namespace grouprec::cli {

/// Fully resolved run configuration: config-file values overlaid with flag
/// overrides (flags win), echoed verbatim into every output artifact.
struct RunConfig {
  std::string data_dir;     // raw TSV dataset directory
  std::string store_path;   // prepared interaction store
  std::string out_dir = "out";
  std::string resume_path;  // checkpoint to resume stage 2 from
  int depth = 1;            // dependency-closure depth

  std::uint64_t split_seed = 42;
  int min_interactions = 3;

  training::TrainConfig train;

  std::vector<int> cutoffs = {5, 10, 20};
  std::string eval_split = "test";
  int threads = 1;
};

/// Strict JSON parse: unknown keys and type mismatches are usage errors.
RunConfig config_from_json(const std::string& json_text,
                           const std::string& origin);
RunConfig load_config_file(const std::string& path);
/// Canonical (sorted-key) serialization of every resolved field.
std::string config_echo(const RunConfig& cfg);

eval::SplitSpec split_spec(const RunConfig& cfg);

// ---- commands (throw UsageError / DataError / NumericalError) ----

void cmd_prepare(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg, const std::string& stage);
void cmd_evaluate(RunConfig cfg, const std::string& checkpoint_path);
void cmd_ablate(const RunConfig& cfg, const std::vector<std::string>& variants);
void cmd_sweep(const RunConfig& cfg, const std::string& grid,
               const std::vector<std::string>& points);
void cmd_synth(const data_io::SyntheticSpec& spec, const std::string& out_dir,
               const std::string& shape);
/// Finite-difference check of every parameter tensor on a micro instance.
/// `inject_fault` corrupts one analytic gradient to prove detection works.
/// Returns the worst relative error; throws NumericalError above `tol`.
Scalar cmd_gradcheck(Scalar tol, bool inject_fault, std::ostream& out,
                     std::uint64_t seed = 4, Scalar h = 1e-5);

int run_cli(int argc, char** argv);

}  // namespace grouprec::cli
