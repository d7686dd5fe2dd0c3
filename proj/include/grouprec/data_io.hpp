#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grouprec/hin.hpp"
#include "grouprec/training.hpp"
#include "grouprec/types.hpp"

namespace grouprec::eval {
struct EvalReport;  // defined in evaluation.hpp
}

namespace grouprec::data_io {

// ====================================================================
// dataset bundles (raw records + optional auxiliary relations)
// ====================================================================

struct Bundle {
  std::vector<hin::PairRecord> user_item;   // user_item.tsv
  std::vector<hin::PairRecord> item_item;   // item_item.tsv
  std::vector<hin::PairRecord> group_user;  // groups.tsv
  // aux_<left>_<right>.tsv, e.g. ("user","video") or ("video","item")
  std::map<std::pair<std::string, std::string>, std::vector<hin::PairRecord>>
      aux;
};

/// Reads a dataset directory. Files are UTF-8 TSV with two id columns;
/// blank lines and lines starting with '#' are skipped. Malformed lines
/// raise DataError with file and line number.
Bundle load_dataset(const std::string& dir);
void save_dataset(const Bundle& bundle, const std::string& dir);

/// build_store + aux id assignment in one step (aux ids are sorted raw ids,
/// referential integrity enforced against the store / other aux files).
struct LoadedData {
  hin::InteractionStore store;
  hin::AuxRelations aux;
};
LoadedData assemble(const Bundle& bundle);

// ====================================================================
// synthetic data
// ====================================================================

enum class PlantMode { Explicit, Implicit, Mixed };
PlantMode parse_mode(const std::string& name);
std::string mode_name(PlantMode m);

/// Planted-signal generator. A prefix of the groups ("tied" groups) receives
/// a dedicated item clique of size chain_length whose held-out members are
/// predictable: in implicit mode through a complete dependency digraph over
/// the clique, in explicit mode through a sibling group sharing the clique.
/// The remaining groups interact with a small shared pool and stay below the
/// evaluation threshold. Noise adds random extra user-item records.
struct SyntheticSpec {
  Index n_users = 200;
  Index n_items = 60;
  Index n_groups = 40;
  Index group_size = 5;    // nominal members per group (block assignment)
  int chain_length = 4;    // clique size
  PlantMode mode = PlantMode::Implicit;
  Scalar noise_rate = 0.05;
  std::uint64_t seed = 7;
};
Bundle generate_synthetic(const SyntheticSpec& spec);

/// Deterministic fixtures that reproduce published summary statistics of the
/// MOOCCube / Movielens group-recommendation datasets (user, item, group,
/// interaction and dependency counts).
Bundle mooccube_shaped();
Bundle movielens_shaped();

// ====================================================================
// prepared-store persistence
// ====================================================================

void save_store(const hin::InteractionStore& store, const hin::AuxRelations& aux,
                const std::string& path);
LoadedData load_store(const std::string& path);

// ====================================================================
// checkpoints
// ====================================================================

struct CheckpointTensor {
  std::string name;
  Mat value, adam_m, adam_v;
  long step = 0;
};

struct Checkpoint {
  std::string config_json;  // resolved run config, echoed verbatim
  std::uint64_t seed = 0;
  int stage = 0;  // 0 fresh, 1 after user stage, 2 after group stage
  int stage1_epochs = 0, stage2_epochs = 0;
  std::vector<training::EpochRecord> history;  // wall times not persisted
  std::vector<CheckpointTensor> tensors;
};

Checkpoint snapshot(const training::Trainer& trainer, const std::string& config_json,
                    int stage);
/// Restores tensor values/moments and resume counters; tensor names and
/// shapes must match the freshly constructed parameters exactly.
void restore(const Checkpoint& ck, training::Trainer& trainer);

void save_checkpoint(const Checkpoint& ck, const std::string& path,
                     bool json_mirror = true);
Checkpoint load_checkpoint(const std::string& path);

// ====================================================================
// metrics and reports
// ====================================================================

/// CSV rows under the fixed header `variant,metric,N,value` with values at
/// six significant digits; the JSON sibling keeps full precision plus the
/// config echo.
void write_report_csv(const eval::EvalReport& report, const std::string& path);
void write_report_json(const eval::EvalReport& report,
                       const std::string& config_json, const std::string& path);
eval::EvalReport read_report_json(const std::string& path);

/// Loss stream: header `stage,epoch,loss,seconds`; an empty history yields a
/// header-only file.
void write_loss_csv(const std::vector<training::EpochRecord>& history,
                    const std::string& path);
void write_loss_json(const std::vector<training::EpochRecord>& history,
                     const std::string& path);

/// Dataset statistics: counts, derived averages, and a per-item table of
/// explicit vs dependency-derived interaction counts.
void write_prepare_stats(const hin::InteractionStore& store,
                         const std::string& config_json,
                         const std::string& stats_path,
                         const std::string& histogram_path);

std::string format_sig6(Scalar v);

}  // namespace grouprec::data_io
