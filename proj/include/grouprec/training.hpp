#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grouprec/aggregation.hpp"
#include "grouprec/hin.hpp"
#include "grouprec/model.hpp"
#include "grouprec/nn.hpp"
#include "grouprec/types.hpp"

namespace grouprec::training {

/// Model variants exercised by the ablation study.
///  - Full: both branches, targets = explicit OR multi-hop interactions.
///  - RPT:  skip user pretraining (stage 2 starts from random user tensors).
///  - RDMP: drop everything dependency-derived: the implicit branch emits a
///          zero vector and the multi-hop interactions leave the targets.
///  - RMP:  mirror image of RDMP (explicit branch zeroed, targets multi-hop).
///  - RAA:  meanpool aggregator instead of member attention.
enum class Variant { Full, RPT, RDMP, RMP, RAA };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct TrainConfig {
  Scalar learning_rate = 0.005;           // stage 2
  Scalar pretrain_learning_rate = 0.01;   // stage 1
  Index embed_dim = 64;
  Index batch_size = 32;
  Scalar weight_decay = 0.0;
  int epochs = 50;           // stage 2
  int pretrain_epochs = 50;  // stage 1
  std::uint64_t seed = 1;
  bool freeze_user_in_stage2 = true;
  model::AggregatorKind aggregator = model::AggregatorKind::Attention;
  Variant variant = Variant::Full;
  std::vector<std::string> explicit_paths{"P1"};
  std::vector<std::string> implicit_paths{"PP1"};
  bool probe_normalization = false;  // track softmax sum deviations

  /// Model config with the variant's branch switches applied.
  model::ModelConfig model_config() const;
};

struct EpochRecord {
  int stage = 0;
  int epoch = 0;  // 1-based within the stage
  Scalar loss = 0.0;
  double seconds = 0.0;
};

/// Mean negative log-likelihood of the target items under pi, floored logs.
/// d_logits is the gradient seed for the score head.
struct LossSeed {
  Scalar loss = 0.0;
  Vec d_logits;
};
LossSeed softmax_nll(const Vec& pi, const std::vector<Index>& targets,
                     Scalar floor = 1e-12);

/// Loss-target rows per user/group under the variant's target rule.
struct TargetTable {
  std::vector<std::vector<Index>> user_rows, group_rows;
  std::vector<Index> trainable_users, trainable_groups;  // non-empty rows
  long skipped_users = 0, skipped_groups = 0;
};
TargetTable resolve_targets(const hin::InteractionStore& train_store,
                            Variant variant);

// ----- forward-only batch losses (used by tests and grad checks) -----

Scalar user_batch_loss(const model::ModelParams& P,
                       const hin::InteractionStore& store,
                       const model::PathBindings& paths,
                       const TargetTable& targets,
                       const std::vector<Index>& users);
/// Fresh forward + full gradient accumulation for the same batch.
void user_batch_backward(model::ModelParams& P,
                         const hin::InteractionStore& store,
                         const model::PathBindings& paths,
                         const TargetTable& targets,
                         const std::vector<Index>& users);

Scalar group_batch_loss(const model::ModelParams& P,
                        const hin::InteractionStore& store,
                        const model::PathBindings& paths,
                        const TargetTable& targets,
                        const std::vector<Index>& groups);
/// backprop_users extends the chain through the members into theta_u.
void group_batch_backward(model::ModelParams& P,
                          const hin::InteractionStore& store,
                          const model::PathBindings& paths,
                          const TargetTable& targets,
                          const std::vector<Index>& groups,
                          bool backprop_users);

// ----- two-stage trainer ---------------------------------------------

class Trainer {
 public:
  Trainer(const hin::InteractionStore& train_store, TrainConfig cfg);

  void init_params();  // seeded glorot init

  /// Stage 1: optimize theta_u on user targets at the pretrain rate.
  void run_stage1(int epochs);
  /// Stage 2: optimize theta_g on group targets; theta_u additionally updates
  /// when freeze_user_in_stage2 is off.
  void run_stage2(int epochs);

  model::ModelParams& params() { return params_; }
  const model::ModelParams& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  std::vector<EpochRecord>& history() { return history_; }
  const TargetTable& targets() const { return targets_; }
  const model::PathBindings& paths() const { return paths_; }

  int stage1_epochs_done = 0;  // resume counters (restored from checkpoints)
  int stage2_epochs_done = 0;
  Scalar norm_max_dev = 0.0;   // largest |softmax sum - 1| seen while probing

 private:
  void stage1_epoch(int epoch_index);
  void stage2_epoch(int epoch_index);

  const hin::InteractionStore& store_;
  TrainConfig cfg_;
  model::ModelParams params_;
  model::PathBindings paths_;
  TargetTable targets_;
  std::vector<std::vector<Index>> item_users_;
  std::vector<EpochRecord> history_;
};

/// Smoothed (moving-window mean) view of a loss sequence.
std::vector<Scalar> smooth_losses(const std::vector<Scalar>& losses, int window);

}  // namespace grouprec::training
