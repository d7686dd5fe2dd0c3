#pragma once

#include <map>
#include <string>
#include <vector>

#include "grouprec/hin.hpp"
#include "grouprec/model.hpp"
#include "grouprec/training.hpp"
#include "grouprec/types.hpp"

namespace grouprec::eval {

struct SplitSpec {
  Scalar train_frac = 0.7, val_frac = 0.1, test_frac = 0.2;
  std::uint64_t seed = 42;
  int min_interactions = 3;  // groups below this keep everything in train
};

/// Per-group partition of the group-item interaction instances.
struct Split {
  std::vector<std::vector<Index>> train, val, test;
  std::vector<Index> excluded_groups;  // too few interactions to evaluate
};

/// Deterministic per-group shuffle, then test/val/train counts of
/// max(1, floor(test_frac*k)) / floor(val_frac*k) / remainder.
Split split_dataset(const hin::InteractionStore& store, const SplitSpec& spec);

/// Train-side view: y_gv keeps only train instances; member rows drop any
/// interaction whose group instance went to val/test (no leakage into the
/// user features); multi-hop matrices and path incidence are re-derived.
hin::InteractionStore build_train_store(
    const hin::InteractionStore& full, const Split& split,
    const std::vector<std::string>& path_labels, int depth,
    const hin::AuxRelations& aux = {});

struct EvalInstance {
  Index group, item;
};
std::vector<EvalInstance> instances(const Split& split, bool test_side);

/// Candidate ids ordered by descending score, ties broken by ascending id.
std::vector<Index> rank_items(const Vec& scores,
                              const std::vector<Index>& candidates);
/// 1-based rank of `item` under the same ordering (item must score).
long rank_of(const Vec& scores, const std::vector<Index>& candidates,
             Index item);

struct EvalReport {
  std::string variant = "full";
  std::vector<int> cutoffs;
  std::map<int, Scalar> hr, ndcg;
  long instance_count = 0;
};

/// hits / |instances| and the binary-relevance DCG/IDCG ratio (IDCG == 1).
Scalar hr_from_ranks(const std::vector<long>& ranks, int cutoff);
Scalar ndcg_from_ranks(const std::vector<long>& ranks, int cutoff);

/// Scores every test (or validation) instance against all items minus the
/// group's train positives. `threads` splits the groups across workers; the
/// result is identical to the single-threaded pass.
EvalReport evaluate(const model::ModelParams& P,
                    const hin::InteractionStore& train_store,
                    const Split& split, const std::vector<int>& cutoffs,
                    bool test_side = true, int threads = 1);

/// Full pipeline for one ablation variant: train both stages as the variant
/// prescribes, then evaluate on the test side.
struct VariantRun {
  EvalReport report;
  std::vector<training::EpochRecord> history;
};
VariantRun run_variant(const hin::InteractionStore& full_store,
                       const SplitSpec& split_spec, training::TrainConfig cfg,
                       training::Variant variant,
                       const std::vector<int>& cutoffs, int threads = 1);

}  // namespace grouprec::eval
