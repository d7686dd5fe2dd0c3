#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grouprec/hin.hpp"
#include "grouprec/nn.hpp"
#include "grouprec/types.hpp"

namespace grouprec::model {

enum class AggregatorKind { Attention, MeanPool };

struct ModelConfig {
  Index embed_dim = 64;  // F
  std::vector<std::string> explicit_paths = {"P1"};
  std::vector<std::string> implicit_paths = {"PP1"};
  AggregatorKind aggregator = AggregatorKind::Attention;
  // Ablation switches: the zeroed branch contributes a zero vector while the
  // downstream concat/gate keep their shape.
  bool zero_explicit_branch = false;
  bool zero_implicit_branch = false;
};

struct PathAttention {
  nn::Parameter W;  // F x 2F, applied to [p_u ; q_j]
  nn::Parameter b;  // F
  nn::Parameter h;  // F scoring vector
};

struct BranchMlp {
  nn::Parameter W1;  // F x 2F
  nn::Parameter b1;  // F
  nn::Parameter W2;  // F x F
  nn::Parameter b2;  // F
};

/// Every tensor of the model. theta_u() is what pretraining optimizes,
/// theta_g() what the group stage optimizes; registration order is fixed so
/// that seeded init and checkpoints are stable.
struct ModelParams {
  ModelConfig config;
  Index n_users = 0, n_items = 0;

  nn::Parameter user_W, user_b;  // F x m, F
  nn::Parameter item_W, item_b;  // F x n, F
  std::vector<PathAttention> explicit_att;  // aligned with config.explicit_paths
  std::vector<PathAttention> implicit_att;  // aligned with config.implicit_paths
  BranchMlp mlp_explicit, mlp_implicit;
  nn::Parameter fusion_W, fusion_b;            // F x F, F
  nn::Parameter user_pred_W;                   // F x F
  nn::Parameter user_out_W, user_out_b;        // m x F, m

  nn::Parameter agg_W, agg_b;                  // F x F, F (attention aggregator)
  nn::Parameter agg_mlp_W1, agg_mlp_b1;        // F x F, F
  nn::Parameter agg_mlp_W2, agg_mlp_b2;        // F x F, F
  nn::Parameter agg_h;                         // F
  nn::Parameter group_pred_W;                  // F x F
  nn::Parameter group_out_W, group_out_b;      // m x F, m

  std::vector<nn::Parameter*> theta_u();
  std::vector<nn::Parameter*> theta_g();
  std::vector<nn::Parameter*> all();
  std::vector<const nn::Parameter*> all() const {
    auto ps = const_cast<ModelParams*>(this)->all();
    return {ps.begin(), ps.end()};
  }
  void init(std::uint64_t seed);
  void zero_grads(const std::vector<nn::Parameter*>& ps);
};

ModelParams make_params(const ModelConfig& cfg, Index n_users, Index n_items);

/// Incidence lookups for the active path labels, resolved once per store.
struct PathBindings {
  std::vector<const hin::PathIncidence*> explicit_inc;
  std::vector<const hin::PathIncidence*> implicit_inc;
};
PathBindings bind_paths(const ModelConfig& cfg, const hin::InteractionStore& store);

/// Item embeddings q_j for all items from their explicit interaction columns.
/// Depends only on (item_W, item_b, y_uv), so callers may cache it.
struct ItemEmbeddings {
  Mat pre;    // F x m pre-activations
  Mat value;  // F x m
};
ItemEmbeddings embed_items(const ModelParams& P, const SpBool& y_uv);

// ----- per-user forward state --------------------------------------

struct PathState {
  std::vector<Index> items;  // attended items (explicit: incidence set;
                             // implicit: distinct dependency targets)
  Vec mult;                  // implicit only: pair multiplicity per target
  Mat a, r;                  // F x k attention pre/post activations
  Vec e, w;                  // k scores and normalized weights
  Vec sum;                   // F, weighted item-embedding sum
};

struct UserState {
  Index user = -1;
  std::vector<Index> profile;            // explicit interaction row of u
  Vec p_pre, p;                          // F
  std::vector<PathState> explicit_paths, implicit_paths;
  Vec sum_explicit, sum_implicit;        // branch inputs (post ablation mask)
  Vec x_exp, x_imp;                      // 2F concats
  Vec h_exp_pre, h_exp, ph_exp;          // branch MLP intermediates, outputs
  Vec h_imp_pre, h_imp, ph_imp;
  Vec gate_pre, gate;                    // F
  Vec p_hat;                             // F fused preference
};

UserState user_forward(const ModelParams& P, const hin::InteractionStore& store,
                       const PathBindings& paths, const ItemEmbeddings& q,
                       Index u);

/// Accumulates gradients for a single user given dL/dp_hat. Item-embedding
/// gradients are collected into dQ (F x m) and folded into item_W/item_b once
/// per batch via items_backward.
void user_backward(ModelParams& P, const UserState& s, const ItemEmbeddings& q,
                   const Vec& d_p_hat, Mat& dQ);

/// Per-item user lists (columns of y_uv); precomputed once for items_backward.
std::vector<std::vector<Index>> item_user_lists(const SpBool& y_uv);
void items_backward(ModelParams& P, const ItemEmbeddings& q,
                    const std::vector<std::vector<Index>>& item_users,
                    const Mat& dQ);

// ----- score heads --------------------------------------------------

struct ScoreState {
  Vec z;       // F
  Vec logits;  // m
  Vec pi;      // m, sums to 1
};

ScoreState user_scores(const ModelParams& P, const Vec& p_hat);
ScoreState group_scores(const ModelParams& P, const Vec& r_g);

/// Backward through one score head; returns dL/d(input vector).
Vec user_scores_backward(ModelParams& P, const ScoreState& ss, const Vec& p_hat,
                         const Vec& d_logits);
Vec group_scores_backward(ModelParams& P, const ScoreState& ss, const Vec& r_g,
                          const Vec& d_logits);

}  // namespace grouprec::model
