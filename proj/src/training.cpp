#include "grouprec/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace grouprec::training {

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::Full;
  if (name == "RPT") return Variant::RPT;
  if (name == "RDMP") return Variant::RDMP;
  if (name == "RMP") return Variant::RMP;
  if (name == "RAA") return Variant::RAA;
  throw UsageError("unknown variant '" + name +
                   "' (expected full, RPT, RDMP, RMP or RAA)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::RPT: return "RPT";
    case Variant::RDMP: return "RDMP";
    case Variant::RMP: return "RMP";
    case Variant::RAA: return "RAA";
  }
  return "?";
}

model::ModelConfig TrainConfig::model_config() const {
  model::ModelConfig mc;
  mc.embed_dim = embed_dim;
  mc.explicit_paths = explicit_paths;
  mc.implicit_paths = implicit_paths;
  mc.aggregator =
      variant == Variant::RAA ? model::AggregatorKind::MeanPool : aggregator;
  mc.zero_implicit_branch = variant == Variant::RDMP;
  mc.zero_explicit_branch = variant == Variant::RMP;
  return mc;
}

LossSeed softmax_nll(const Vec& pi, const std::vector<Index>& targets,
                     Scalar floor) {
  LossSeed out;
  out.d_logits = Vec::Zero(pi.size());
  if (targets.empty()) return out;
  const Scalar t = 1.0 / static_cast<Scalar>(targets.size());
  Scalar unclamped_mass = 0.0;  // clamped terms have zero local derivative
  for (Index v : targets) {
    out.loss -= t * nn::log_floored(pi(v), floor);
    if (pi(v) > floor) unclamped_mass += t;
  }
  out.d_logits = unclamped_mass * pi;
  for (Index v : targets)
    if (pi(v) > floor) out.d_logits(v) -= t;
  return out;
}

TargetTable resolve_targets(const hin::InteractionStore& train_store,
                            Variant variant) {
  TargetTable t;
  const SpBool* uv = nullptr;
  const SpBool* gv = nullptr;
  hin::MergedTargets merged;
  switch (variant) {
    case Variant::RDMP:  // dependency-derived interactions leave the targets
      uv = &train_store.y_uv;
      gv = &train_store.y_gv;
      break;
    case Variant::RMP:  // only dependency-derived interactions remain
      uv = &train_store.y_uvv;
      gv = &train_store.y_gvv;
      break;
    default:
      merged = hin::merged_targets(train_store);
      uv = &merged.uv;
      gv = &merged.gv;
      break;
  }
  t.user_rows.resize(static_cast<std::size_t>(train_store.n_users));
  for (Index u = 0; u < train_store.n_users; ++u) {
    t.user_rows[static_cast<std::size_t>(u)] = hin::row_items(*uv, u);
    if (t.user_rows[static_cast<std::size_t>(u)].empty())
      ++t.skipped_users;
    else
      t.trainable_users.push_back(u);
  }
  t.group_rows.resize(static_cast<std::size_t>(train_store.n_groups));
  for (Index g = 0; g < train_store.n_groups; ++g) {
    t.group_rows[static_cast<std::size_t>(g)] = hin::row_items(*gv, g);
    if (t.group_rows[static_cast<std::size_t>(g)].empty())
      ++t.skipped_groups;
    else
      t.trainable_groups.push_back(g);
  }
  return t;
}

// --------------------------------------------------------------------
// batch losses
// --------------------------------------------------------------------

namespace {

struct NormProbe {
  Scalar* max_dev = nullptr;
  void update(const Vec& w) {
    if (max_dev && w.size() > 0)
      *max_dev = std::max(*max_dev, std::abs(w.sum() - 1.0));
  }
  void probe_user(const model::UserState& s) {
    if (!max_dev) return;
    for (const auto& p : s.explicit_paths) update(p.w);
    for (const auto& p : s.implicit_paths) update(p.w);
  }
};

}  // namespace

Scalar user_batch_loss(const model::ModelParams& P,
                       const hin::InteractionStore& store,
                       const model::PathBindings& paths,
                       const TargetTable& targets,
                       const std::vector<Index>& users) {
  const model::ItemEmbeddings q = model::embed_items(P, store.y_uv);
  Scalar total = 0.0;
  for (Index u : users) {
    const auto& row = targets.user_rows[static_cast<std::size_t>(u)];
    if (row.empty()) continue;
    const model::UserState s = model::user_forward(P, store, paths, q, u);
    const model::ScoreState ss = model::user_scores(P, s.p_hat);
    total += softmax_nll(ss.pi, row).loss;
  }
  return total;
}

void user_batch_backward(model::ModelParams& P,
                         const hin::InteractionStore& store,
                         const model::PathBindings& paths,
                         const TargetTable& targets,
                         const std::vector<Index>& users) {
  const model::ItemEmbeddings q = model::embed_items(P, store.y_uv);
  const auto item_users = model::item_user_lists(store.y_uv);
  Mat dQ = Mat::Zero(P.config.embed_dim, P.n_items);
  for (Index u : users) {
    const auto& row = targets.user_rows[static_cast<std::size_t>(u)];
    if (row.empty()) continue;
    const model::UserState s = model::user_forward(P, store, paths, q, u);
    const model::ScoreState ss = model::user_scores(P, s.p_hat);
    const LossSeed seed = softmax_nll(ss.pi, row);
    const Vec d_phat = model::user_scores_backward(P, ss, s.p_hat, seed.d_logits);
    model::user_backward(P, s, q, d_phat, dQ);
  }
  model::items_backward(P, q, item_users, dQ);
}

Scalar group_batch_loss(const model::ModelParams& P,
                        const hin::InteractionStore& store,
                        const model::PathBindings& paths,
                        const TargetTable& targets,
                        const std::vector<Index>& groups) {
  const model::ItemEmbeddings q = model::embed_items(P, store.y_uv);
  Scalar total = 0.0;
  for (Index g : groups) {
    const auto& row = targets.group_rows[static_cast<std::size_t>(g)];
    if (row.empty()) continue;
    const auto& members = store.group_table.members[static_cast<std::size_t>(g)];
    Mat phat(P.config.embed_dim, static_cast<Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i)
      phat.col(static_cast<Index>(i)) =
          model::user_forward(P, store, paths, q, members[i]).p_hat;
    const auto gs = aggregation::aggregate(P, std::move(phat), members);
    const model::ScoreState ss = model::group_scores(P, gs.r);
    total += softmax_nll(ss.pi, row).loss;
  }
  return total;
}

void group_batch_backward(model::ModelParams& P,
                          const hin::InteractionStore& store,
                          const model::PathBindings& paths,
                          const TargetTable& targets,
                          const std::vector<Index>& groups,
                          bool backprop_users) {
  const model::ItemEmbeddings q = model::embed_items(P, store.y_uv);
  const auto item_users = model::item_user_lists(store.y_uv);
  Mat dQ = Mat::Zero(P.config.embed_dim, P.n_items);
  for (Index g : groups) {
    const auto& row = targets.group_rows[static_cast<std::size_t>(g)];
    if (row.empty()) continue;
    const auto& members = store.group_table.members[static_cast<std::size_t>(g)];
    std::vector<model::UserState> states;
    states.reserve(members.size());
    Mat phat(P.config.embed_dim, static_cast<Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) {
      states.push_back(model::user_forward(P, store, paths, q, members[i]));
      phat.col(static_cast<Index>(i)) = states.back().p_hat;
    }
    const auto gs = aggregation::aggregate(P, std::move(phat), members);
    const model::ScoreState ss = model::group_scores(P, gs.r);
    const LossSeed seed = softmax_nll(ss.pi, row);
    const Vec d_r = model::group_scores_backward(P, ss, gs.r, seed.d_logits);
    const Mat d_phat = aggregation::aggregate_backward(P, gs, d_r);
    if (backprop_users)
      for (std::size_t i = 0; i < members.size(); ++i)
        model::user_backward(P, states[i], q, d_phat.col(static_cast<Index>(i)),
                             dQ);
  }
  if (backprop_users) model::items_backward(P, q, item_users, dQ);
}

// --------------------------------------------------------------------
// trainer
// --------------------------------------------------------------------

Trainer::Trainer(const hin::InteractionStore& train_store, TrainConfig cfg)
    : store_(train_store),
      cfg_(std::move(cfg)),
      params_(model::make_params(cfg_.model_config(), train_store.n_users,
                                 train_store.n_items)),
      paths_(model::bind_paths(params_.config, train_store)),
      targets_(resolve_targets(train_store, cfg_.variant)),
      item_users_(model::item_user_lists(train_store.y_uv)) {}

void Trainer::init_params() { params_.init(cfg_.seed); }

namespace {

std::vector<std::vector<Index>> make_batches(std::vector<Index> order,
                                             Index batch_size, Rng& rng) {
  rng.shuffle(order);
  std::vector<std::vector<Index>> batches;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace

void Trainer::stage1_epoch(int epoch_index) {
  const auto t0 = std::chrono::steady_clock::now();
  nn::AdamConfig adam;
  adam.learning_rate = cfg_.pretrain_learning_rate;
  adam.weight_decay = cfg_.weight_decay;
  NormProbe probe{cfg_.probe_normalization ? &norm_max_dev : nullptr};

  // item embeddings depend only on (item_W, item_b, y_uv): refresh per epoch
  const model::ItemEmbeddings q = model::embed_items(params_, store_.y_uv);
  Rng rng(derive_seed(cfg_.seed, "stage1_shuffle",
                      static_cast<std::uint64_t>(epoch_index)));
  const auto batches =
      make_batches(targets_.trainable_users, cfg_.batch_size, rng);
  const auto theta = params_.theta_u();

  Scalar epoch_loss = 0.0;
  for (const auto& batch : batches) {
    params_.zero_grads(theta);
    Mat dQ = Mat::Zero(params_.config.embed_dim, params_.n_items);
    for (Index u : batch) {
      const auto& row = targets_.user_rows[static_cast<std::size_t>(u)];
      const model::UserState s =
          model::user_forward(params_, store_, paths_, q, u);
      probe.probe_user(s);
      const model::ScoreState ss = model::user_scores(params_, s.p_hat);
      probe.update(ss.pi);
      const LossSeed seed = softmax_nll(ss.pi, row);
      epoch_loss += seed.loss;
      const Vec d_phat =
          model::user_scores_backward(params_, ss, s.p_hat, seed.d_logits);
      model::user_backward(params_, s, q, d_phat, dQ);
    }
    model::items_backward(params_, q, item_users_, dQ);
    for (auto* p : theta) nn::adam_step(*p, adam);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  history_.push_back({1, epoch_index + 1, epoch_loss, secs});
}

void Trainer::stage2_epoch(int epoch_index) {
  const auto t0 = std::chrono::steady_clock::now();
  nn::AdamConfig adam;
  adam.learning_rate = cfg_.learning_rate;
  adam.weight_decay = cfg_.weight_decay;
  NormProbe probe{cfg_.probe_normalization ? &norm_max_dev : nullptr};

  const model::ItemEmbeddings q = model::embed_items(params_, store_.y_uv);
  const bool frozen = cfg_.freeze_user_in_stage2;

  // With theta_u frozen the member preferences are constants for the epoch.
  Mat phat_cache;
  if (frozen) {
    phat_cache.resize(params_.config.embed_dim, params_.n_users);
    for (Index u = 0; u < params_.n_users; ++u) {
      const model::UserState s = model::user_forward(params_, store_, paths_, q, u);
      probe.probe_user(s);
      phat_cache.col(u) = s.p_hat;
    }
  }

  Rng rng(derive_seed(cfg_.seed, "stage2_shuffle",
                      static_cast<std::uint64_t>(epoch_index)));
  const auto batches =
      make_batches(targets_.trainable_groups, cfg_.batch_size, rng);
  auto theta = params_.theta_g();
  if (!frozen) {
    const auto tu = params_.theta_u();
    theta.insert(theta.end(), tu.begin(), tu.end());
  }

  Scalar epoch_loss = 0.0;
  for (const auto& batch : batches) {
    params_.zero_grads(theta);
    Mat dQ = Mat::Zero(params_.config.embed_dim, params_.n_items);
    for (Index g : batch) {
      const auto& row = targets_.group_rows[static_cast<std::size_t>(g)];
      const auto& members =
          store_.group_table.members[static_cast<std::size_t>(g)];
      std::vector<model::UserState> states;
      Mat phat(params_.config.embed_dim, static_cast<Index>(members.size()));
      if (frozen) {
        for (std::size_t i = 0; i < members.size(); ++i)
          phat.col(static_cast<Index>(i)) = phat_cache.col(members[i]);
      } else {
        states.reserve(members.size());
        for (std::size_t i = 0; i < members.size(); ++i) {
          states.push_back(
              model::user_forward(params_, store_, paths_, q, members[i]));
          probe.probe_user(states.back());
          phat.col(static_cast<Index>(i)) = states.back().p_hat;
        }
      }
      const auto gs = aggregation::aggregate(params_, std::move(phat), members);
      probe.update(gs.gamma);
      const model::ScoreState ss = model::group_scores(params_, gs.r);
      probe.update(ss.pi);
      const LossSeed seed = softmax_nll(ss.pi, row);
      epoch_loss += seed.loss;
      const Vec d_r =
          model::group_scores_backward(params_, ss, gs.r, seed.d_logits);
      const Mat d_phat = aggregation::aggregate_backward(params_, gs, d_r);
      if (!frozen)
        for (std::size_t i = 0; i < members.size(); ++i)
          model::user_backward(params_, states[i], q,
                               d_phat.col(static_cast<Index>(i)), dQ);
    }
    if (!frozen) model::items_backward(params_, q, item_users_, dQ);
    for (auto* p : theta) nn::adam_step(*p, adam);
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  history_.push_back({2, epoch_index + 1, epoch_loss, secs});
}

void Trainer::run_stage1(int epochs) {
  for (int e = 0; e < epochs; ++e) {
    stage1_epoch(stage1_epochs_done);
    ++stage1_epochs_done;
  }
}

void Trainer::run_stage2(int epochs) {
  for (int e = 0; e < epochs; ++e) {
    stage2_epoch(stage2_epochs_done);
    ++stage2_epochs_done;
  }
}

std::vector<Scalar> smooth_losses(const std::vector<Scalar>& losses,
                                  int window) {
  std::vector<Scalar> out;
  if (window < 1 || losses.size() < static_cast<std::size_t>(window))
    return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(window) <= losses.size();
       ++i) {
    const Scalar s = std::accumulate(
        losses.begin() + static_cast<std::ptrdiff_t>(i),
        losses.begin() + static_cast<std::ptrdiff_t>(i) + window, 0.0);
    out.push_back(s / static_cast<Scalar>(window));
  }
  return out;
}

}  // namespace grouprec::training
