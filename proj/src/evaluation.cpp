#include "grouprec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "grouprec/aggregation.hpp"
#include "grouprec/rng.hpp"

namespace grouprec::eval {

Split split_dataset(const hin::InteractionStore& store, const SplitSpec& spec) {
  if (spec.train_frac + spec.val_frac + spec.test_frac > 1.0 + 1e-9)
    throw UsageError("split fractions exceed 1");
  Split sp;
  const auto n = static_cast<std::size_t>(store.n_groups);
  sp.train.resize(n);
  sp.val.resize(n);
  sp.test.resize(n);
  for (Index g = 0; g < store.n_groups; ++g) {
    std::vector<Index> items = hin::row_items(store.y_gv, g);
    const auto k = static_cast<long>(items.size());
    if (k < spec.min_interactions) {
      sp.train[static_cast<std::size_t>(g)] = std::move(items);
      sp.excluded_groups.push_back(g);
      continue;
    }
    Rng rng(derive_seed(spec.seed, "split", static_cast<std::uint64_t>(g)));
    rng.shuffle(items);
    const long n_test = std::max<long>(
        1, static_cast<long>(std::floor(spec.test_frac * static_cast<Scalar>(k))));
    const long n_val =
        static_cast<long>(std::floor(spec.val_frac * static_cast<Scalar>(k)));
    auto& test = sp.test[static_cast<std::size_t>(g)];
    auto& val = sp.val[static_cast<std::size_t>(g)];
    auto& train = sp.train[static_cast<std::size_t>(g)];
    test.assign(items.begin(), items.begin() + n_test);
    val.assign(items.begin() + n_test, items.begin() + n_test + n_val);
    train.assign(items.begin() + n_test + n_val, items.end());
    std::sort(test.begin(), test.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
  }
  return sp;
}

hin::InteractionStore build_train_store(
    const hin::InteractionStore& full, const Split& split,
    const std::vector<std::string>& path_labels, int depth,
    const hin::AuxRelations& aux) {
  hin::InteractionStore st;
  st.n_users = full.n_users;
  st.n_items = full.n_items;
  st.n_groups = full.n_groups;
  st.users = full.users;
  st.items = full.items;
  st.groups = full.groups;
  st.group_table = full.group_table;
  st.y_vv = full.y_vv;  // dependencies are item metadata, never split

  // member interactions that would leak a held-out group instance
  std::vector<std::set<Index>> removed(static_cast<std::size_t>(full.n_users));
  for (Index g = 0; g < full.n_groups; ++g) {
    const auto& held_val = split.val[static_cast<std::size_t>(g)];
    const auto& held_test = split.test[static_cast<std::size_t>(g)];
    if (held_val.empty() && held_test.empty()) continue;
    for (Index u : full.group_table.members[static_cast<std::size_t>(g)]) {
      auto& r = removed[static_cast<std::size_t>(u)];
      r.insert(held_val.begin(), held_val.end());
      r.insert(held_test.begin(), held_test.end());
    }
  }

  using T = Eigen::Triplet<std::int32_t>;
  std::vector<T> trip;
  for (Index u = 0; u < full.n_users; ++u)
    for (SpBool::InnerIterator it(full.y_uv, u); it; ++it)
      if (!removed[static_cast<std::size_t>(u)].count(it.col()))
        trip.emplace_back(u, it.col(), 1);
  st.y_uv.resize(full.n_users, full.n_items);
  st.y_uv.setFromTriplets(trip.begin(), trip.end());
  hin::binarize(st.y_uv);

  trip.clear();
  for (Index g = 0; g < full.n_groups; ++g)
    for (Index v : split.train[static_cast<std::size_t>(g)])
      trip.emplace_back(g, v, 1);
  st.y_gv.resize(full.n_groups, full.n_items);
  st.y_gv.setFromTriplets(trip.begin(), trip.end());
  hin::binarize(st.y_gv);

  hin::derive_multi_hop(st, depth);
  for (const auto& label : path_labels)
    st.per_path_incidence[label] =
        hin::enumerate_path_incidence(st, hin::builtin_path(label), aux);
  return st;
}

std::vector<EvalInstance> instances(const Split& split, bool test_side) {
  std::vector<EvalInstance> out;
  const auto& side = test_side ? split.test : split.val;
  for (std::size_t g = 0; g < side.size(); ++g)
    for (Index v : side[g]) out.push_back({static_cast<Index>(g), v});
  return out;
}

std::vector<Index> rank_items(const Vec& scores,
                              const std::vector<Index>& candidates) {
  std::vector<Index> order = candidates;
  std::sort(order.begin(), order.end(), [&scores](Index a, Index b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  return order;
}

long rank_of(const Vec& scores, const std::vector<Index>& candidates,
             Index item) {
  long rank = 1;
  const Scalar s = scores(item);
  for (Index c : candidates) {
    if (c == item) continue;
    if (scores(c) > s || (scores(c) == s && c < item)) ++rank;
  }
  return rank;
}

Scalar hr_from_ranks(const std::vector<long>& ranks, int cutoff) {
  if (ranks.empty()) return 0.0;
  long hits = 0;
  for (long r : ranks)
    if (r <= cutoff) ++hits;
  return static_cast<Scalar>(hits) / static_cast<Scalar>(ranks.size());
}

Scalar ndcg_from_ranks(const std::vector<long>& ranks, int cutoff) {
  if (ranks.empty()) return 0.0;
  Scalar dcg = 0.0;
  for (long r : ranks)
    if (r <= cutoff)
      dcg += 1.0 / std::log2(static_cast<Scalar>(r) + 1.0);
  // one relevant item per instance, so the ideal DCG is 1 per instance
  return dcg / static_cast<Scalar>(ranks.size());
}

EvalReport evaluate(const model::ModelParams& P,
                    const hin::InteractionStore& train_store,
                    const Split& split, const std::vector<int>& cutoffs,
                    bool test_side, int threads) {
  for (int c : cutoffs)
    if (c < 1) throw UsageError("metric cutoff must be >= 1");

  const model::PathBindings paths = model::bind_paths(P.config, train_store);
  const model::ItemEmbeddings q = model::embed_items(P, train_store.y_uv);
  const auto inst = instances(split, test_side);

  // group ids that actually need scoring
  std::vector<Index> groups;
  for (const auto& i : inst)
    if (groups.empty() || groups.back() != i.group) groups.push_back(i.group);

  std::vector<Vec> group_pi(static_cast<std::size_t>(train_store.n_groups));
  auto score_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t gi = lo; gi < hi; ++gi) {
      const Index g = groups[gi];
      const auto& members =
          train_store.group_table.members[static_cast<std::size_t>(g)];
      Mat phat(P.config.embed_dim, static_cast<Index>(members.size()));
      for (std::size_t i = 0; i < members.size(); ++i)
        phat.col(static_cast<Index>(i)) =
            model::user_forward(P, train_store, paths, q, members[i]).p_hat;
      const auto gs = aggregation::aggregate(P, std::move(phat), members);
      group_pi[static_cast<std::size_t>(g)] = model::group_scores(P, gs.r).pi;
    }
  };
  const int workers = std::max(1, threads);
  if (workers == 1 || groups.size() < 2) {
    score_range(0, groups.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk =
        (groups.size() + static_cast<std::size_t>(workers) - 1) /
        static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      const std::size_t lo = static_cast<std::size_t>(w) * chunk;
      const std::size_t hi = std::min(groups.size(), lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(score_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  std::vector<long> ranks;
  ranks.reserve(inst.size());
  for (const auto& i : inst) {
    const auto& train_pos = split.train[static_cast<std::size_t>(i.group)];
    std::vector<Index> candidates;
    candidates.reserve(static_cast<std::size_t>(train_store.n_items));
    std::size_t t = 0;
    for (Index v = 0; v < train_store.n_items; ++v) {
      while (t < train_pos.size() && train_pos[t] < v) ++t;
      if (t < train_pos.size() && train_pos[t] == v) continue;
      candidates.push_back(v);
    }
    ranks.push_back(
        rank_of(group_pi[static_cast<std::size_t>(i.group)], candidates, i.item));
  }

  EvalReport rep;
  rep.cutoffs = cutoffs;
  rep.instance_count = static_cast<long>(ranks.size());
  for (int c : cutoffs) {
    rep.hr[c] = hr_from_ranks(ranks, c);
    rep.ndcg[c] = ndcg_from_ranks(ranks, c);
  }
  return rep;
}

VariantRun run_variant(const hin::InteractionStore& full_store,
                       const SplitSpec& split_spec, training::TrainConfig cfg,
                       training::Variant variant,
                       const std::vector<int>& cutoffs, int threads) {
  cfg.variant = variant;
  const Split split = split_dataset(full_store, split_spec);
  std::vector<std::string> labels = cfg.explicit_paths;
  labels.insert(labels.end(), cfg.implicit_paths.begin(),
                cfg.implicit_paths.end());
  const hin::InteractionStore train_store =
      build_train_store(full_store, split, labels, std::max(1, full_store.depth));

  training::Trainer trainer(train_store, cfg);
  trainer.init_params();
  if (variant != training::Variant::RPT)
    trainer.run_stage1(cfg.pretrain_epochs);
  trainer.run_stage2(cfg.epochs);

  VariantRun out;
  out.report = evaluate(trainer.params(), train_store, split, cutoffs, true,
                        threads);
  out.report.variant = training::variant_name(variant);
  out.history = trainer.history();
  return out;
}

}  // namespace grouprec::eval
