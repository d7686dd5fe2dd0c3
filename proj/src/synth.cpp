#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "grouprec/data_io.hpp"
#include "grouprec/rng.hpp"

namespace grouprec::data_io {

PlantMode parse_mode(const std::string& name) {
  if (name == "explicit") return PlantMode::Explicit;
  if (name == "implicit") return PlantMode::Implicit;
  if (name == "mixed") return PlantMode::Mixed;
  throw UsageError("unknown plant mode '" + name +
                   "' (expected explicit, implicit, or mixed)");
}

std::string mode_name(PlantMode m) {
  switch (m) {
    case PlantMode::Explicit: return "explicit";
    case PlantMode::Implicit: return "implicit";
    case PlantMode::Mixed: return "mixed";
  }
  return "?";
}

namespace {

std::string id(Index v) { return std::to_string(v); }

}  // namespace

Bundle generate_synthetic(const SyntheticSpec& spec) {
  const Index n = spec.n_users, m = spec.n_items, s = spec.n_groups;
  const Index q = spec.chain_length;
  if (n < 1 || m < 3 || s < 2)
    throw UsageError("synthetic spec needs >=1 user, >=3 items, >=2 groups");
  if (q < 2) throw UsageError("chain_length must be >= 2");
  if (spec.group_size < 1 || spec.group_size > n)
    throw UsageError("group_size must lie in [1, n_users]");
  if (spec.noise_rate < 0.0 || spec.noise_rate > 1.0)
    throw UsageError("noise_rate must lie in [0, 1]");

  // How many groups get a planted clique. Implicit cliques are exclusive;
  // explicit cliques are shared by a pair of sibling groups. At least one
  // background group and one spare item must remain.
  Index tied = 0, n_impl = 0, n_expl = 0;
  for (Index e = s - 1; e >= 1 && tied == 0; --e) {
    Index gi = 0, ge = 0;
    switch (spec.mode) {
      case PlantMode::Implicit: gi = e; break;
      case PlantMode::Explicit: ge = e; break;
      case PlantMode::Mixed: gi = (e + 1) / 2; ge = e / 2; break;
    }
    Index cliques = gi + (ge + 1) / 2;  // explicit pairs share one clique
    if (cliques * q + 1 <= m - 1) {
      tied = e;
      n_impl = gi;
      n_expl = ge;
    }
  }
  if (tied == 0)
    throw UsageError("not enough items for a single planted clique; grow "
                     "n_items or shrink chain_length");

  Bundle b;
  // membership: group g is a cyclic window of group_size users starting at
  // floor(g*n/s); with the default sizing this partitions the users exactly
  std::vector<std::pair<Index, Index>> blocks;  // (start, size)
  for (Index g = 0; g < s; ++g) {
    Index start = static_cast<Index>((static_cast<long>(g) * n) / s);
    blocks.push_back({start, spec.group_size});
    for (Index i = 0; i < spec.group_size; ++i)
      b.group_user.push_back({id(g), id((start + i) % n)});
  }
  auto member = [&](Index g, Index i) { return (blocks[g].first + i) % n; };

  // clique item ranges: implicit groups first, then explicit pairs
  Index next_item = 0;
  std::vector<std::pair<Index, Index>> clique_of(tied);
  for (Index g = 0; g < n_impl; ++g) {
    clique_of[g] = {next_item, next_item + q};
    next_item += q;
  }
  for (Index e = 0; e < n_expl; ++e) {
    Index g = n_impl + e;
    if (e % 2 == 0 && e + 1 < n_expl) {
      clique_of[g] = {next_item, next_item + q};
      next_item += q;
    } else if (e % 2 == 1) {
      clique_of[g] = clique_of[g - 1];  // sibling shares the clique
    } else {
      // odd leftover explicit group joins the previous clique (or gets its
      // own when it is the only one; then nothing can predict its holdouts,
      // which only wastes the group)
      clique_of[g] = e > 0 ? clique_of[g - 1] : std::pair<Index, Index>{
                                                    next_item, next_item + q};
      if (e == 0) next_item += q;
    }
  }
  const Index pool_start = next_item;
  const Index pool_size = m - pool_start;

  for (Index g = 0; g < s; ++g) {
    if (g < tied) {
      auto [lo, hi] = clique_of[g];
      for (Index i = 0; i < blocks[g].second; ++i)
        for (Index v = lo; v < hi; ++v)
          b.user_item.push_back({id(member(g, i)), id(v)});
      if (g < n_impl) {
        // complete dependency digraph over the clique: any held-out member
        // of the clique stays reachable from whatever remains in training
        for (Index a = lo; a < hi; ++a)
          for (Index c = lo; c < hi; ++c)
            if (a != c) b.item_item.push_back({id(a), id(c)});
      }
    } else {
      Index v = pool_start + (g - tied) % pool_size;
      for (Index i = 0; i < blocks[g].second; ++i)
        b.user_item.push_back({id(member(g, i)), id(v)});
    }
  }
  // deduplicate dependency edges shared cliques would repeat (none today,
  // implicit cliques are exclusive; kept cheap and safe)
  std::sort(b.item_item.begin(), b.item_item.end(),
            [](const auto& x, const auto& y) {
              return std::tie(x.a, x.b) < std::tie(y.a, y.b);
            });
  b.item_item.erase(std::unique(b.item_item.begin(), b.item_item.end(),
                                [](const auto& x, const auto& y) {
                                  return x.a == y.a && x.b == y.b;
                                }),
                    b.item_item.end());

  if (spec.noise_rate > 0.0) {
    Rng rng(derive_seed(spec.seed, "synth_noise"));
    auto extra = static_cast<Index>(spec.noise_rate *
                                    static_cast<Scalar>(b.user_item.size()));
    for (Index i = 0; i < extra; ++i) {
      Index u = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      Index v = static_cast<Index>(rng.below(static_cast<std::uint64_t>(m)));
      b.user_item.push_back({id(u), id(v)});
    }
  }
  return b;
}

// ====================================================================
// shaped fixtures
// ====================================================================
//
// Both fixtures reproduce published dataset summary tables exactly (entity
// counts plus interaction/dependency totals) with fully deterministic
// structure: a couple of hub items carry almost all dependency reach, every
// other dependency edge points at targets the hubs already cover, and group
// item sets are filled from a rotating cursor so that per-group and global
// totals land on the published numbers.

Bundle mooccube_shaped() {
  // users 17908, items 394, groups 2447, item-item 937, user-item 616835,
  // group-item 93910, group-item-dependency 100360
  const Index n_users = 17908, n_items = 394, n_groups = 2447;
  Bundle b;

  // dependency edges: hub A (item 0) -> 2..42, hub B (item 1) -> 2..43,
  // then filler edges between already-covered targets up to 937 total
  for (Index t = 2; t <= 42; ++t) b.item_item.push_back({id(0), id(t)});
  for (Index t = 2; t <= 43; ++t) b.item_item.push_back({id(1), id(t)});
  {
    Index need = 937 - static_cast<Index>(b.item_item.size());
    for (Index src = 2; need > 0; ++src)
      for (Index t = 2; t <= 42 && need > 0; ++t)
        if (t != src) {
          b.item_item.push_back({id(src), id(t)});
          --need;
        }
  }

  // group sizes 8 (first 779) / 7; item sets of 39 (first 924) / 38
  auto group_size = [](Index g) { return g < 779 ? Index(8) : Index(7); };
  auto set_size = [](Index g) { return g < 924 ? Index(39) : Index(38); };
  // first 33 groups carry hub B (reach 42), the rest hub A (reach 41):
  // 33*42 + 2414*41 = 100360
  Index rotation = 2;  // cursor over items 2..393 (never the hubs)
  auto next_rot = [&]() {
    Index v = rotation++;
    if (rotation >= n_items) rotation = 2;
    return v;
  };

  Index user_cursor = 0;
  long nonfirst_index = 0;  // first 12712 non-lead members hold 34 items, rest 33
  for (Index g = 0; g < n_groups; ++g) {
    std::vector<Index> items;
    items.push_back(g < 33 ? 1 : 0);
    while (static_cast<Index>(items.size()) < set_size(g))
      items.push_back(next_rot());
    Index k = group_size(g);
    for (Index j = 0; j < k; ++j) {
      Index u = user_cursor++;
      b.group_user.push_back({id(g), id(u)});
      Index row = set_size(g);
      if (j > 0) {
        row = nonfirst_index < 12712 ? 34 : 33;
        ++nonfirst_index;
      }
      for (Index t = 0; t < row; ++t) b.user_item.push_back({id(u), id(items[t])});
    }
  }
  (void)n_users;  // 779*8 + 1668*7 == 17908 by construction
  return b;
}

Bundle movielens_shaped() {
  // users 895, items 1679, groups 150, item-item 6173, user-item 96464,
  // user-item-dependency 16062, group-item 47725, group-item-dependency 8191
  const Index n_items = 1679, n_groups = 150;
  Bundle b;

  // item layout: 0 hub A (-> 1..54); 1..54 targets (complete digraph among
  // themselves); 55 hub C (-> 56); 56 its target; 57..67 single-edge items
  // D_k -> 1+k (what non-lead members hold); 68..128 filler sources into the
  // hub-A targets; 129..1678 edge-free items
  for (Index t = 1; t <= 54; ++t) b.item_item.push_back({id(0), id(t)});
  b.item_item.push_back({id(55), id(56)});
  for (Index k = 0; k < 11; ++k) b.item_item.push_back({id(57 + k), id(1 + k)});
  for (Index i = 1; i <= 54; ++i)
    for (Index t = 1; t <= 54; ++t)
      if (i != t) b.item_item.push_back({id(i), id(t)});
  {
    Index need = 6173 - static_cast<Index>(b.item_item.size());
    for (Index x = 68; need > 0; ++x)
      for (Index t = 1; t <= 54 && need > 0; ++t) {
        b.item_item.push_back({id(x), id(t)});
        --need;
      }
  }

  // groups: sizes 6 (first 145) / 5; item sets 319 (first 25) / 318;
  // first 91 groups carry hub C: 150*54 + 91 = 8191 dependency pairs
  auto group_size = [](Index g) { return g < 145 ? Index(6) : Index(5); };
  auto set_size = [](Index g) { return g < 25 ? Index(319) : Index(318); };
  // rotation pool: everything except hub A (always present), hub C
  // (placed explicitly) and the D items (always present)
  std::vector<Index> pool;
  for (Index v = 1; v < n_items; ++v)
    if (v != 55 && !(v >= 57 && v <= 67)) pool.push_back(v);
  std::size_t cursor = 0;
  auto next_rot = [&]() {
    Index v = pool[cursor++];
    if (cursor == pool.size()) cursor = 0;
    return v;
  };
  auto is_plain = [](Index v) { return v == 56 || v >= 129; };

  Index user_cursor = 0;
  long nonfirst = 0;  // 314 of 745 non-lead members hold 66 items (rest 65);
                      // 421 hold 11 single-edge items (rest 10)
  for (Index g = 0; g < n_groups; ++g) {
    std::vector<Index> items;
    items.push_back(0);
    for (Index k = 0; k < 11; ++k) items.push_back(57 + k);
    if (g < 91) items.push_back(55);
    std::vector<Index> plain;  // rotation picks without outgoing edges
    while (static_cast<Index>(items.size()) < set_size(g)) {
      Index v = next_rot();
      items.push_back(v);
      if (is_plain(v)) plain.push_back(v);
    }
    Index k = group_size(g);
    for (Index j = 0; j < k; ++j) {
      Index u = user_cursor++;
      b.group_user.push_back({id(g), id(u)});
      if (j == 0) {
        for (Index v : items) b.user_item.push_back({id(u), id(v)});
        continue;
      }
      // non-lead rows: a run of single-edge items (distinct targets) plus
      // edge-free picks, so each user's dependency reach equals the run size
      Index row = nonfirst < 314 ? 66 : 65;
      Index dep = nonfirst < 421 ? 11 : 10;
      ++nonfirst;
      for (Index i = 0; i < dep; ++i)
        b.user_item.push_back({id(u), id(57 + (nonfirst + i) % 11)});
      Index fill = row - dep;
      for (Index i = 0; i < fill; ++i)
        b.user_item.push_back({id(u), id(plain[static_cast<std::size_t>(i)])});
    }
  }
  return b;
}

}  // namespace grouprec::data_io
