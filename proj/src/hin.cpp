#include "grouprec/hin.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace grouprec::hin {

namespace {

std::string loc(const PairRecord& r) {
  if (r.file.empty()) return "record ('" + r.a + "', '" + r.b + "')";
  std::ostringstream os;
  os << r.file << ":" << r.line << " ('" << r.a << "', '" << r.b << "')";
  return os.str();
}

bool all_digits(const std::string& s) {
  if (s.empty() || s.size() > 18) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

// --------------------------------------------------------------------
// path specs
// --------------------------------------------------------------------

void PathSpec::validate() const {
  if (type_sequence.size() < 3)
    throw UsageError("path spec '" + label + "': sequence too short");
  if (type_sequence.front() != "user" || type_sequence.back() != "user")
    throw UsageError("path spec '" + label +
                     "': sequence must start and end at the user type");
  if (dependency_position) {
    const int p = *dependency_position;
    if (p < 2 || p + 1 >= static_cast<int>(type_sequence.size()))
      throw UsageError("path spec '" + label +
                       "': dependency position out of range");
    if (type_sequence[p - 1] != "item" || type_sequence[p] != "item")
      throw UsageError("path spec '" + label +
                       "': dependency hop must sit between two item positions");
  } else {
    if (type_sequence.size() % 2 == 0)
      throw UsageError("path spec '" + label +
                       "': plain path needs an odd type sequence");
    if (type_sequence[type_sequence.size() / 2] != "item")
      throw UsageError("path spec '" + label +
                       "': central position must be the item type");
  }
}

int PathSpec::center_position() const {
  return static_cast<int>(type_sequence.size() / 2) + 1;
}

PathSpec builtin_path(const std::string& label) {
  PathSpec s;
  s.label = label;
  if (label == "P1") {
    s.type_sequence = {"user", "item", "user"};
  } else if (label == "P2") {
    s.type_sequence = {"user", "video", "item", "video", "user"};
  } else if (label == "P3") {
    s.type_sequence = {"user", "course", "item", "course", "user"};
  } else if (label == "PP1") {
    s.type_sequence = {"user", "item", "item", "user"};
    s.dependency_position = 2;
  } else if (label == "PP2") {
    s.type_sequence = {"user", "video", "item", "item", "video", "user"};
    s.dependency_position = 3;
  } else if (label == "PP3") {
    s.type_sequence = {"user", "course", "item", "item", "course", "user"};
    s.dependency_position = 3;
  } else {
    throw UsageError("unknown path label '" + label + "'");
  }
  return s;
}

// --------------------------------------------------------------------
// id maps
// --------------------------------------------------------------------

Index IdMap::dense(const std::string& raw) const {
  auto it = to_dense.find(raw);
  if (it == to_dense.end())
    throw DataError("unknown id '" + raw + "'");
  return it->second;
}

IdMap make_id_map(std::vector<std::string> raw_ids) {
  std::sort(raw_ids.begin(), raw_ids.end());
  raw_ids.erase(std::unique(raw_ids.begin(), raw_ids.end()), raw_ids.end());
  // Numeric ordering when every id is an integer keeps dense ids intuitive
  // ("2" before "10"); the layout only needs to be order-independent.
  const bool numeric =
      std::all_of(raw_ids.begin(), raw_ids.end(),
                  [](const std::string& s) { return all_digits(s); });
  if (numeric) {
    std::sort(raw_ids.begin(), raw_ids.end(),
              [](const std::string& a, const std::string& b) {
                if (a.size() != b.size()) return a.size() < b.size();
                return a < b;
              });
  }
  IdMap map;
  map.to_raw = std::move(raw_ids);
  map.to_dense.reserve(map.to_raw.size());
  for (Index i = 0; i < map.size(); ++i) map.to_dense[map.to_raw[i]] = i;
  return map;
}

// --------------------------------------------------------------------
// boolean matrix helpers
// --------------------------------------------------------------------

void binarize(SpBool& m) {
  m.prune([](Index, Index, std::int32_t v) { return v != 0; });
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SpBool::InnerIterator it(m, k); it; ++it) it.valueRef() = 1;
}

SpBool bool_product(const SpBool& a, const SpBool& b) {
  SpBool p = a * b;
  binarize(p);
  return p;
}

SpBool bool_or(const SpBool& a, const SpBool& b) {
  SpBool s = a + b;
  binarize(s);
  return s;
}

SpBool dependency_closure(const SpBool& y_vv, int depth) {
  if (depth < 1) throw UsageError("dependency closure depth must be >= 1");
  SpBool acc = y_vv;
  SpBool power = y_vv;
  for (int d = 2; d <= depth; ++d) {
    power = bool_product(power, y_vv);
    acc = bool_or(acc, power);
  }
  // cycles re-reach their own source at depth >= 2; a self-dependency stays
  // meaningless however it arises
  acc.prune([](Index i, Index j, std::int32_t) { return i != j; });
  return acc;
}

std::vector<Index> row_items(const SpBool& m, Index row) {
  std::vector<Index> out;
  for (SpBool::InnerIterator it(m, row); it; ++it)
    out.push_back(it.col());
  return out;
}

// --------------------------------------------------------------------
// store construction
// --------------------------------------------------------------------

InteractionStore build_store(const std::vector<PairRecord>& user_item,
                             const std::vector<PairRecord>& item_item,
                             const std::vector<PairRecord>& group_user) {
  if (user_item.empty())
    throw DataError("no user-item interactions: user set is empty");

  std::vector<std::string> user_ids, item_ids, group_ids;
  for (const auto& r : user_item) {
    user_ids.push_back(r.a);
    item_ids.push_back(r.b);
  }
  for (const auto& r : group_user) group_ids.push_back(r.a);

  InteractionStore st;
  st.users = make_id_map(std::move(user_ids));
  st.items = make_id_map(std::move(item_ids));
  st.groups = make_id_map(std::move(group_ids));
  st.n_users = st.users.size();
  st.n_items = st.items.size();
  st.n_groups = st.groups.size();

  using T = Eigen::Triplet<std::int32_t>;
  std::vector<T> trip;
  trip.reserve(user_item.size());
  for (const auto& r : user_item)
    trip.emplace_back(st.users.dense(r.a), st.items.dense(r.b), 1);
  st.y_uv.resize(st.n_users, st.n_items);
  st.y_uv.setFromTriplets(trip.begin(), trip.end());
  binarize(st.y_uv);

  trip.clear();
  for (const auto& r : item_item) {
    if (!st.items.contains(r.a) || !st.items.contains(r.b))
      throw DataError("dependency references an unknown item at " + loc(r));
    const Index i = st.items.dense(r.a), j = st.items.dense(r.b);
    if (i == j) continue;  // self-dependencies are dropped
    trip.emplace_back(i, j, 1);
  }
  st.y_vv.resize(st.n_items, st.n_items);
  st.y_vv.setFromTriplets(trip.begin(), trip.end());
  binarize(st.y_vv);

  // membership, deduplicated and sorted per group
  st.group_table.members.assign(static_cast<std::size_t>(st.n_groups), {});
  for (const auto& r : group_user) {
    if (!st.users.contains(r.b))
      throw DataError("group member references an unknown user at " + loc(r));
    st.group_table.members[static_cast<std::size_t>(st.groups.dense(r.a))]
        .push_back(st.users.dense(r.b));
  }
  for (auto& m : st.group_table.members) {
    std::sort(m.begin(), m.end());
    m.erase(std::unique(m.begin(), m.end()), m.end());
  }

  // y_gv row = OR of the member rows
  trip.clear();
  for (Index g = 0; g < st.n_groups; ++g)
    for (Index u : st.group_table.members[static_cast<std::size_t>(g)])
      for (SpBool::InnerIterator it(st.y_uv, u); it; ++it)
        trip.emplace_back(g, it.col(), 1);
  st.y_gv.resize(st.n_groups, st.n_items);
  st.y_gv.setFromTriplets(trip.begin(), trip.end());
  binarize(st.y_gv);

  st.y_uvv.resize(st.n_users, st.n_items);
  st.y_gvv.resize(st.n_groups, st.n_items);
  return st;
}

void derive_multi_hop(InteractionStore& store, int depth) {
  const SpBool closure = dependency_closure(store.y_vv, depth);
  store.y_uvv = bool_product(store.y_uv, closure);
  store.y_gvv = bool_product(store.y_gv, closure);
  store.depth = depth;
}

// --------------------------------------------------------------------
// path walks
// --------------------------------------------------------------------

namespace {

// Relation matrix for one typed step; rows indexed by `from`, cols by `to`.
SpBool step_matrix(const InteractionStore& st, const AuxRelations& aux,
                   const std::string& from, const std::string& to,
                   const std::string& label) {
  if (from == "user" && to == "item") return st.y_uv;
  if (from == "item" && to == "user") return SpBool(st.y_uv.transpose());
  auto it = aux.relations.find({from, to});
  if (it != aux.relations.end()) return it->second;
  auto rit = aux.relations.find({to, from});
  if (rit != aux.relations.end()) return SpBool(rit->second.transpose());
  throw UsageError("path spec '" + label + "': no relation data for step " +
                   from + "->" + to);
}

}  // namespace

PathIncidence enumerate_path_incidence(const InteractionStore& store,
                                       const PathSpec& spec,
                                       const AuxRelations& aux) {
  spec.validate();
  const int stop =
      spec.is_dependency() ? *spec.dependency_position : spec.center_position();

  // boolean reachability from each user to the entities at position `stop`
  SpBool reach(store.n_users, store.n_users);
  reach.setIdentity();
  for (int pos = 1; pos < stop; ++pos) {
    const std::string& from = spec.type_sequence[static_cast<std::size_t>(pos - 1)];
    const std::string& to = spec.type_sequence[static_cast<std::size_t>(pos)];
    const SpBool step = step_matrix(store, aux, from, to, spec.label);
    if (step.rows() != reach.cols())
      throw UsageError("path spec '" + spec.label + "': relation for step " +
                       from + "->" + to + " has mismatched entity counts");
    reach = bool_product(reach, step);
  }
  if (reach.cols() != store.n_items)
    throw UsageError("path spec '" + spec.label +
                     "': walk does not land on the item type");

  PathIncidence inc;
  inc.dependency = spec.is_dependency();
  if (!inc.dependency) {
    inc.items.assign(static_cast<std::size_t>(store.n_users), {});
    for (Index u = 0; u < store.n_users; ++u)
      inc.items[static_cast<std::size_t>(u)] = row_items(reach, u);
  } else {
    inc.pairs.assign(static_cast<std::size_t>(store.n_users), {});
    for (Index u = 0; u < store.n_users; ++u) {
      auto& out = inc.pairs[static_cast<std::size_t>(u)];
      for (SpBool::InnerIterator it(reach, u); it; ++it) {
        const Index i = it.col();
        for (SpBool::InnerIterator dep(store.y_vv, i); dep; ++dep)
          out.emplace_back(i, dep.col());
      }
    }
  }
  return inc;
}

MergedTargets merged_targets(const InteractionStore& store) {
  MergedTargets t;
  t.uv = bool_or(store.y_uv, store.y_uvv);
  t.gv = bool_or(store.y_gv, store.y_gvv);
  t.uv_nonempty.assign(static_cast<std::size_t>(store.n_users), false);
  t.gv_nonempty.assign(static_cast<std::size_t>(store.n_groups), false);
  for (Index u = 0; u < store.n_users; ++u)
    t.uv_nonempty[static_cast<std::size_t>(u)] =
        SpBool::InnerIterator(t.uv, u) ? true : false;
  for (Index g = 0; g < store.n_groups; ++g)
    t.gv_nonempty[static_cast<std::size_t>(g)] =
        SpBool::InnerIterator(t.gv, g) ? true : false;
  return t;
}

}  // namespace grouprec::hin
