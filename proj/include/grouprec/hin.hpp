#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "grouprec/types.hpp"

namespace grouprec::hin {

// ====================================================================
// schema and path specs
// ====================================================================

/// Typed-network schema: a graph qualifies as heterogeneous when
/// |entity types| + |relation types| > 2.
struct NetworkSchema {
  std::set<std::string> entity_types;
  std::set<std::string> relation_types;
  bool is_heterogeneous() const {
    return entity_types.size() + relation_types.size() > 2;
  }
};

/// A symmetric user->...->user path template. `type_sequence` lists entity
/// types along the walk (first and last must be "user"). Plain paths carry a
/// single central item position; dependency paths additionally hop one
/// item->item edge at `dependency_position` (1-based index of the source
/// item within the sequence).
struct PathSpec {
  std::string label;
  std::vector<std::string> type_sequence;
  std::optional<int> dependency_position;

  bool is_dependency() const { return dependency_position.has_value(); }
  /// Throws UsageError when the template is malformed.
  void validate() const;
  /// 1-based position of the central item of a plain path.
  int center_position() const;
};

/// The built-in templates: P1 user-item-user, P2/P3 via an auxiliary entity
/// type, and their dependency versions with one item->item hop in the middle.
PathSpec builtin_path(const std::string& label);

// ====================================================================
// records and the interaction store
// ====================================================================

struct PairRecord {
  std::string a, b;
  std::string file;  // provenance for error messages; may be empty
  long line = 0;
};

/// Raw-id -> dense-id table. Dense ids are assigned by sorting raw ids
/// (numerically when every id parses as an integer, else lexicographically),
/// which makes matrix layout independent of record order.
struct IdMap {
  std::vector<std::string> to_raw;
  std::unordered_map<std::string, Index> to_dense;

  Index size() const { return static_cast<Index>(to_raw.size()); }
  Index dense(const std::string& raw) const;
  bool contains(const std::string& raw) const {
    return to_dense.count(raw) != 0;
  }
};

IdMap make_id_map(std::vector<std::string> raw_ids);

struct GroupTable {
  /// members[g] = sorted, deduplicated dense user ids; never empty.
  std::vector<std::vector<Index>> members;
};

/// Extra bipartite relations for multi-hop path templates, e.g. user-video
/// and video-item. Keyed by (left type, right type); "user"/"item" columns
/// use store dense ids, auxiliary types get their own id maps.
struct AuxRelations {
  std::map<std::string, IdMap> entities;
  std::map<std::pair<std::string, std::string>, SpBool> relations;

  bool has(const std::string& a, const std::string& b) const {
    return relations.count({a, b}) != 0;
  }
};

/// Per-user incidence of one path template. Plain paths map each user to the
/// central items reachable along the template; dependency paths map each user
/// to (source item, target item) pairs where the source is reached along the
/// template prefix and the target is one dependency hop further.
struct PathIncidence {
  bool dependency = false;
  std::vector<std::vector<Index>> items;                      // plain
  std::vector<std::vector<std::pair<Index, Index>>> pairs;    // dependency
};

struct MergedTargets {
  SpBool uv;  // y_uv OR y_uvv
  SpBool gv;  // y_gv OR y_gvv
  std::vector<bool> uv_nonempty;  // rows with zero sum are excluded from loss
  std::vector<bool> gv_nonempty;
};

struct InteractionStore {
  Index n_users = 0, n_items = 0, n_groups = 0;

  SpBool y_uv;   // users x items, explicit interactions
  SpBool y_gv;   // groups x items, row g = OR of member rows
  SpBool y_vv;   // items x items dependency relation, zero diagonal
  SpBool y_uvv;  // users x items via >=1 dependency hop (derive_multi_hop)
  SpBool y_gvv;  // groups x items via >=1 dependency hop

  IdMap users, items, groups;
  GroupTable group_table;
  int depth = 0;  // dependency-closure depth used for y_uvv/y_gvv

  std::map<std::string, PathIncidence> per_path_incidence;
};

// ====================================================================
// operations
// ====================================================================

/// 0/1-saturate a count matrix in place.
void binarize(SpBool& m);
/// Boolean matrix product.
SpBool bool_product(const SpBool& a, const SpBool& b);
/// Elementwise OR.
SpBool bool_or(const SpBool& a, const SpBool& b);
/// Union of dependency powers y_vv^1 .. y_vv^depth with the diagonal dropped.
SpBool dependency_closure(const SpBool& y_vv, int depth);
/// Column indices of one row as a vector.
std::vector<Index> row_items(const SpBool& m, Index row);

/// Assembles the matrices from raw records. Duplicates collapse to one entry,
/// dependency self-loops are dropped, and y_gv is derived from membership.
/// Throws DataError (with the offending record's location when known) on
/// dangling references or empty inputs.
InteractionStore build_store(const std::vector<PairRecord>& user_item,
                             const std::vector<PairRecord>& item_item,
                             const std::vector<PairRecord>& group_user);

/// Fills y_uvv / y_gvv at the given closure depth (>= 1).
void derive_multi_hop(InteractionStore& store, int depth = 1);

/// Walks one path template over the store (+ aux relations for templates that
/// visit auxiliary entity types) and returns the per-user incidence.
PathIncidence enumerate_path_incidence(const InteractionStore& store,
                                       const PathSpec& spec,
                                       const AuxRelations& aux = {});

/// OR of explicit and multi-hop interactions with zero-row flags.
MergedTargets merged_targets(const InteractionStore& store);

}  // namespace grouprec::hin
