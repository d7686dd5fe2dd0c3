#pragma once

#include <vector>

#include "grouprec/model.hpp"
#include "grouprec/types.hpp"

namespace grouprec::aggregation {

/// Member preference vectors fused into one group vector. With the attention
/// aggregator each member gets a learned scalar score o_u = h . MLP(W p + b)
/// softmax-normalized over the group; meanpool weights everyone 1/|g|.
struct GroupState {
  std::vector<Index> members;
  Mat member_phat;      // F x |g|
  Mat t_pre;            // F x |g|  W_agg p_hat + b (attention only)
  Mat mh_pre, mh, mo;   // MLP intermediates (attention only)
  Vec o;                // |g| member scores
  Vec gamma;            // |g| weights, sums to 1
  Vec r;                // F group preference
};

/// Throws std::invalid_argument on an empty member set.
GroupState aggregate(const model::ModelParams& P, Mat member_phat,
                     std::vector<Index> members);

/// Backward given dL/dr; accumulates aggregator grads (attention only) and
/// returns dL/d(member_phat), F x |g|.
Mat aggregate_backward(model::ModelParams& P, const GroupState& s,
                       const Vec& d_r);

}  // namespace grouprec::aggregation
