#include "grouprec/aggregation.hpp"

#include "grouprec/nn.hpp"

namespace grouprec::aggregation {

GroupState aggregate(const model::ModelParams& P, Mat member_phat,
                     std::vector<Index> members) {
  if (members.empty() || member_phat.cols() == 0)
    throw std::invalid_argument("cannot aggregate an empty group");
  GroupState s;
  s.members = std::move(members);
  s.member_phat = std::move(member_phat);
  const Index k = s.member_phat.cols();

  if (P.config.aggregator == model::AggregatorKind::MeanPool) {
    s.gamma = Vec::Constant(k, 1.0 / static_cast<Scalar>(k));
    s.r = s.member_phat * s.gamma;
    return s;
  }

  s.t_pre = P.agg_W.value * s.member_phat;
  s.t_pre.colwise() += P.agg_b.value.col(0);
  s.mh_pre = P.agg_mlp_W1.value * s.t_pre;
  s.mh_pre.colwise() += P.agg_mlp_b1.value.col(0);
  s.mh = s.mh_pre.cwiseMax(0.0);
  s.mo = P.agg_mlp_W2.value * s.mh;
  s.mo.colwise() += P.agg_mlp_b2.value.col(0);
  s.o = s.mo.transpose() * P.agg_h.value.col(0);
  s.gamma = nn::softmax(s.o);
  s.r = s.member_phat * s.gamma;
  return s;
}

Mat aggregate_backward(model::ModelParams& P, const GroupState& s,
                       const Vec& d_r) {
  const Index k = s.member_phat.cols();
  Mat d_phat = d_r * s.gamma.transpose();  // direct term: r = sum gamma_t p_t

  if (P.config.aggregator == model::AggregatorKind::MeanPool) return d_phat;

  const Vec d_gamma = s.member_phat.transpose() * d_r;
  const Scalar gdg = s.gamma.dot(d_gamma);
  const Vec d_o = s.gamma.cwiseProduct(d_gamma - Vec::Constant(k, gdg));

  P.agg_h.grad += s.mo * d_o;
  Mat d_mo = P.agg_h.value.col(0) * d_o.transpose();  // F x k
  P.agg_mlp_W2.grad += d_mo * s.mh.transpose();
  P.agg_mlp_b2.grad += d_mo.rowwise().sum();
  Mat d_mh = P.agg_mlp_W2.value.transpose() * d_mo;
  Mat d_mh_pre =
      d_mh.cwiseProduct((s.mh_pre.array() > 0.0).cast<Scalar>().matrix());
  P.agg_mlp_W1.grad += d_mh_pre * s.t_pre.transpose();
  P.agg_mlp_b1.grad += d_mh_pre.rowwise().sum();
  Mat d_t = P.agg_mlp_W1.value.transpose() * d_mh_pre;
  P.agg_W.grad += d_t * s.member_phat.transpose();
  P.agg_b.grad += d_t.rowwise().sum();
  d_phat += P.agg_W.value.transpose() * d_t;
  return d_phat;
}

}  // namespace grouprec::aggregation
