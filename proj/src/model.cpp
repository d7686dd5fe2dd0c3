#include "grouprec/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace grouprec::model {

using nn::Parameter;

// --------------------------------------------------------------------
// parameter construction
// --------------------------------------------------------------------

ModelParams make_params(const ModelConfig& cfg, Index n_users, Index n_items) {
  const Index F = cfg.embed_dim;
  if (F < 1) throw UsageError("embed_dim must be >= 1");
  ModelParams P;
  P.config = cfg;
  P.n_users = n_users;
  P.n_items = n_items;

  P.user_W = Parameter("user_embed_W", F, n_items, true);
  P.user_b = Parameter("user_embed_b", F, 1, false);
  P.item_W = Parameter("item_embed_W", F, n_users, true);
  P.item_b = Parameter("item_embed_b", F, 1, false);
  for (const auto& label : cfg.explicit_paths) {
    PathAttention a;
    a.W = Parameter("att_" + label + "_W", F, 2 * F, true);
    a.b = Parameter("att_" + label + "_b", F, 1, false);
    a.h = Parameter("att_" + label + "_h", F, 1, true);
    P.explicit_att.push_back(std::move(a));
  }
  for (const auto& label : cfg.implicit_paths) {
    PathAttention a;
    a.W = Parameter("att_" + label + "_W", F, 2 * F, true);
    a.b = Parameter("att_" + label + "_b", F, 1, false);
    a.h = Parameter("att_" + label + "_h", F, 1, true);
    P.implicit_att.push_back(std::move(a));
  }
  auto mk_mlp = [F](const std::string& tag) {
    BranchMlp m;
    m.W1 = Parameter(tag + "_W1", F, 2 * F, true);
    m.b1 = Parameter(tag + "_b1", F, 1, false);
    m.W2 = Parameter(tag + "_W2", F, F, true);
    m.b2 = Parameter(tag + "_b2", F, 1, false);
    return m;
  };
  P.mlp_explicit = mk_mlp("branch_explicit");
  P.mlp_implicit = mk_mlp("branch_implicit");
  P.fusion_W = Parameter("fusion_W", F, F, true);
  P.fusion_b = Parameter("fusion_b", F, 1, false);
  P.user_pred_W = Parameter("user_pred_W", F, F, true);
  P.user_out_W = Parameter("user_out_W", n_items, F, true);
  P.user_out_b = Parameter("user_out_b", n_items, 1, false);

  if (cfg.aggregator == AggregatorKind::Attention) {
    P.agg_W = Parameter("agg_W", F, F, true);
    P.agg_b = Parameter("agg_b", F, 1, false);
    P.agg_mlp_W1 = Parameter("agg_mlp_W1", F, F, true);
    P.agg_mlp_b1 = Parameter("agg_mlp_b1", F, 1, false);
    P.agg_mlp_W2 = Parameter("agg_mlp_W2", F, F, true);
    P.agg_mlp_b2 = Parameter("agg_mlp_b2", F, 1, false);
    P.agg_h = Parameter("agg_h", F, 1, true);
  }
  P.group_pred_W = Parameter("group_pred_W", F, F, true);
  P.group_out_W = Parameter("group_out_W", n_items, F, true);
  P.group_out_b = Parameter("group_out_b", n_items, 1, false);
  return P;
}

std::vector<Parameter*> ModelParams::theta_u() {
  std::vector<Parameter*> ps{&user_W, &user_b, &item_W, &item_b};
  for (auto& a : explicit_att) {
    ps.push_back(&a.W);
    ps.push_back(&a.b);
    ps.push_back(&a.h);
  }
  for (auto& a : implicit_att) {
    ps.push_back(&a.W);
    ps.push_back(&a.b);
    ps.push_back(&a.h);
  }
  for (auto* m : {&mlp_explicit, &mlp_implicit}) {
    ps.push_back(&m->W1);
    ps.push_back(&m->b1);
    ps.push_back(&m->W2);
    ps.push_back(&m->b2);
  }
  ps.push_back(&fusion_W);
  ps.push_back(&fusion_b);
  ps.push_back(&user_pred_W);
  ps.push_back(&user_out_W);
  ps.push_back(&user_out_b);
  return ps;
}

std::vector<Parameter*> ModelParams::theta_g() {
  std::vector<Parameter*> ps;
  if (config.aggregator == AggregatorKind::Attention) {
    ps.push_back(&agg_W);
    ps.push_back(&agg_b);
    ps.push_back(&agg_mlp_W1);
    ps.push_back(&agg_mlp_b1);
    ps.push_back(&agg_mlp_W2);
    ps.push_back(&agg_mlp_b2);
    ps.push_back(&agg_h);
  }
  ps.push_back(&group_pred_W);
  ps.push_back(&group_out_W);
  ps.push_back(&group_out_b);
  return ps;
}

std::vector<Parameter*> ModelParams::all() {
  auto ps = theta_u();
  auto pg = theta_g();
  ps.insert(ps.end(), pg.begin(), pg.end());
  return ps;
}

void ModelParams::init(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "param_init"));
  for (auto* p : all()) nn::glorot_init(*p, rng);
}

void ModelParams::zero_grads(const std::vector<Parameter*>& ps) {
  for (auto* p : ps) p->zero_grad();
}

// --------------------------------------------------------------------
// bindings and item embeddings
// --------------------------------------------------------------------

PathBindings bind_paths(const ModelConfig& cfg,
                        const hin::InteractionStore& store) {
  PathBindings b;
  auto lookup = [&store](const std::string& label, bool dependency) {
    auto it = store.per_path_incidence.find(label);
    if (it == store.per_path_incidence.end())
      throw UsageError("path '" + label + "' has no incidence in the store");
    if (it->second.dependency != dependency)
      throw UsageError("path '" + label + "' has the wrong incidence kind");
    return &it->second;
  };
  for (const auto& l : cfg.explicit_paths) b.explicit_inc.push_back(lookup(l, false));
  for (const auto& l : cfg.implicit_paths) b.implicit_inc.push_back(lookup(l, true));
  return b;
}

ItemEmbeddings embed_items(const ModelParams& P, const SpBool& y_uv) {
  ItemEmbeddings q;
  q.pre = P.item_W.value * y_uv.cast<Scalar>();  // F x m, column j uses column j of y_uv
  q.pre.colwise() += P.item_b.value.col(0);
  q.value = q.pre.cwiseMax(0.0);
  return q;
}

// --------------------------------------------------------------------
// forward
// --------------------------------------------------------------------

namespace {

// Attention over a set of item embeddings: e_t = h . relu(W [p; q_t] + b).
// `logmult` shifts scores by log multiplicity, which realizes pairwise
// normalization when one target is reachable from several sources.
PathState attend(const PathAttention& att, const Vec& p, const ItemEmbeddings& q,
                 std::vector<Index> items, Vec logmult) {
  PathState s;
  s.items = std::move(items);
  s.mult = std::move(logmult);
  const Index F = p.size();
  const Index k = static_cast<Index>(s.items.size());
  s.sum = Vec::Zero(F);
  if (k == 0) {
    s.e = Vec();
    s.w = Vec();
    return s;
  }
  const Mat& Wl = att.W.value.leftCols(F);
  const Mat& Wr = att.W.value.rightCols(F);
  const Vec base = Wl * p + att.b.value.col(0);
  s.a.resize(F, k);
  for (Index t = 0; t < k; ++t)
    s.a.col(t) = base + Wr * q.value.col(s.items[static_cast<std::size_t>(t)]);
  s.r = s.a.cwiseMax(0.0);
  Vec scores = s.r.transpose() * att.h.value.col(0);
  s.e = scores;
  if (s.mult.size() > 0) scores += s.mult;  // + log c_t
  s.w = nn::softmax(scores);
  for (Index t = 0; t < k; ++t)
    s.sum += s.w(t) * q.value.col(s.items[static_cast<std::size_t>(t)]);
  return s;
}

}  // namespace

UserState user_forward(const ModelParams& P, const hin::InteractionStore& store,
                       const PathBindings& paths, const ItemEmbeddings& q,
                       Index u) {
  const Index F = P.config.embed_dim;
  UserState s;
  s.user = u;
  s.profile = hin::row_items(store.y_uv, u);

  s.p_pre = P.user_b.value.col(0);
  for (Index v : s.profile) s.p_pre += P.user_W.value.col(v);
  s.p = s.p_pre.cwiseMax(0.0);

  s.sum_explicit = Vec::Zero(F);
  if (!P.config.zero_explicit_branch) {
    for (std::size_t l = 0; l < P.explicit_att.size(); ++l) {
      const auto& inc = paths.explicit_inc[l]->items[static_cast<std::size_t>(u)];
      PathState ps = attend(P.explicit_att[l], s.p, q, inc, Vec());
      s.sum_explicit += ps.sum;
      s.explicit_paths.push_back(std::move(ps));
    }
  }
  s.sum_implicit = Vec::Zero(F);
  if (!P.config.zero_implicit_branch) {
    for (std::size_t l = 0; l < P.implicit_att.size(); ++l) {
      const auto& pairs = paths.implicit_inc[l]->pairs[static_cast<std::size_t>(u)];
      // collapse (source, target) pairs to distinct targets with counts
      std::map<Index, Index> counts;
      for (const auto& pr : pairs) counts[pr.second] += 1;
      std::vector<Index> targets;
      Vec logmult(static_cast<Index>(counts.size()));
      Index t = 0;
      for (const auto& [item, c] : counts) {
        targets.push_back(item);
        logmult(t++) = std::log(static_cast<Scalar>(c));
      }
      PathState ps = attend(P.implicit_att[l], s.p, q, std::move(targets),
                            std::move(logmult));
      s.sum_implicit += ps.sum;
      s.implicit_paths.push_back(std::move(ps));
    }
  }

  s.x_exp.resize(2 * F);
  s.x_exp << s.p, s.sum_explicit;
  s.h_exp_pre = P.mlp_explicit.W1.value * s.x_exp + P.mlp_explicit.b1.value.col(0);
  s.h_exp = s.h_exp_pre.cwiseMax(0.0);
  s.ph_exp = P.mlp_explicit.W2.value * s.h_exp + P.mlp_explicit.b2.value.col(0);

  s.x_imp.resize(2 * F);
  s.x_imp << s.p, s.sum_implicit;
  s.h_imp_pre = P.mlp_implicit.W1.value * s.x_imp + P.mlp_implicit.b1.value.col(0);
  s.h_imp = s.h_imp_pre.cwiseMax(0.0);
  s.ph_imp = P.mlp_implicit.W2.value * s.h_imp + P.mlp_implicit.b2.value.col(0);

  s.gate_pre = P.fusion_W.value * (s.ph_exp + s.ph_imp) + P.fusion_b.value.col(0);
  s.gate = (1.0 / (1.0 + (-s.gate_pre.array()).exp())).matrix();
  s.p_hat = s.gate.cwiseProduct(s.ph_exp) +
            (Vec::Ones(F) - s.gate).cwiseProduct(s.ph_imp);
  return s;
}

// --------------------------------------------------------------------
// backward
// --------------------------------------------------------------------

namespace {

// Backward of one attention path; accumulates att grads and dQ, adds to d_p.
void attend_backward(PathAttention& att, const PathState& s, const Vec& p,
                     const ItemEmbeddings& q, const Vec& d_sum, Vec& d_p,
                     Mat& dQ) {
  const Index F = p.size();
  const Index k = static_cast<Index>(s.items.size());
  if (k == 0) return;

  Vec dw(k);
  for (Index t = 0; t < k; ++t) {
    const Index j = s.items[static_cast<std::size_t>(t)];
    dw(t) = d_sum.dot(q.value.col(j));
    dQ.col(j) += s.w(t) * d_sum;
  }
  const Scalar wdw = s.w.dot(dw);
  Vec de = s.w.cwiseProduct(dw.array().matrix() - Vec::Constant(k, wdw));

  // e_t = h . r_t
  att.h.grad += s.r * de;
  Mat dr = att.h.value.col(0) * de.transpose();          // F x k
  Mat da = dr.cwiseProduct((s.a.array() > 0.0).cast<Scalar>().matrix());

  const Vec da_sum = da.rowwise().sum();
  att.b.grad += da_sum;
  att.W.grad.leftCols(F) += da_sum * p.transpose();
  Mat Qsel(F, k);
  for (Index t = 0; t < k; ++t)
    Qsel.col(t) = q.value.col(s.items[static_cast<std::size_t>(t)]);
  att.W.grad.rightCols(F) += da * Qsel.transpose();

  d_p += att.W.value.leftCols(F).transpose() * da_sum;
  const Mat dq_cols = att.W.value.rightCols(F).transpose() * da;  // F x k
  for (Index t = 0; t < k; ++t)
    dQ.col(s.items[static_cast<std::size_t>(t)]) += dq_cols.col(t);
}

}  // namespace

void user_backward(ModelParams& P, const UserState& s, const ItemEmbeddings& q,
                   const Vec& d_p_hat, Mat& dQ) {
  const Index F = P.config.embed_dim;

  // fusion gate
  const Vec d_gate = d_p_hat.cwiseProduct(s.ph_exp - s.ph_imp);
  const Vec d_gate_pre =
      d_gate.cwiseProduct(s.gate).cwiseProduct(Vec::Ones(F) - s.gate);
  P.fusion_W.grad += d_gate_pre * (s.ph_exp + s.ph_imp).transpose();
  P.fusion_b.grad += d_gate_pre;
  const Vec through_gate = P.fusion_W.value.transpose() * d_gate_pre;
  const Vec d_ph_exp = d_p_hat.cwiseProduct(s.gate) + through_gate;
  const Vec d_ph_imp =
      d_p_hat.cwiseProduct(Vec::Ones(F) - s.gate) + through_gate;

  Vec d_p = Vec::Zero(F);
  auto mlp_backward = [&](BranchMlp& m, const Vec& d_out, const Vec& x,
                          const Vec& h_pre, const Vec& h) {
    m.W2.grad += d_out * h.transpose();
    m.b2.grad += d_out;
    Vec dh = m.W2.value.transpose() * d_out;
    Vec dh_pre = dh.cwiseProduct(nn::relu_mask(h_pre));
    m.W1.grad += dh_pre * x.transpose();
    m.b1.grad += dh_pre;
    Vec dx = m.W1.value.transpose() * dh_pre;
    d_p += dx.head(F);
    return Vec(dx.tail(F));  // d(branch sum)
  };
  const Vec d_sum_exp =
      mlp_backward(P.mlp_explicit, d_ph_exp, s.x_exp, s.h_exp_pre, s.h_exp);
  const Vec d_sum_imp =
      mlp_backward(P.mlp_implicit, d_ph_imp, s.x_imp, s.h_imp_pre, s.h_imp);

  if (!P.config.zero_explicit_branch)
    for (std::size_t l = 0; l < s.explicit_paths.size(); ++l)
      attend_backward(P.explicit_att[l], s.explicit_paths[l], s.p, q, d_sum_exp,
                      d_p, dQ);
  if (!P.config.zero_implicit_branch)
    for (std::size_t l = 0; l < s.implicit_paths.size(); ++l)
      attend_backward(P.implicit_att[l], s.implicit_paths[l], s.p, q, d_sum_imp,
                      d_p, dQ);

  const Vec d_p_pre = d_p.cwiseProduct(nn::relu_mask(s.p_pre));
  P.user_b.grad += d_p_pre;
  for (Index v : s.profile) P.user_W.grad.col(v) += d_p_pre;
}

std::vector<std::vector<Index>> item_user_lists(const SpBool& y_uv) {
  std::vector<std::vector<Index>> lists(
      static_cast<std::size_t>(y_uv.cols()));
  for (Index u = 0; u < y_uv.rows(); ++u)
    for (SpBool::InnerIterator it(y_uv, u); it; ++it)
      lists[static_cast<std::size_t>(it.col())].push_back(u);
  return lists;
}

void items_backward(ModelParams& P, const ItemEmbeddings& q,
                    const std::vector<std::vector<Index>>& item_users,
                    const Mat& dQ) {
  for (Index j = 0; j < dQ.cols(); ++j) {
    if (dQ.col(j).isZero(0.0)) continue;
    const Vec du = dQ.col(j).cwiseProduct(nn::relu_mask(q.pre.col(j)));
    P.item_b.grad += du;
    for (Index u : item_users[static_cast<std::size_t>(j)])
      P.item_W.grad.col(u) += du;
  }
}

// --------------------------------------------------------------------
// score heads
// --------------------------------------------------------------------

namespace {

ScoreState scores_impl(const Mat& pred_W, const Mat& out_W, const Vec& out_b,
                       const Vec& input) {
  ScoreState ss;
  ss.z = pred_W * input;
  ss.logits = out_W * ss.z + out_b;
  ss.pi = nn::softmax(ss.logits);
  return ss;
}

Vec scores_backward_impl(Parameter& pred_W, Parameter& out_W, Parameter& out_b,
                         const ScoreState& ss, const Vec& input,
                         const Vec& d_logits) {
  out_W.grad += d_logits * ss.z.transpose();
  out_b.grad += d_logits;
  const Vec dz = out_W.value.transpose() * d_logits;
  pred_W.grad += dz * input.transpose();
  return pred_W.value.transpose() * dz;
}

}  // namespace

ScoreState user_scores(const ModelParams& P, const Vec& p_hat) {
  return scores_impl(P.user_pred_W.value, P.user_out_W.value,
                     P.user_out_b.value.col(0), p_hat);
}

ScoreState group_scores(const ModelParams& P, const Vec& r_g) {
  return scores_impl(P.group_pred_W.value, P.group_out_W.value,
                     P.group_out_b.value.col(0), r_g);
}

Vec user_scores_backward(ModelParams& P, const ScoreState& ss, const Vec& p_hat,
                         const Vec& d_logits) {
  return scores_backward_impl(P.user_pred_W, P.user_out_W, P.user_out_b, ss,
                              p_hat, d_logits);
}

Vec group_scores_backward(ModelParams& P, const ScoreState& ss, const Vec& r_g,
                          const Vec& d_logits) {
  return scores_backward_impl(P.group_pred_W, P.group_out_W, P.group_out_b, ss,
                              r_g, d_logits);
}

}  // namespace grouprec::model
