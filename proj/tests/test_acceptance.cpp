#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "grouprec/aggregation.hpp"
#include "grouprec/commands.hpp"
#include "grouprec/data_io.hpp"
#include "grouprec/evaluation.hpp"
#include "grouprec/hin.hpp"
#include "grouprec/model.hpp"
#include "grouprec/rng.hpp"
#include "grouprec/training.hpp"

// Release gate: ten numbered criteria, each printing exactly one
// "CRITERION n PASS|FAIL" line. Tolerances are pinned here and nowhere else.

using namespace grouprec;
using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kGradTol = 1e-4;          // criterion 1
constexpr double kGradBudgetSec = 10.0;    // criterion 1
constexpr double kMetricTol = 1e-12;       // criterion 4
constexpr double kNormTol = 1e-9;          // criterion 5
constexpr double kReductionTol = 1e-12;    // criterion 6
constexpr double kFullFloorHr5 = 0.8;      // criterion 7
constexpr double kNoDepCeilHr5 = 0.4;      // criterion 7
constexpr double kStudyBudgetSec = 120.0;  // criterion 7

bool announce(int n, bool ok) {
  std::printf("CRITERION %d %s\n", n, ok ? "PASS" : "FAIL");
  std::fflush(stdout);
  return ok;
}

#define EXPECT(cond, what)             \
  do {                                 \
    if (!(cond)) {                     \
      ok = false;                      \
      FAIL_CHECK("unmet: " << (what)); \
    }                                  \
  } while (0)

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("grouprec_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---- dense boolean oracles (criteria 2 and 3) ----------------------

using BoolDense = std::vector<std::vector<int>>;

BoolDense dense_of(const SpBool& m) {
  BoolDense d(static_cast<std::size_t>(m.rows()),
              std::vector<int>(static_cast<std::size_t>(m.cols()), 0));
  for (Index r = 0; r < m.rows(); ++r)
    for (SpBool::InnerIterator it(m, r); it; ++it)
      d[static_cast<std::size_t>(r)][static_cast<std::size_t>(it.col())] = 1;
  return d;
}

SpBool sparse_of(const BoolDense& d, Index rows, Index cols) {
  std::vector<Eigen::Triplet<std::int32_t>> trip;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      if (d[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)])
        trip.emplace_back(r, c, 1);
  SpBool m(rows, cols);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

BoolDense random_dense(Rng& rng, Index rows, Index cols, double density) {
  BoolDense d(static_cast<std::size_t>(rows),
              std::vector<int>(static_cast<std::size_t>(cols), 0));
  for (auto& row : d)
    for (auto& cell : row) cell = rng.uniform() < density ? 1 : 0;
  return d;
}

BoolDense naive_product(const BoolDense& a, const BoolDense& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  BoolDense out(n, std::vector<int>(m, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < k; ++t)
        if (a[i][t] && b[t][j]) {
          out[i][j] = 1;
          break;
        }
  return out;
}

BoolDense naive_closure(const BoolDense& adj, int depth) {
  const std::size_t m = adj.size();
  BoolDense acc(m, std::vector<int>(m, 0));
  BoolDense power = adj;
  for (int d = 1; d <= depth; ++d) {
    if (d > 1) power = naive_product(power, adj);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (power[i][j]) acc[i][j] = 1;
  }
  for (std::size_t i = 0; i < m; ++i) acc[i][i] = 0;
  return acc;
}

// ---- shared fixtures ------------------------------------------------

hin::InteractionStore planted_store(data_io::PlantMode mode) {
  data_io::SyntheticSpec spec;  // 200 users, 60 items, 40 groups, seed 7
  spec.mode = mode;
  data_io::LoadedData d = data_io::assemble(data_io::generate_synthetic(spec));
  hin::derive_multi_hop(d.store, 1);
  return d.store;
}

hin::InteractionStore micro_store() {
  std::vector<hin::PairRecord> ui = {{"0", "0"}, {"0", "1"}, {"1", "1"},
                                     {"1", "2"}, {"2", "0"}, {"2", "3"}};
  std::vector<hin::PairRecord> ii = {
      {"0", "1"}, {"1", "2"}, {"2", "3"}, {"3", "0"}, {"1", "3"}};
  std::vector<hin::PairRecord> gu = {{"0", "0"}, {"0", "1"}, {"1", "1"},
                                     {"1", "2"}};
  auto st = hin::build_store(ui, ii, gu);
  hin::derive_multi_hop(st, 1);
  for (const std::string label : {"P1", "PP1"})
    st.per_path_incidence[label] =
        hin::enumerate_path_incidence(st, hin::builtin_path(label));
  return st;
}

}  // namespace

// ====================================================================
// 1. gradient correctness on the micro-instance
// ====================================================================

TEST_CASE("criterion 1: analytic gradients match central differences") {
  bool ok = true;
  const auto t0 = Clock::now();
  std::ostringstream transcript;
  Scalar worst = -1.0;
  try {
    // 3 users, 4 items, 2 groups, one plain and one dependency path, F=5;
    // checks every tensor of the user loss, then of the group loss
    worst = cli::cmd_gradcheck(kGradTol, /*inject_fault=*/false, transcript,
                               /*seed=*/4, /*h=*/1e-5);
  } catch (const std::exception& e) {
    EXPECT(false, std::string("gradient check threw: ") + e.what());
  }
  const double secs = seconds_since(t0);
  EXPECT(worst >= 0.0 && worst < kGradTol,
         "worst relative error " + std::to_string(worst) + " under " +
             std::to_string(kGradTol));
  EXPECT(secs < kGradBudgetSec, "runtime under 10 s");
  MESSAGE("worst relative error ", worst, " in ", secs, " s");
  CHECK(announce(1, ok));
}

// ====================================================================
// 2. multi-hop derivation vs dense oracle
// ====================================================================

TEST_CASE("criterion 2: multi-hop matrices equal the boolean-product oracle") {
  bool ok = true;
  Rng rng(derive_seed(2026, "accept_multihop"));
  for (int rep = 0; rep < 100; ++rep) {
    const Index n = static_cast<Index>(1 + rng.below(20));
    const Index m = static_cast<Index>(2 + rng.below(19));
    const Index s = static_cast<Index>(1 + rng.below(6));
    const int depth = static_cast<int>(1 + rng.below(3));

    hin::InteractionStore st;
    st.n_users = n;
    st.n_items = m;
    st.n_groups = s;
    const BoolDense uv = random_dense(rng, n, m, 0.3);
    const BoolDense gv = random_dense(rng, s, m, 0.3);
    BoolDense vv = random_dense(rng, m, m, 0.2);
    for (Index i = 0; i < m; ++i)
      vv[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0;
    st.y_uv = sparse_of(uv, n, m);
    st.y_gv = sparse_of(gv, s, m);
    st.y_vv = sparse_of(vv, m, m);

    hin::derive_multi_hop(st, depth);
    const BoolDense closure = naive_closure(vv, depth);
    EXPECT(dense_of(st.y_uvv) == naive_product(uv, closure),
           "user multi-hop equals oracle (rep " + std::to_string(rep) + ")");
    EXPECT(dense_of(st.y_gvv) == naive_product(gv, closure),
           "group multi-hop equals oracle (rep " + std::to_string(rep) + ")");
  }
  CHECK(announce(2, ok));
}

// ====================================================================
// 3. path incidence vs exhaustive typed walks
// ====================================================================

namespace {

std::vector<Index> walk_direct(const BoolDense& uv, Index n_items, Index u) {
  std::set<Index> out;
  for (Index j = 0; j < n_items; ++j)
    if (uv[static_cast<std::size_t>(u)][static_cast<std::size_t>(j)])
      out.insert(j);
  return {out.begin(), out.end()};
}

std::vector<Index> walk_via(const BoolDense& left, const BoolDense& right,
                            Index n_mid, Index n_items, Index u) {
  std::set<Index> out;
  for (Index w = 0; w < n_mid; ++w) {
    if (!left[static_cast<std::size_t>(u)][static_cast<std::size_t>(w)])
      continue;
    for (Index j = 0; j < n_items; ++j)
      if (right[static_cast<std::size_t>(w)][static_cast<std::size_t>(j)])
        out.insert(j);
  }
  return {out.begin(), out.end()};
}

std::vector<std::pair<Index, Index>> walk_hop(const BoolDense& vv,
                                              Index n_items,
                                              const std::vector<Index>& srcs) {
  std::set<std::pair<Index, Index>> out;
  for (Index i : srcs)
    for (Index t = 0; t < n_items; ++t)
      if (vv[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)])
        out.insert({i, t});
  return {out.begin(), out.end()};
}

}  // namespace

TEST_CASE("criterion 3: path incidence equals exhaustive typed walks") {
  bool ok = true;
  Rng rng(derive_seed(2026, "accept_walks"));
  auto sorted = [](std::vector<Index> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  auto sorted_pairs = [](std::vector<std::pair<Index, Index>> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = static_cast<Index>(1 + rng.below(5));
    const Index m = static_cast<Index>(2 + rng.below(4));
    const Index nv = static_cast<Index>(1 + rng.below(4));
    const Index nc = static_cast<Index>(1 + rng.below(4));
    const BoolDense uv = random_dense(rng, n, m, 0.4);
    BoolDense vv = random_dense(rng, m, m, 0.3);
    for (Index i = 0; i < m; ++i)
      vv[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0;
    const BoolDense u_vid = random_dense(rng, n, nv, 0.4);
    const BoolDense vid_i = random_dense(rng, nv, m, 0.4);
    const BoolDense u_crs = random_dense(rng, n, nc, 0.4);
    const BoolDense crs_i = random_dense(rng, nc, m, 0.4);

    hin::InteractionStore st;
    st.n_users = n;
    st.n_items = m;
    st.n_groups = 1;
    st.y_uv = sparse_of(uv, n, m);
    st.y_vv = sparse_of(vv, m, m);
    st.y_gv.resize(1, m);

    hin::AuxRelations aux;
    aux.relations[{"user", "video"}] = sparse_of(u_vid, n, nv);
    aux.relations[{"video", "item"}] = sparse_of(vid_i, nv, m);
    aux.relations[{"user", "course"}] = sparse_of(u_crs, n, nc);
    aux.relations[{"course", "item"}] = sparse_of(crs_i, nc, m);

    std::map<std::string, hin::PathIncidence> inc;
    for (const char* label : {"P1", "P2", "P3", "PP1", "PP2", "PP3"})
      inc.emplace(label, hin::enumerate_path_incidence(
                             st, hin::builtin_path(label), aux));

    for (Index u = 0; u < n; ++u) {
      const std::size_t su = static_cast<std::size_t>(u);
      const auto direct = walk_direct(uv, m, u);
      const auto via_vid = walk_via(u_vid, vid_i, nv, m, u);
      const auto via_crs = walk_via(u_crs, crs_i, nc, m, u);
      EXPECT(sorted(inc.at("P1").items[su]) == direct, "P1 walk set");
      EXPECT(sorted(inc.at("P2").items[su]) == via_vid, "P2 walk set");
      EXPECT(sorted(inc.at("P3").items[su]) == via_crs, "P3 walk set");
      EXPECT(sorted_pairs(inc.at("PP1").pairs[su]) == walk_hop(vv, m, direct),
             "PP1 walk pairs");
      EXPECT(sorted_pairs(inc.at("PP2").pairs[su]) == walk_hop(vv, m, via_vid),
             "PP2 walk pairs");
      EXPECT(sorted_pairs(inc.at("PP3").pairs[su]) == walk_hop(vv, m, via_crs),
             "PP3 walk pairs");
    }
  }
  CHECK(announce(3, ok));
}

// ====================================================================
// 4. ranking metrics vs brute force
// ====================================================================

TEST_CASE("criterion 4: HR and NDCG match brute-force sums") {
  bool ok = true;
  Rng rng(derive_seed(2026, "accept_metrics"));
  const std::vector<int> cutoffs = {1, 2, 5, 10, 20};
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t k = 1 + rng.below(30);
    std::vector<long> ranks(k);
    for (auto& r : ranks) r = static_cast<long>(1 + rng.below(50));
    for (int N : cutoffs) {
      double hits = 0.0, gain = 0.0;
      for (long r : ranks) {
        if (r <= N) {
          hits += 1.0;
          gain += 1.0 / std::log2(static_cast<double>(r) + 1.0);
        }
      }
      const double hr = hits / static_cast<double>(k);
      const double ndcg = gain / static_cast<double>(k);
      EXPECT(std::abs(eval::hr_from_ranks(ranks, N) - hr) <= kMetricTol,
             "HR matches within 1e-12");
      EXPECT(std::abs(eval::ndcg_from_ranks(ranks, N) - ndcg) <= kMetricTol,
             "NDCG matches within 1e-12");
    }
  }
  // single relevant item at rank 3 under cutoff 5: 1/log2(4) is exactly 1/2
  EXPECT(eval::hr_from_ranks({3}, 5) == 1.0, "closed-form HR");
  EXPECT(eval::ndcg_from_ranks({3}, 5) == 0.5, "closed-form NDCG");
  EXPECT(eval::hr_from_ranks({6}, 5) == 0.0, "miss scores zero");
  CHECK(announce(4, ok));
}

// ====================================================================
// 5. normalization invariants across a training run
// ====================================================================

TEST_CASE("criterion 5: attention and score distributions sum to one") {
  bool ok = true;
  hin::InteractionStore full = planted_store(data_io::PlantMode::Implicit);
  const eval::Split split = eval::split_dataset(full, {});
  hin::InteractionStore train =
      eval::build_train_store(full, split, {"P1", "PP1"}, 1);

  training::TrainConfig cfg;
  cfg.embed_dim = 8;
  cfg.batch_size = 32;
  cfg.seed = 1;
  cfg.probe_normalization = true;  // track every softmax sum seen
  training::Trainer tr(train, cfg);
  tr.init_params();
  tr.run_stage1(cfg.pretrain_epochs);
  tr.run_stage2(cfg.epochs);

  EXPECT(tr.norm_max_dev <= kNormTol,
         "max |softmax sum - 1| = " + std::to_string(tr.norm_max_dev) +
             " within 1e-9");
  MESSAGE("largest deviation from 1: ", tr.norm_max_dev);
  CHECK(announce(5, ok));
}

// ====================================================================
// 6. reduction identities
// ====================================================================

TEST_CASE("criterion 6: zeroed fusion and aggregator reduce to means") {
  bool ok = true;
  hin::InteractionStore st = micro_store();

  // zero fusion parameters: the gate sits at 1/2, so the fused preference
  // is the plain mean of the two branch outputs
  {
    model::ModelConfig mc;
    mc.embed_dim = 5;
    model::ModelParams P = model::make_params(mc, st.n_users, st.n_items);
    P.init(derive_seed(2026, "accept_fusion"));
    P.fusion_W.value.setZero();
    P.fusion_b.value.setZero();
    const model::PathBindings paths = model::bind_paths(mc, st);
    const model::ItemEmbeddings q = model::embed_items(P, st.y_uv);
    for (Index u = 0; u < st.n_users; ++u) {
      const model::UserState s = model::user_forward(P, st, paths, q, u);
      const Vec mean = 0.5 * (s.ph_exp + s.ph_imp);
      EXPECT((s.p_hat - mean).cwiseAbs().maxCoeff() <= kReductionTol,
             "fused preference equals branch mean");
    }
  }

  // zero aggregator parameters: every member score ties, so attention
  // weights collapse to the uniform meanpool weights
  {
    model::ModelConfig mc;
    mc.embed_dim = 6;
    model::ModelParams P = model::make_params(mc, st.n_users, st.n_items);
    P.init(derive_seed(2026, "accept_agg"));
    for (nn::Parameter* p : {&P.agg_W, &P.agg_b, &P.agg_mlp_W1, &P.agg_mlp_b1,
                             &P.agg_mlp_W2, &P.agg_mlp_b2, &P.agg_h})
      p->value.setZero();
    Rng rng(derive_seed(2026, "accept_agg_phat"));
    for (int rep = 0; rep < 20; ++rep) {
      const Index k = static_cast<Index>(1 + rng.below(6));
      Mat phat(6, k);
      for (Index i = 0; i < phat.rows(); ++i)
        for (Index j = 0; j < k; ++j) phat(i, j) = 2.0 * rng.uniform() - 1.0;
      std::vector<Index> members(static_cast<std::size_t>(k));
      for (Index i = 0; i < k; ++i) members[static_cast<std::size_t>(i)] = i;
      const aggregation::GroupState gs = aggregation::aggregate(P, phat, members);
      const Vec mean = phat.rowwise().mean();
      EXPECT((gs.r - mean).cwiseAbs().maxCoeff() <= kReductionTol,
             "attention aggregate equals meanpool");
      EXPECT((gs.gamma.array() - 1.0 / static_cast<double>(k))
                     .abs()
                     .maxCoeff() <= kReductionTol,
             "weights are uniform");
    }
  }
  CHECK(announce(6, ok));
}

// ====================================================================
// 7. planted-signal study
// ====================================================================

TEST_CASE("criterion 7: dependency signal separates the model variants") {
  bool ok = true;
  const auto t0 = Clock::now();

  training::TrainConfig cfg;
  cfg.embed_dim = 16;
  cfg.batch_size = 32;
  cfg.pretrain_epochs = 30;
  cfg.epochs = 30;
  cfg.seed = 1;
  const eval::SplitSpec sp;
  const std::vector<int> at5 = {5};

  // implicit plant: held-out items are reachable only through dependencies,
  // so removing the dependency branch and targets must collapse accuracy
  {
    hin::InteractionStore full = planted_store(data_io::PlantMode::Implicit);
    const double hr_full =
        eval::run_variant(full, sp, cfg, training::Variant::Full, at5, 1)
            .report.hr.at(5);
    const double hr_rdmp =
        eval::run_variant(full, sp, cfg, training::Variant::RDMP, at5, 1)
            .report.hr.at(5);
    EXPECT(hr_full >= kFullFloorHr5,
           "full model HR@5 " + std::to_string(hr_full) + " >= 0.8");
    EXPECT(hr_rdmp <= kNoDepCeilHr5,
           "dependency-blind HR@5 " + std::to_string(hr_rdmp) + " <= 0.4");
    MESSAGE("implicit plant: full ", hr_full, ", RDMP ", hr_rdmp);
  }

  // mixed plant: both signal kinds present, the fused model dominates both
  // single-branch ablations
  {
    hin::InteractionStore mixed = planted_store(data_io::PlantMode::Mixed);
    const double hr_full =
        eval::run_variant(mixed, sp, cfg, training::Variant::Full, at5, 1)
            .report.hr.at(5);
    const double hr_rdmp =
        eval::run_variant(mixed, sp, cfg, training::Variant::RDMP, at5, 1)
            .report.hr.at(5);
    const double hr_rmp =
        eval::run_variant(mixed, sp, cfg, training::Variant::RMP, at5, 1)
            .report.hr.at(5);
    EXPECT(hr_full >= std::max(hr_rdmp, hr_rmp),
           "mixed plant: full >= max(single-branch ablations)");
    MESSAGE("mixed plant: full ", hr_full, ", RDMP ", hr_rdmp, ", RMP ",
            hr_rmp);
  }

  const double secs = seconds_since(t0);
  EXPECT(secs < kStudyBudgetSec, "study finished under 2 minutes");
  MESSAGE("study wall time ", secs, " s");
  CHECK(announce(7, ok));
}

// ====================================================================
// 8. training behavior over the default epoch budget
// ====================================================================

TEST_CASE("criterion 8: smoothed losses fall and frozen tensors hold") {
  bool ok = true;
  hin::InteractionStore full = planted_store(data_io::PlantMode::Implicit);
  const eval::Split split = eval::split_dataset(full, {});
  hin::InteractionStore train =
      eval::build_train_store(full, split, {"P1", "PP1"}, 1);

  training::TrainConfig cfg;  // epochs stay at their 50/50 defaults
  cfg.embed_dim = 8;
  cfg.batch_size = 32;
  // inside the stable step-size regime at this width; larger steps make
  // Adam orbit the optimum rather than settle, which is an optimizer
  // property, not a correctness signal
  cfg.pretrain_learning_rate = 0.002;
  cfg.seed = 1;

  training::Trainer tr(train, cfg);
  tr.init_params();
  tr.run_stage1(cfg.pretrain_epochs);

  // freeze contract: the user-side tensors must not move in stage 2
  std::vector<Mat> user_before;
  for (const nn::Parameter* p : tr.params().theta_u())
    user_before.push_back(p->value);

  tr.run_stage2(cfg.epochs);

  const auto user_tensors = tr.params().theta_u();
  for (std::size_t i = 0; i < user_tensors.size(); ++i)
    EXPECT(user_tensors[i]->value == user_before[i],
           "frozen tensor " + user_tensors[i]->name + " is bit-identical");

  for (int stage = 1; stage <= 2; ++stage) {
    std::vector<Scalar> losses;
    for (const auto& rec : tr.history())
      if (rec.stage == stage) losses.push_back(rec.loss);
    EXPECT(losses.size() == 50, "stage ran its default 50 epochs");
    const std::vector<Scalar> smooth = training::smooth_losses(losses, 5);
    for (std::size_t i = 1; i < smooth.size(); ++i)
      EXPECT(smooth[i] <= smooth[i - 1],
             "stage " + std::to_string(stage) + " smoothed loss nonincreasing "
             "at window " + std::to_string(i));
  }
  CHECK(announce(8, ok));
}

// ====================================================================
// 9. determinism and resume
// ====================================================================

TEST_CASE("criterion 9: byte-identical artifacts and seamless resume") {
  bool ok = true;
  TempDir dir("determinism");

  data_io::SyntheticSpec spec;
  spec.n_users = 60;
  spec.n_items = 30;
  spec.n_groups = 12;
  spec.noise_rate = 0.0;
  data_io::LoadedData d = data_io::assemble(data_io::generate_synthetic(spec));
  hin::derive_multi_hop(d.store, 1);
  const eval::Split split = eval::split_dataset(d.store, {});
  hin::InteractionStore train =
      eval::build_train_store(d.store, split, {"P1", "PP1"}, 1);

  training::TrainConfig cfg;
  cfg.embed_dim = 6;
  cfg.batch_size = 8;
  cfg.pretrain_epochs = 4;
  cfg.epochs = 4;
  cfg.seed = 11;

  auto run_all = [&](const std::string& tag) {
    training::Trainer tr(train, cfg);
    tr.init_params();
    tr.run_stage1(cfg.pretrain_epochs);
    tr.run_stage2(cfg.epochs);
    data_io::save_checkpoint(data_io::snapshot(tr, "{}", 2), dir.sub(tag));
    auto report = eval::evaluate(tr.params(), train, split, {5, 10});
    data_io::write_report_csv(report, dir.sub(tag + ".csv"));
    data_io::write_report_json(report, "{}", dir.sub(tag + ".json"));
  };
  run_all("a.ckpt");
  run_all("b.ckpt");
  EXPECT(slurp(dir.sub("a.ckpt")) == slurp(dir.sub("b.ckpt")),
         "same seed, same checkpoint bytes");
  EXPECT(slurp(dir.sub("a.ckpt.json")) == slurp(dir.sub("b.ckpt.json")),
         "same seed, same checkpoint mirror");
  EXPECT(slurp(dir.sub("a.ckpt.csv")) == slurp(dir.sub("b.ckpt.csv")),
         "same seed, same report rows");
  EXPECT(slurp(dir.sub("a.ckpt.json")) == slurp(dir.sub("b.ckpt.json")),
         "same seed, same report document");

  // interrupt after stage 1, resume in a fresh process-equivalent trainer
  {
    training::Trainer first(train, cfg);
    first.init_params();
    first.run_stage1(cfg.pretrain_epochs);
    data_io::save_checkpoint(data_io::snapshot(first, "{}", 1),
                             dir.sub("mid.ckpt"), /*json_mirror=*/false);

    training::Trainer second(train, cfg);
    data_io::restore(data_io::load_checkpoint(dir.sub("mid.ckpt")), second);
    second.run_stage2(cfg.epochs);
    data_io::save_checkpoint(data_io::snapshot(second, "{}", 2),
                             dir.sub("resumed.ckpt"), /*json_mirror=*/false);

    training::Trainer whole(train, cfg);
    whole.init_params();
    whole.run_stage1(cfg.pretrain_epochs);
    whole.run_stage2(cfg.epochs);
    data_io::save_checkpoint(data_io::snapshot(whole, "{}", 2),
                             dir.sub("whole.ckpt"), /*json_mirror=*/false);

    EXPECT(slurp(dir.sub("resumed.ckpt")) == slurp(dir.sub("whole.ckpt")),
           "stage-split run equals the uninterrupted run bit for bit");

    auto report_of = [&](training::Trainer& tr, const std::string& tag) {
      auto rep = eval::evaluate(tr.params(), train, split, {5, 10});
      data_io::write_report_csv(rep, dir.sub(tag));
      return slurp(dir.sub(tag));
    };
    EXPECT(report_of(second, "resumed.csv") == report_of(whole, "whole.csv"),
           "resumed model scores identically");
  }
  CHECK(announce(9, ok));
}

// ====================================================================
// 10. fixed-shape dataset statistics
// ====================================================================

namespace {

json prepare_stats_for(const data_io::Bundle& bundle, const TempDir& dir,
                       const std::string& tag) {
  const std::string data_dir = dir.sub(tag + "_data");
  data_io::save_dataset(bundle, data_dir);
  cli::RunConfig cfg;
  cfg.data_dir = data_dir;
  cfg.out_dir = dir.sub(tag + "_prep");
  cfg.depth = 1;
  cli::cmd_prepare(cfg);
  return json::parse(slurp(dir.sub(tag + "_prep") + "/stats.json"));
}

}  // namespace

TEST_CASE("criterion 10: fixed-shape fixtures reproduce the target counts") {
  bool ok = true;
  TempDir dir("shapes");

  {
    const json s = prepare_stats_for(data_io::mooccube_shaped(), dir, "mc");
    EXPECT(s["users"] == 17908, "mooccube users");
    EXPECT(s["items"] == 394, "mooccube items");
    EXPECT(s["groups"] == 2447, "mooccube groups");
    EXPECT(s["counts"]["item_item"] == 937, "mooccube dependencies");
    EXPECT(s["counts"]["user_item"] == 616835, "mooccube user-item");
    EXPECT(s["counts"]["group_item"] == 93910, "mooccube group-item");
    EXPECT(s["counts"]["group_item_dependency"] == 100360,
           "mooccube group dependency reach");
    // The published user-level dependency total (1982499) cannot coexist
    // with the group-level totals above: group rows are member unions, so
    // summed group reach is at least summed member reach divided by the
    // largest group size (1982499/8 > 100360). The fixture pins the largest
    // self-consistent value instead; see the project decision log.
    EXPECT(s["counts"]["user_item_dependency"] == 734492,
           "mooccube user dependency reach (self-consistent value)");
  }
  {
    const json s = prepare_stats_for(data_io::movielens_shaped(), dir, "ml");
    EXPECT(s["users"] == 895, "movielens users");
    EXPECT(s["items"] == 1679, "movielens items");
    EXPECT(s["groups"] == 150, "movielens groups");
    EXPECT(s["counts"]["item_item"] == 6173, "movielens dependencies");
    EXPECT(s["counts"]["user_item"] == 96464, "movielens user-item");
    EXPECT(s["counts"]["user_item_dependency"] == 16062,
           "movielens user dependency reach");
    EXPECT(s["counts"]["group_item"] == 47725, "movielens group-item");
    EXPECT(s["counts"]["group_item_dependency"] == 8191,
           "movielens group dependency reach");
  }
  CHECK(announce(10, ok));
}
