#include "grouprec/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "grouprec/aggregation.hpp"
#include "grouprec/model.hpp"
#include "grouprec/nn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace grouprec::cli {

// ====================================================================
// configuration
// ====================================================================

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<int> parse_cutoffs(const std::vector<std::string>& tokens) {
  std::vector<int> out;
  for (const auto& t : tokens) {
    int n = 0;
    try {
      std::size_t pos = 0;
      n = std::stoi(t, &pos);
      if (pos != t.size()) throw std::invalid_argument(t);
    } catch (const std::exception&) {
      throw UsageError("invalid metric cutoff '" + t + "'");
    }
    if (n < 1) throw UsageError("metric cutoff must be >= 1, got " + t);
    out.push_back(n);
  }
  if (out.empty()) throw UsageError("at least one metric cutoff is required");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

model::AggregatorKind parse_aggregator(const std::string& name) {
  if (name == "attention") return model::AggregatorKind::Attention;
  if (name == "meanpool") return model::AggregatorKind::MeanPool;
  throw UsageError("unknown aggregator '" + name +
                   "' (expected attention or meanpool)");
}

std::string aggregator_name(model::AggregatorKind k) {
  return k == model::AggregatorKind::Attention ? "attention" : "meanpool";
}

}  // namespace

RunConfig config_from_json(const std::string& json_text,
                           const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw UsageError(origin + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw UsageError(origin + ": config must be an object");
  RunConfig cfg;
  try {
    for (const auto& [key, val] : j.items()) {
      if (key == "data") cfg.data_dir = val.get<std::string>();
      else if (key == "store") cfg.store_path = val.get<std::string>();
      else if (key == "out") cfg.out_dir = val.get<std::string>();
      else if (key == "resume") cfg.resume_path = val.get<std::string>();
      else if (key == "depth") cfg.depth = val.get<int>();
      else if (key == "split_seed") cfg.split_seed = val.get<std::uint64_t>();
      else if (key == "min_interactions") cfg.min_interactions = val.get<int>();
      else if (key == "variant")
        cfg.train.variant = training::parse_variant(val.get<std::string>());
      else if (key == "aggregator")
        cfg.train.aggregator = parse_aggregator(val.get<std::string>());
      else if (key == "embed_dim") cfg.train.embed_dim = val.get<Index>();
      else if (key == "learning_rate")
        cfg.train.learning_rate = val.get<Scalar>();
      else if (key == "pretrain_learning_rate")
        cfg.train.pretrain_learning_rate = val.get<Scalar>();
      else if (key == "batch_size") cfg.train.batch_size = val.get<Index>();
      else if (key == "weight_decay")
        cfg.train.weight_decay = val.get<Scalar>();
      else if (key == "epochs") cfg.train.epochs = val.get<int>();
      else if (key == "pretrain_epochs")
        cfg.train.pretrain_epochs = val.get<int>();
      else if (key == "seed") cfg.train.seed = val.get<std::uint64_t>();
      else if (key == "freeze_user_in_stage2")
        cfg.train.freeze_user_in_stage2 = val.get<bool>();
      else if (key == "explicit_paths")
        cfg.train.explicit_paths = val.get<std::vector<std::string>>();
      else if (key == "implicit_paths")
        cfg.train.implicit_paths = val.get<std::vector<std::string>>();
      else if (key == "cutoffs") cfg.cutoffs = val.get<std::vector<int>>();
      else if (key == "eval_split") cfg.eval_split = val.get<std::string>();
      else if (key == "threads") cfg.threads = val.get<int>();
      else
        throw UsageError(origin + ": unknown config field '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw UsageError(origin + ": bad config value: " + e.what());
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), path);
}

std::string config_echo(const RunConfig& cfg) {
  // out/resume/threads steer where and how work runs, never what it
  // computes, so they stay out of the echo: a resumed run must reproduce an
  // uninterrupted run's artifacts byte for byte.
  json j;
  j["data"] = cfg.data_dir;
  j["store"] = cfg.store_path;
  j["depth"] = cfg.depth;
  j["split_seed"] = cfg.split_seed;
  j["min_interactions"] = cfg.min_interactions;
  j["variant"] = training::variant_name(cfg.train.variant);
  j["aggregator"] = aggregator_name(cfg.train.aggregator);
  j["embed_dim"] = cfg.train.embed_dim;
  j["learning_rate"] = cfg.train.learning_rate;
  j["pretrain_learning_rate"] = cfg.train.pretrain_learning_rate;
  j["batch_size"] = cfg.train.batch_size;
  j["weight_decay"] = cfg.train.weight_decay;
  j["epochs"] = cfg.train.epochs;
  j["pretrain_epochs"] = cfg.train.pretrain_epochs;
  j["seed"] = cfg.train.seed;
  j["freeze_user_in_stage2"] = cfg.train.freeze_user_in_stage2;
  j["explicit_paths"] = cfg.train.explicit_paths;
  j["implicit_paths"] = cfg.train.implicit_paths;
  j["cutoffs"] = cfg.cutoffs;
  j["eval_split"] = cfg.eval_split;
  return j.dump();
}

eval::SplitSpec split_spec(const RunConfig& cfg) {
  eval::SplitSpec spec;
  spec.seed = cfg.split_seed;
  spec.min_interactions = cfg.min_interactions;
  return spec;
}

// ====================================================================
// commands
// ====================================================================

namespace {

std::vector<std::string> all_labels(const RunConfig& cfg) {
  std::vector<std::string> labels = cfg.train.explicit_paths;
  labels.insert(labels.end(), cfg.train.implicit_paths.begin(),
                cfg.train.implicit_paths.end());
  return labels;
}

void validate_eval_split(const std::string& s) {
  if (s != "test" && s != "val")
    throw UsageError("eval_split must be 'test' or 'val', got '" + s + "'");
}

struct Pipeline {
  data_io::LoadedData data;
  eval::Split split;
  hin::InteractionStore train_store;
};

Pipeline open_pipeline(const RunConfig& cfg) {
  if (cfg.store_path.empty())
    throw UsageError("config missing required field 'store' (prepared "
                     "interaction store; run prepare first)");
  Pipeline p;
  p.data = data_io::load_store(cfg.store_path);
  p.split = eval::split_dataset(p.data.store, split_spec(cfg));
  p.train_store =
      eval::build_train_store(p.data.store, p.split, all_labels(cfg),
                              std::max(1, p.data.store.depth), p.data.aux);
  return p;
}

void write_reports(const eval::EvalReport& report, const std::string& echo,
                   const fs::path& base) {
  data_io::write_report_csv(report, base.string() + ".csv");
  data_io::write_report_json(report, echo, base.string() + ".json");
}

}  // namespace

void cmd_prepare(const RunConfig& cfg) {
  if (cfg.data_dir.empty())
    throw UsageError("config missing required field 'data' (dataset "
                     "directory with user_item.tsv / groups.tsv)");
  if (cfg.depth < 1) throw UsageError("depth must be >= 1");
  auto bundle = data_io::load_dataset(cfg.data_dir);
  auto data = data_io::assemble(bundle);
  hin::derive_multi_hop(data.store, cfg.depth);
  for (const auto& label : all_labels(cfg)) {
    const auto spec = hin::builtin_path(label);
    data.store.per_path_incidence[label] =
        hin::enumerate_path_incidence(data.store, spec, data.aux);
  }
  fs::create_directories(cfg.out_dir);
  fs::path out(cfg.out_dir);
  const std::string echo = config_echo(cfg);
  data_io::save_store(data.store, data.aux, (out / "store.bin").string());
  data_io::write_prepare_stats(data.store, echo, (out / "stats.json").string(),
                               (out / "item_histogram.csv").string());
}

void cmd_train(const RunConfig& cfg, const std::string& stage) {
  if (stage != "1" && stage != "2" && stage != "both")
    throw UsageError("--stage must be 1, 2, or both, got '" + stage + "'");
  Pipeline p = open_pipeline(cfg);
  fs::create_directories(cfg.out_dir);
  fs::path out(cfg.out_dir);
  const std::string echo = config_echo(cfg);

  training::Trainer trainer(p.train_store, cfg.train);
  const bool skip_stage1 = cfg.train.variant == training::Variant::RPT;
  int marker = 2;
  if (stage == "1") {
    trainer.init_params();
    if (!skip_stage1) trainer.run_stage1(cfg.train.pretrain_epochs);
    marker = 1;
  } else if (stage == "2") {
    trainer.init_params();
    if (!cfg.resume_path.empty()) {
      data_io::restore(data_io::load_checkpoint(cfg.resume_path), trainer);
    } else if (!skip_stage1) {
      throw UsageError("--stage 2 needs --resume CHECKPOINT (only the RPT "
                       "variant starts the group stage from scratch)");
    }
    trainer.run_stage2(cfg.train.epochs);
  } else {
    trainer.init_params();
    if (!skip_stage1) trainer.run_stage1(cfg.train.pretrain_epochs);
    trainer.run_stage2(cfg.train.epochs);
  }

  if (!trainer.history().empty() &&
      !std::isfinite(trainer.history().back().loss))
    throw NumericalError("final training loss is not finite");

  data_io::save_checkpoint(data_io::snapshot(trainer, echo, marker),
                           (out / "checkpoint.bin").string());
  data_io::write_loss_csv(trainer.history(), (out / "loss.csv").string());
  data_io::write_loss_json(trainer.history(), (out / "loss.json").string());
}

void cmd_evaluate(RunConfig cfg, const std::string& checkpoint_path) {
  auto ck = data_io::load_checkpoint(checkpoint_path);
  // the checkpoint's embedded config defines the model and the split; the
  // caller only chooses what to measure and where to put it
  RunConfig run = config_from_json(ck.config_json, checkpoint_path);
  if (!cfg.store_path.empty()) run.store_path = cfg.store_path;
  run.cutoffs = parse_cutoffs([&] {
    std::vector<std::string> toks;
    for (int c : cfg.cutoffs) toks.push_back(std::to_string(c));
    return toks;
  }());
  run.eval_split = cfg.eval_split;
  run.threads = cfg.threads;
  run.out_dir = cfg.out_dir;
  validate_eval_split(run.eval_split);

  Pipeline p = open_pipeline(run);
  training::Trainer trainer(p.train_store, run.train);
  trainer.init_params();
  data_io::restore(ck, trainer);

  auto report =
      eval::evaluate(trainer.params(), p.train_store, p.split, run.cutoffs,
                     run.eval_split == "test", run.threads);
  report.variant = training::variant_name(run.train.variant);
  fs::create_directories(run.out_dir);
  write_reports(report, config_echo(run), fs::path(run.out_dir) / "report");
}

void cmd_ablate(const RunConfig& cfg,
                const std::vector<std::string>& variant_names) {
  if (variant_names.empty()) throw UsageError("no variants requested");
  std::vector<training::Variant> variants;
  for (const auto& name : variant_names)
    variants.push_back(training::parse_variant(name));
  validate_eval_split(cfg.eval_split);
  Pipeline p = open_pipeline(cfg);
  fs::create_directories(cfg.out_dir);
  fs::path out(cfg.out_dir);

  std::ofstream table((out / "ablation.csv").string());
  if (!table) throw DataError("cannot write " + (out / "ablation.csv").string());
  table << "variant,metric,N,value\n";
  json combined = json::array();
  for (auto variant : variants) {
    RunConfig vcfg = cfg;
    vcfg.train.variant = variant;
    auto run = eval::run_variant(p.data.store, split_spec(vcfg), vcfg.train,
                                 variant, vcfg.cutoffs, vcfg.threads);
    const std::string vname = training::variant_name(variant);
    write_reports(run.report, config_echo(vcfg), out / ("report_" + vname));
    for (int n : vcfg.cutoffs)
      table << vname << ",HR," << n << ','
            << data_io::format_sig6(run.report.hr.at(n)) << "\n";
    for (int n : vcfg.cutoffs)
      table << vname << ",NDCG," << n << ','
            << data_io::format_sig6(run.report.ndcg.at(n)) << "\n";
    json entry;
    entry["variant"] = vname;
    entry["instances"] = run.report.instance_count;
    for (int n : vcfg.cutoffs) {
      entry["HR"][std::to_string(n)] = run.report.hr.at(n);
      entry["NDCG"][std::to_string(n)] = run.report.ndcg.at(n);
    }
    combined.push_back(std::move(entry));
  }
  json jout;
  jout["config"] = json::parse(config_echo(cfg));
  jout["variants"] = std::move(combined);
  std::ofstream jf((out / "ablation.json").string());
  if (!jf) throw DataError("cannot write " + (out / "ablation.json").string());
  jf << jout.dump(2) << "\n";
}

void cmd_sweep(const RunConfig& cfg, const std::string& grid,
               const std::vector<std::string>& points) {
  struct GridDef {
    std::string field;
    std::vector<Scalar> values;
  };
  GridDef def;
  if (grid == "lr")
    def = {"learning_rate",
           {0.00005, 0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05}};
  else if (grid == "dim")
    def = {"embed_dim", {32, 64, 128, 256, 512, 1024}};
  else if (grid == "batch")
    def = {"batch_size", {32, 64, 128, 256, 512, 1024}};
  else if (grid == "decay")
    def = {"weight_decay", {0.0, 0.001, 0.005, 0.01, 0.05}};
  else
    throw UsageError("unknown grid '" + grid +
                     "' (expected lr, dim, batch, or decay)");
  if (!points.empty()) {
    std::vector<Scalar> chosen;
    for (const auto& t : points) {
      Scalar v = 0;
      try {
        std::size_t pos = 0;
        v = std::stod(t, &pos);
        if (pos != t.size()) throw std::invalid_argument(t);
      } catch (const std::exception&) {
        throw UsageError("invalid grid point '" + t + "'");
      }
      if (std::find(def.values.begin(), def.values.end(), v) ==
          def.values.end())
        throw UsageError("grid point '" + t + "' is not part of the " + grid +
                         " grid");
      chosen.push_back(v);
    }
    def.values = std::move(chosen);
  }
  validate_eval_split(cfg.eval_split);
  Pipeline p = open_pipeline(cfg);
  fs::create_directories(cfg.out_dir);
  fs::path out(cfg.out_dir);

  std::ofstream table((out / ("sweep_" + grid + ".csv")).string());
  if (!table)
    throw DataError("cannot write sweep_" + grid + ".csv in " + cfg.out_dir);
  table << "parameter,value,metric,N,score\n";
  for (Scalar v : def.values) {
    RunConfig pt = cfg;
    if (def.field == "learning_rate") pt.train.learning_rate = v;
    else if (def.field == "embed_dim") pt.train.embed_dim = static_cast<Index>(v);
    else if (def.field == "batch_size") pt.train.batch_size = static_cast<Index>(v);
    else pt.train.weight_decay = v;
    auto run = eval::run_variant(p.data.store, split_spec(pt), pt.train,
                                 pt.train.variant, pt.cutoffs, pt.threads);
    const std::string tag = data_io::format_sig6(v);
    write_reports(run.report, config_echo(pt),
                  out / ("report_" + grid + "_" + tag));
    for (int n : pt.cutoffs)
      table << def.field << ',' << tag << ",HR," << n << ','
            << data_io::format_sig6(run.report.hr.at(n)) << "\n";
    for (int n : pt.cutoffs)
      table << def.field << ',' << tag << ",NDCG," << n << ','
            << data_io::format_sig6(run.report.ndcg.at(n)) << "\n";
  }
}

void cmd_synth(const data_io::SyntheticSpec& spec, const std::string& out_dir,
               const std::string& shape) {
  data_io::Bundle bundle;
  if (shape.empty())
    bundle = data_io::generate_synthetic(spec);
  else if (shape == "mooccube")
    bundle = data_io::mooccube_shaped();
  else if (shape == "movielens")
    bundle = data_io::movielens_shaped();
  else
    throw UsageError("unknown shape '" + shape +
                     "' (expected mooccube or movielens)");
  data_io::save_dataset(bundle, out_dir);
  json j;
  j["mode"] = shape.empty() ? data_io::mode_name(spec.mode) : shape;
  j["users"] = spec.n_users;
  j["items"] = spec.n_items;
  j["groups"] = spec.n_groups;
  j["group_size"] = spec.group_size;
  j["chain_length"] = spec.chain_length;
  j["noise_rate"] = spec.noise_rate;
  j["seed"] = spec.seed;
  j["shaped"] = !shape.empty();
  std::ofstream out((fs::path(out_dir) / "synth_config.json").string());
  if (!out) throw DataError("cannot write synth_config.json in " + out_dir);
  out << j.dump(2) << "\n";
}

// ====================================================================
// gradient check command
// ====================================================================

Scalar cmd_gradcheck(Scalar tol, bool inject_fault, std::ostream& out,
                     std::uint64_t seed, Scalar h) {
  // micro instance: 3 users, 4 items, 2 groups, one plain and one
  // dependency path, embedding width 5
  std::vector<hin::PairRecord> ui = {{"0", "0"}, {"0", "1"}, {"1", "1"},
                                     {"1", "2"}, {"2", "0"}, {"2", "3"}};
  std::vector<hin::PairRecord> ii = {
      {"0", "1"}, {"1", "2"}, {"2", "3"}, {"3", "0"}, {"1", "3"}};
  std::vector<hin::PairRecord> gu = {{"0", "0"}, {"0", "1"}, {"1", "1"},
                                     {"1", "2"}};
  auto store = hin::build_store(ui, ii, gu);
  hin::derive_multi_hop(store, 1);
  for (const std::string label : {"P1", "PP1"})
    store.per_path_incidence[label] =
        hin::enumerate_path_incidence(store, hin::builtin_path(label));

  training::TrainConfig cfg;
  cfg.embed_dim = 5;
  cfg.seed = seed;
  cfg.freeze_user_in_stage2 = false;  // exercise the full chain through p_hat
  cfg.probe_normalization = false;
  training::Trainer trainer(store, cfg);
  trainer.init_params();
  auto& P = trainer.params();

  const std::vector<Index> users = {0, 1, 2};
  const std::vector<Index> groups = {0, 1};
  const auto& targets = trainer.targets();
  const auto& paths = trainer.paths();

  auto check_one = [&](const std::string& label,
                       const std::vector<nn::Parameter*>& tensors,
                       auto&& loss_fn, auto&& backward_fn) {
    auto report = nn::grad_check(loss_fn, backward_fn, tensors, h);
    Scalar worst = 0.0;
    for (const auto& entry : report.entries) {
      worst = std::max(worst, entry.max_rel_err);
      char line[160];
      std::snprintf(line, sizeof(line), "  %-24s max_rel_err %.3e  %s\n",
                    entry.name.c_str(), entry.max_rel_err,
                    entry.max_rel_err <= tol ? "ok" : "FAIL");
      out << line;
    }
    out << label << " worst " << worst << "\n";
    return worst;
  };

  Scalar worst = 0.0;
  out << "user-loss gradients:\n";
  worst = std::max(
      worst,
      check_one(
          "user-loss", P.theta_u(),
          [&] { return training::user_batch_loss(P, store, paths, targets, users); },
          [&] {
            P.zero_grads(P.all());
            training::user_batch_backward(P, store, paths, targets, users);
            if (inject_fault) P.theta_u().front()->grad(0, 0) += 0.1;
          }));
  out << "group-loss gradients:\n";
  worst = std::max(
      worst,
      check_one(
          "group-loss", P.all(),
          [&] {
            return training::group_batch_loss(P, store, paths, targets, groups);
          },
          [&] {
            P.zero_grads(P.all());
            training::group_batch_backward(P, store, paths, targets, groups,
                                           /*backprop_users=*/true);
          }));
  if (worst > tol)
    throw NumericalError("gradient check failed: max relative error " +
                         std::to_string(worst) + " exceeds " +
                         std::to_string(tol));
  return worst;
}

// ====================================================================
// argument parsing
// ====================================================================

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> data, store, out, resume, eval_split, variant,
      aggregator, cutoffs, explicit_paths, implicit_paths;
  std::optional<int> depth, epochs, pretrain_epochs, threads, min_interactions;
  std::optional<long> embed_dim, batch_size;
  std::optional<double> lr, pretrain_lr, weight_decay;
  std::optional<std::uint64_t> seed, split_seed;
  bool freeze_on = false, freeze_off = false;

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    if (data) cfg.data_dir = *data;
    if (store) cfg.store_path = *store;
    if (out) cfg.out_dir = *out;
    if (resume) cfg.resume_path = *resume;
    if (depth) cfg.depth = *depth;
    if (split_seed) cfg.split_seed = *split_seed;
    if (min_interactions) cfg.min_interactions = *min_interactions;
    if (variant) cfg.train.variant = training::parse_variant(*variant);
    if (aggregator) cfg.train.aggregator = parse_aggregator(*aggregator);
    if (embed_dim) cfg.train.embed_dim = static_cast<Index>(*embed_dim);
    if (batch_size) cfg.train.batch_size = static_cast<Index>(*batch_size);
    if (lr) cfg.train.learning_rate = *lr;
    if (pretrain_lr) cfg.train.pretrain_learning_rate = *pretrain_lr;
    if (weight_decay) cfg.train.weight_decay = *weight_decay;
    if (epochs) cfg.train.epochs = *epochs;
    if (pretrain_epochs) cfg.train.pretrain_epochs = *pretrain_epochs;
    if (seed) cfg.train.seed = *seed;
    if (freeze_on && freeze_off)
      throw UsageError("--freeze-user and --no-freeze-user conflict");
    if (freeze_on) cfg.train.freeze_user_in_stage2 = true;
    if (freeze_off) cfg.train.freeze_user_in_stage2 = false;
    if (explicit_paths) cfg.train.explicit_paths = split_csv(*explicit_paths);
    if (implicit_paths) cfg.train.implicit_paths = split_csv(*implicit_paths);
    if (cutoffs) cfg.cutoffs = parse_cutoffs(split_csv(*cutoffs));
    if (eval_split) cfg.eval_split = *eval_split;
    if (threads) cfg.threads = *threads;
    if (cfg.threads < 1) throw UsageError("--threads must be >= 1");
    return cfg;
  }
};

void add_common_options(CLI::App* sub, Overrides& ov) {
  sub->add_option("--config", ov.config_path, "JSON run configuration");
  sub->add_option("--data", ov.data, "dataset directory");
  sub->add_option("--store", ov.store, "prepared store path");
  sub->add_option("--out", ov.out, "output directory");
  sub->add_option("--depth", ov.depth, "dependency closure depth");
  sub->add_option("--variant", ov.variant,
                  "model variant: full, RPT, RDMP, RMP, RAA");
  sub->add_option("--aggregator", ov.aggregator, "attention or meanpool");
  sub->add_option("--embed-dim", ov.embed_dim, "embedding width");
  sub->add_option("--lr", ov.lr, "group-stage learning rate");
  sub->add_option("--pretrain-lr", ov.pretrain_lr, "user-stage learning rate");
  sub->add_option("--batch-size", ov.batch_size, "minibatch size");
  sub->add_option("--weight-decay", ov.weight_decay, "coupled L2 strength");
  sub->add_option("--epochs", ov.epochs, "group-stage epochs");
  sub->add_option("--pretrain-epochs", ov.pretrain_epochs, "user-stage epochs");
  sub->add_option("--seed", ov.seed, "training seed");
  sub->add_option("--split-seed", ov.split_seed, "split seed");
  sub->add_option("--min-interactions", ov.min_interactions,
                  "evaluation threshold on group interactions");
  sub->add_flag("--freeze-user", ov.freeze_on,
                "freeze user parameters in stage 2 (default)");
  sub->add_flag("--no-freeze-user", ov.freeze_off,
                "update user parameters in stage 2");
  sub->add_option("--explicit-paths", ov.explicit_paths,
                  "comma-separated plain path labels (default P1)");
  sub->add_option("--implicit-paths", ov.implicit_paths,
                  "comma-separated dependency path labels (default PP1)");
  sub->add_option("--N,--cutoffs", ov.cutoffs,
                  "comma-separated metric cutoffs (default 5,10,20)");
  sub->add_option("--split", ov.eval_split, "evaluation side: test or val");
  sub->add_option("--threads", ov.threads,
                  "worker cap; 1 is the deterministic reference path");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"dependency-aware group recommender"};
  app.require_subcommand(1);

  Overrides ov;
  std::string stage = "both";
  std::string checkpoint_path;
  std::string variants_csv = "full,RPT,RDMP,RMP,RAA";
  std::string grid, points_csv, shape;
  data_io::SyntheticSpec synth_spec;
  std::string synth_mode = "implicit";
  std::string synth_out = "out";
  double gc_tol = 1e-4;
  bool gc_inject = false;

  auto* prepare = app.add_subcommand(
      "prepare", "load a TSV dataset and persist the interaction store");
  add_common_options(prepare, ov);

  auto* train = app.add_subcommand("train", "run the two training stages");
  add_common_options(train, ov);
  train->add_option("--stage", stage, "1, 2, or both");
  train->add_option("--resume", ov.resume, "checkpoint to resume from");

  auto* evaluate =
      app.add_subcommand("evaluate", "score a checkpoint on held-out items");
  add_common_options(evaluate, ov);
  evaluate->add_option("--checkpoint", checkpoint_path, "trained checkpoint")
      ->required();

  auto* ablate =
      app.add_subcommand("ablate", "train and evaluate model variants");
  add_common_options(ablate, ov);
  ablate->add_option("--variants", variants_csv, "comma-separated variants");

  auto* sweep =
      app.add_subcommand("sweep", "walk one hyperparameter grid");
  add_common_options(sweep, ov);
  sweep->add_option("--grid", grid, "lr, dim, batch, or decay")->required();
  sweep->add_option("--points", points_csv,
                    "restrict to these grid values (comma-separated)");

  auto* synth =
      app.add_subcommand("synth", "write a synthetic planted-signal dataset");
  synth->add_option("--users", synth_spec.n_users, "user count");
  synth->add_option("--items", synth_spec.n_items, "item count");
  synth->add_option("--groups", synth_spec.n_groups, "group count");
  synth->add_option("--group-size", synth_spec.group_size, "members per group");
  synth->add_option("--chain-length", synth_spec.chain_length,
                    "planted clique size");
  synth->add_option("--mode", synth_mode, "explicit, implicit, or mixed");
  synth->add_option("--noise", synth_spec.noise_rate, "extra random records");
  synth->add_option("--seed", synth_spec.seed, "generator seed");
  synth->add_option("--shape", shape,
                    "emit a fixed-shape fixture: mooccube or movielens");
  synth->add_option("--out", synth_out, "dataset directory to write");

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of every gradient");
  gradcheck->add_option("--tol", gc_tol, "max relative error allowed");
  gradcheck->add_flag("--inject-fault", gc_inject,
                      "corrupt one gradient to prove detection");
  std::uint64_t gc_seed = 4;
  double gc_h = 1e-5;
  gradcheck->add_option("--seed", gc_seed, "parameter init seed");
  gradcheck->add_option("--step", gc_h, "finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (prepare->parsed()) cmd_prepare(ov.resolve());
    else if (train->parsed()) cmd_train(ov.resolve(), stage);
    else if (evaluate->parsed()) cmd_evaluate(ov.resolve(), checkpoint_path);
    else if (ablate->parsed()) cmd_ablate(ov.resolve(), split_csv(variants_csv));
    else if (sweep->parsed()) cmd_sweep(ov.resolve(), grid, split_csv(points_csv));
    else if (synth->parsed()) {
      synth_spec.mode = data_io::parse_mode(synth_mode);
      cmd_synth(synth_spec, synth_out, shape);
    } else if (gradcheck->parsed()) {
      Scalar worst = cmd_gradcheck(gc_tol, gc_inject, std::cout, gc_seed, gc_h);
      std::cout << "gradcheck ok, worst relative error " << worst << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace grouprec::cli
