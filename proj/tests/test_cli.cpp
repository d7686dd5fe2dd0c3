#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

// Process-level exercises of the command-line binary: exit codes, artifact
// layout, byte-level reproducibility, and flag/config precedence.

namespace {

struct CmdResult {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  out += "'";
  return out;
}

CmdResult run_cmd(const std::vector<std::string>& args) {
  const char* bin = std::getenv("GROUPREC_BIN");
  REQUIRE_MESSAGE(bin != nullptr,
                  "GROUPREC_BIN must point at the grouprec binary");
  std::string cmd = shell_quote(bin);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = pclose(pipe);
  CmdResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = std::move(out);
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("grouprec_cli_" + tag + "_" + std::to_string(::getpid()));
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
  REQUIRE_MESSAGE(in.good(), ("missing file: " + path).c_str());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json slurp_json(const std::string& path) { return json::parse(slurp(path)); }

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) out.push_back(line);
  return out;
}

/// loss.csv rows without the wall-time column (never reproducible).
std::vector<std::string> loss_rows_sans_seconds(const std::string& path) {
  std::vector<std::string> out;
  for (const auto& line : lines_of(slurp(path))) {
    const auto cut = line.rfind(',');
    out.push_back(line.substr(0, cut));
  }
  return out;
}

/// Writes a small planted dataset and prepares a store; returns the store
/// path. Ten of the 12 groups share cliques, so training signal exists.
std::string make_store(const TempDir& dir, int depth = 1) {
  const std::string data = dir.sub("data");
  auto synth = run_cmd({"synth", "--users", "36", "--items", "30", "--groups",
                        "12", "--group-size", "3", "--seed", "3", "--noise",
                        "0.0", "--out", data});
  REQUIRE_MESSAGE(synth.code == 0, synth.output.c_str());
  const std::string prep = dir.sub("prep_d" + std::to_string(depth));
  auto prepare = run_cmd({"prepare", "--data", data, "--out", prep, "--depth",
                          std::to_string(depth)});
  REQUIRE_MESSAGE(prepare.code == 0, prepare.output.c_str());
  return prep + "/store.bin";
}

const std::vector<std::string> kFastTrain = {
    "--embed-dim", "6",  "--batch-size", "8", "--epochs", "3",
    "--pretrain-epochs", "2", "--seed", "11"};

std::vector<std::string> with_fast(std::vector<std::string> args) {
  args.insert(args.end(), kFastTrain.begin(), kFastTrain.end());
  return args;
}

}  // namespace

// ====================================================================
// exit codes
// ====================================================================

TEST_CASE("usage problems exit with code 1") {
  CHECK(run_cmd({}).code == 1);                      // subcommand required
  CHECK(run_cmd({"frobnicate"}).code == 1);          // unknown subcommand
  CHECK(run_cmd({"train", "--no-such-flag"}).code == 1);

  auto missing_store = run_cmd({"train"});
  CHECK(missing_store.code == 1);
  CHECK(missing_store.output.find("store") != std::string::npos);

  auto bad_variant = run_cmd({"train", "--variant", "bogus"});
  CHECK(bad_variant.code == 1);
  CHECK(bad_variant.output.find("bogus") != std::string::npos);

  CHECK(run_cmd({"train", "--store", "x", "--N", "0"}).code == 1);
  CHECK(run_cmd({"train", "--store", "x", "--N", "five"}).code == 1);
  CHECK(run_cmd({"train", "--store", "x", "--threads", "0"}).code == 1);
  CHECK(run_cmd({"train", "--store", "x", "--stage", "3"}).code == 1);
  CHECK(run_cmd({"synth", "--mode", "both"}).code == 1);
  CHECK(run_cmd({"synth", "--shape", "imdb"}).code == 1);
  CHECK(run_cmd({"evaluate"}).code == 1);  // --checkpoint is required
  CHECK(run_cmd({"train", "--store", "x", "--freeze-user",
                 "--no-freeze-user"}).code == 1);
}

TEST_CASE("data problems exit with code 2") {
  TempDir dir("data_errors");
  auto no_dir = run_cmd({"prepare", "--data", dir.sub("nowhere"), "--out",
                         dir.sub("out")});
  CHECK(no_dir.code == 2);

  // malformed TSV line: the message carries file and line number
  const std::string data = dir.sub("bad_data");
  fs::create_directories(data);
  {
    std::ofstream ui(data + "/user_item.tsv");
    ui << "u1\tv1\nu2 v2\n";
    std::ofstream gr(data + "/groups.tsv");
    gr << "g1\tu1\n";
  }
  auto bad_line = run_cmd({"prepare", "--data", data, "--out", dir.sub("out")});
  CHECK(bad_line.code == 2);
  CHECK(bad_line.output.find("user_item.tsv:2") != std::string::npos);

  auto no_ckpt = run_cmd({"evaluate", "--checkpoint", dir.sub("none.bin"),
                          "--store", dir.sub("none.store")});
  CHECK(no_ckpt.code == 2);
}

TEST_CASE("gradient self-check: clean run passes, injected fault exits 3") {
  auto ok = run_cmd({"gradcheck"});
  CHECK(ok.code == 0);
  CHECK(ok.output.find("gradcheck ok") != std::string::npos);
  CHECK(ok.output.find("FAIL") == std::string::npos);

  // deterministic: identical transcript on a second run
  CHECK(run_cmd({"gradcheck"}).output == ok.output);

  auto bad = run_cmd({"gradcheck", "--inject-fault"});
  CHECK(bad.code == 3);
  CHECK(bad.output.find("FAIL") != std::string::npos);
  CHECK(bad.output.find("numerical error") != std::string::npos);
}

// ====================================================================
// prepare
// ====================================================================

TEST_CASE("prepare writes the store and its statistics") {
  TempDir dir("prepare");
  const std::string store1 = make_store(dir, 1);
  CHECK(fs::exists(store1));
  const std::string prep1 = fs::path(store1).parent_path().string();
  CHECK(fs::exists(prep1 + "/stats.json"));
  CHECK(fs::exists(prep1 + "/item_histogram.csv"));

  const json s1 = slurp_json(prep1 + "/stats.json");
  CHECK(s1["users"] == 36);
  CHECK(s1["items"] == 30);
  CHECK(s1["groups"] == 12);
  CHECK(s1["dependency_depth"] == 1);
  CHECK(s1["config"]["depth"] == 1);  // config echo embedded
  CHECK(s1["counts"]["user_item"].get<long>() > 0);
  CHECK(s1["counts"]["item_item"].get<long>() > 0);

  // a deeper closure can only add reachable pairs
  const std::string store2 = make_store(dir, 2);
  const json s2 =
      slurp_json(fs::path(store2).parent_path().string() + "/stats.json");
  CHECK(s2["counts"]["user_item_dependency"].get<long>() >=
        s1["counts"]["user_item_dependency"].get<long>());
  CHECK(s2["counts"]["group_item_dependency"].get<long>() >=
        s1["counts"]["group_item_dependency"].get<long>());
  CHECK(s2["counts"]["user_item"] == s1["counts"]["user_item"]);

  // histogram: one header plus one row per item
  const auto histo = lines_of(slurp(prep1 + "/item_histogram.csv"));
  CHECK(histo.size() == 31);
  CHECK(histo[0] == "item,explicit_users,dependency_users");
}

// ====================================================================
// train / evaluate
// ====================================================================

TEST_CASE("train and evaluate produce the documented artifacts, twice over") {
  TempDir dir("roundtrip");
  const std::string store = make_store(dir);

  auto t1 = run_cmd(with_fast({"train", "--store", store, "--out",
                               dir.sub("run1")}));
  REQUIRE_MESSAGE(t1.code == 0, t1.output.c_str());
  CHECK(fs::exists(dir.sub("run1") + "/checkpoint.bin"));
  CHECK(fs::exists(dir.sub("run1") + "/checkpoint.bin.json"));
  CHECK(fs::exists(dir.sub("run1") + "/loss.csv"));
  CHECK(fs::exists(dir.sub("run1") + "/loss.json"));

  // 2 pretrain + 3 group epochs under a header
  const auto loss = lines_of(slurp(dir.sub("run1") + "/loss.csv"));
  REQUIRE(loss.size() == 6);
  CHECK(loss[0] == "stage,epoch,loss,seconds");
  CHECK(loss[1].rfind("1,1,", 0) == 0);
  CHECK(loss[3].rfind("2,1,", 0) == 0);
  CHECK(loss[5].rfind("2,3,", 0) == 0);

  // the run is a pure function of config and seed
  auto t2 = run_cmd(with_fast({"train", "--store", store, "--out",
                               dir.sub("run2")}));
  REQUIRE(t2.code == 0);
  CHECK(slurp(dir.sub("run1") + "/checkpoint.bin") ==
        slurp(dir.sub("run2") + "/checkpoint.bin"));
  CHECK(slurp(dir.sub("run1") + "/checkpoint.bin.json") ==
        slurp(dir.sub("run2") + "/checkpoint.bin.json"));
  CHECK(loss_rows_sans_seconds(dir.sub("run1") + "/loss.csv") ==
        loss_rows_sans_seconds(dir.sub("run2") + "/loss.csv"));

  auto e1 = run_cmd({"evaluate", "--checkpoint",
                     dir.sub("run1") + "/checkpoint.bin", "--store", store,
                     "--out", dir.sub("ev1"), "--N", "10,5"});
  REQUIRE_MESSAGE(e1.code == 0, e1.output.c_str());
  const auto report = lines_of(slurp(dir.sub("ev1") + "/report.csv"));
  REQUIRE(report.size() == 5);  // header + HR/NDCG at two cutoffs
  CHECK(report[0] == "variant,metric,N,value");
  CHECK(report[1].rfind("full,HR,5,", 0) == 0);   // cutoffs sorted
  CHECK(report[2].rfind("full,HR,10,", 0) == 0);
  CHECK(report[3].rfind("full,NDCG,5,", 0) == 0);
  CHECK(report[4].rfind("full,NDCG,10,", 0) == 0);

  const json rj = slurp_json(dir.sub("ev1") + "/report.json");
  CHECK(rj["variant"] == "full");
  CHECK(rj["config"]["embed_dim"] == 6);  // echo reflects the trained model
  CHECK(rj["config"]["seed"] == 11);
  CHECK(rj["instances"].get<long>() > 0);
  CHECK(rj["metrics"]["HR"].contains("5"));
  CHECK(rj["metrics"]["NDCG"].contains("10"));

  // repeated evaluation is byte-identical, also when threaded
  auto e2 = run_cmd({"evaluate", "--checkpoint",
                     dir.sub("run1") + "/checkpoint.bin", "--store", store,
                     "--out", dir.sub("ev2"), "--N", "10,5", "--threads", "4"});
  REQUIRE(e2.code == 0);
  CHECK(slurp(dir.sub("ev1") + "/report.csv") ==
        slurp(dir.sub("ev2") + "/report.csv"));
  CHECK(slurp(dir.sub("ev1") + "/report.json") ==
        slurp(dir.sub("ev2") + "/report.json"));

  // validation-side scoring is available too
  auto ev = run_cmd({"evaluate", "--checkpoint",
                     dir.sub("run1") + "/checkpoint.bin", "--store", store,
                     "--out", dir.sub("ev_val"), "--split", "val"});
  CHECK(ev.code == 0);
  auto bad = run_cmd({"evaluate", "--checkpoint",
                      dir.sub("run1") + "/checkpoint.bin", "--store", store,
                      "--out", dir.sub("ev_bad"), "--split", "future"});
  CHECK(bad.code == 1);
}

TEST_CASE("a run split across stages matches an uninterrupted run") {
  TempDir dir("stages");
  const std::string store = make_store(dir);

  auto both = run_cmd(with_fast({"train", "--store", store, "--out",
                                 dir.sub("both")}));
  REQUIRE_MESSAGE(both.code == 0, both.output.c_str());

  auto s1 = run_cmd(with_fast({"train", "--store", store, "--out",
                               dir.sub("s1"), "--stage", "1"}));
  REQUIRE_MESSAGE(s1.code == 0, s1.output.c_str());
  auto s2 = run_cmd(with_fast({"train", "--store", store, "--out",
                               dir.sub("s2"), "--stage", "2", "--resume",
                               dir.sub("s1") + "/checkpoint.bin"}));
  REQUIRE_MESSAGE(s2.code == 0, s2.output.c_str());

  CHECK(slurp(dir.sub("both") + "/checkpoint.bin") ==
        slurp(dir.sub("s2") + "/checkpoint.bin"));
  CHECK(loss_rows_sans_seconds(dir.sub("both") + "/loss.csv") ==
        loss_rows_sans_seconds(dir.sub("s2") + "/loss.csv"));

  // stage 2 from scratch is reserved for the no-pretrain variant
  CHECK(run_cmd(with_fast({"train", "--store", store, "--out", dir.sub("x"),
                           "--stage", "2"})).code == 1);
  CHECK(run_cmd(with_fast({"train", "--store", store, "--out",
                           dir.sub("rpt"), "--stage", "2", "--variant",
                           "RPT"})).code == 0);
}

// ====================================================================
// config files and precedence
// ====================================================================

TEST_CASE("config files drive runs and flags override them") {
  TempDir dir("config");
  const std::string store = make_store(dir);
  const std::string cfg_path = dir.sub("run.json");
  {
    std::ofstream cfg(cfg_path);
    cfg << "{\"store\": \"" << store << "\", \"embed_dim\": 6, "
        << "\"batch_size\": 8, \"epochs\": 3, \"pretrain_epochs\": 2, "
        << "\"seed\": 11}";
  }

  auto from_cfg = run_cmd({"train", "--config", cfg_path, "--out",
                           dir.sub("a")});
  REQUIRE_MESSAGE(from_cfg.code == 0, from_cfg.output.c_str());
  CHECK(slurp_json(dir.sub("a") + "/checkpoint.bin.json")["config"]
            ["embed_dim"] == 6);

  // a flag beats the same setting in the file
  auto overridden = run_cmd({"train", "--config", cfg_path, "--out",
                             dir.sub("b"), "--embed-dim", "4"});
  REQUIRE_MESSAGE(overridden.code == 0, overridden.output.c_str());
  CHECK(slurp_json(dir.sub("b") + "/checkpoint.bin.json")["config"]
            ["embed_dim"] == 4);

  // config+flags and flags-only runs with equal settings agree byte-for-byte
  auto flags_only = run_cmd(with_fast({"train", "--store", store, "--out",
                                       dir.sub("c")}));
  REQUIRE(flags_only.code == 0);
  CHECK(slurp(dir.sub("a") + "/checkpoint.bin") ==
        slurp(dir.sub("c") + "/checkpoint.bin"));

  // unknown fields are named in the complaint
  {
    std::ofstream cfg(dir.sub("typo.json"));
    cfg << "{\"store\": \"" << store << "\", \"embeddim\": 4}";
  }
  auto typo = run_cmd({"train", "--config", dir.sub("typo.json")});
  CHECK(typo.code == 1);
  CHECK(typo.output.find("embeddim") != std::string::npos);

  {
    std::ofstream cfg(dir.sub("broken.json"));
    cfg << "{ not json";
  }
  CHECK(run_cmd({"train", "--config", dir.sub("broken.json")}).code == 1);
}

// ====================================================================
// ablate and sweep
// ====================================================================

TEST_CASE("ablate writes one report per variant plus a combined table") {
  TempDir dir("ablate");
  const std::string store = make_store(dir);

  auto ab = run_cmd(with_fast({"ablate", "--store", store, "--out",
                               dir.sub("ab"), "--variants", "full,RAA",
                               "--N", "5"}));
  REQUIRE_MESSAGE(ab.code == 0, ab.output.c_str());
  CHECK(fs::exists(dir.sub("ab") + "/report_full.csv"));
  CHECK(fs::exists(dir.sub("ab") + "/report_full.json"));
  CHECK(fs::exists(dir.sub("ab") + "/report_RAA.csv"));
  CHECK(fs::exists(dir.sub("ab") + "/ablation.json"));

  const auto table = lines_of(slurp(dir.sub("ab") + "/ablation.csv"));
  REQUIRE(table.size() == 5);  // header + (HR,NDCG) x 2 variants at one N
  CHECK(table[0] == "variant,metric,N,value");
  CHECK(table[1].rfind("full,HR,5,", 0) == 0);
  CHECK(table[2].rfind("full,NDCG,5,", 0) == 0);
  CHECK(table[3].rfind("RAA,HR,5,", 0) == 0);
  CHECK(table[4].rfind("RAA,NDCG,5,", 0) == 0);

  const json aj = slurp_json(dir.sub("ab") + "/ablation.json");
  REQUIRE(aj["variants"].size() == 2);
  CHECK(aj["variants"][0]["variant"] == "full");
  CHECK(aj["variants"][1]["variant"] == "RAA");

  CHECK(run_cmd({"ablate", "--store", store, "--out", dir.sub("no"),
                 "--variants", "full,NOPE"}).code == 1);
}

TEST_CASE("a single-point sweep reproduces train-plus-evaluate exactly") {
  TempDir dir("sweep");
  const std::string store = make_store(dir);

  auto sw = run_cmd(with_fast({"sweep", "--store", store, "--out",
                               dir.sub("sw"), "--grid", "lr", "--points",
                               "0.005", "--N", "5,10,20"}));
  REQUIRE_MESSAGE(sw.code == 0, sw.output.c_str());
  const auto table = lines_of(slurp(dir.sub("sw") + "/sweep_lr.csv"));
  REQUIRE(table.size() == 7);  // header + 2 metrics x 3 cutoffs
  CHECK(table[0] == "parameter,value,metric,N,score");
  CHECK(table[1].rfind("learning_rate,0.005,HR,5,", 0) == 0);

  auto tr = run_cmd(with_fast({"train", "--store", store, "--out",
                               dir.sub("tr"), "--lr", "0.005"}));
  REQUIRE(tr.code == 0);
  auto ev = run_cmd({"evaluate", "--checkpoint",
                     dir.sub("tr") + "/checkpoint.bin", "--store", store,
                     "--out", dir.sub("ev"), "--N", "5,10,20"});
  REQUIRE(ev.code == 0);
  CHECK(slurp(dir.sub("sw") + "/report_lr_0.005.csv") ==
        slurp(dir.sub("ev") + "/report.csv"));

  CHECK(run_cmd({"sweep", "--store", store, "--out", dir.sub("x"), "--grid",
                 "bogus"}).code == 1);
  CHECK(run_cmd({"sweep", "--store", store, "--out", dir.sub("y"), "--grid",
                 "lr", "--points", "0.003"}).code == 1);
}

// ====================================================================
// synth
// ====================================================================

TEST_CASE("synth writes a loadable dataset and records its own settings") {
  TempDir dir("synth");
  const std::string data = dir.sub("ds");
  auto r = run_cmd({"synth", "--users", "30", "--items", "24", "--groups",
                    "8", "--mode", "mixed", "--seed", "5", "--out", data});
  REQUIRE_MESSAGE(r.code == 0, r.output.c_str());
  CHECK(fs::exists(data + "/user_item.tsv"));
  CHECK(fs::exists(data + "/groups.tsv"));
  CHECK(fs::exists(data + "/item_item.tsv"));
  const json cfg = slurp_json(data + "/synth_config.json");
  CHECK(cfg["mode"] == "mixed");
  CHECK(cfg["users"] == 30);
  CHECK(cfg["seed"] == 5);
  CHECK(cfg["shaped"] == false);

  // same settings, same bytes
  const std::string again = dir.sub("ds2");
  REQUIRE(run_cmd({"synth", "--users", "30", "--items", "24", "--groups", "8",
                   "--mode", "mixed", "--seed", "5", "--out", again})
              .code == 0);
  CHECK(slurp(data + "/user_item.tsv") == slurp(again + "/user_item.tsv"));
  CHECK(slurp(data + "/item_item.tsv") == slurp(again + "/item_item.tsv"));
  CHECK(slurp(data + "/groups.tsv") == slurp(again + "/groups.tsv"));

  // impossible geometry is a usage error
  CHECK(run_cmd({"synth", "--users", "10", "--items", "3", "--groups", "4",
                 "--out", dir.sub("no")}).code == 1);
}
