#include "grouprec/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "grouprec/evaluation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace grouprec::data_io {

// ====================================================================
// TSV parsing
// ====================================================================

namespace {

std::vector<hin::PairRecord> read_pair_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<hin::PairRecord> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab1 = line.find('\t');
    if (tab1 == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 2 tab-separated fields");
    auto tab2 = line.find('\t', tab1 + 1);
    if (tab2 != std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 2 tab-separated fields, found more");
    std::string a = line.substr(0, tab1);
    std::string b = line.substr(tab1 + 1);
    if (a.empty() || b.empty())
      throw DataError(path + ":" + std::to_string(lineno) + ": empty id field");
    out.push_back({a, b, path, lineno});
  }
  return out;
}

void write_pair_file(const std::vector<hin::PairRecord>& records,
                     const std::string& path, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "# " << header << "\n";
  for (const auto& r : records) out << r.a << '\t' << r.b << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace

Bundle load_dataset(const std::string& dir) {
  Bundle b;
  fs::path root(dir);
  if (!fs::is_directory(root)) throw DataError("not a directory: " + dir);
  fs::path ui = root / "user_item.tsv";
  fs::path gr = root / "groups.tsv";
  if (!fs::exists(ui)) throw DataError("missing " + ui.string());
  if (!fs::exists(gr)) throw DataError("missing " + gr.string());
  b.user_item = read_pair_file(ui.string());
  b.group_user = read_pair_file(gr.string());
  fs::path ii = root / "item_item.tsv";
  if (fs::exists(ii)) b.item_item = read_pair_file(ii.string());
  // auxiliary relations: aux_<left>_<right>.tsv
  std::vector<fs::path> aux_paths;
  for (const auto& entry : fs::directory_iterator(root)) {
    auto name = entry.path().filename().string();
    if (name.rfind("aux_", 0) == 0 && name.size() > 8 &&
        name.substr(name.size() - 4) == ".tsv")
      aux_paths.push_back(entry.path());
  }
  std::sort(aux_paths.begin(), aux_paths.end());
  for (const auto& p : aux_paths) {
    std::string stem = p.filename().string();
    stem = stem.substr(4, stem.size() - 8);  // strip aux_ / .tsv
    auto us = stem.find('_');
    if (us == std::string::npos || us == 0 || us + 1 == stem.size() ||
        stem.find('_', us + 1) != std::string::npos)
      throw DataError("cannot parse relation types from filename: " +
                      p.filename().string());
    b.aux[{stem.substr(0, us), stem.substr(us + 1)}] =
        read_pair_file(p.string());
  }
  return b;
}

void save_dataset(const Bundle& bundle, const std::string& dir) {
  fs::create_directories(dir);
  fs::path root(dir);
  write_pair_file(bundle.user_item, (root / "user_item.tsv").string(),
                  "user_id\titem_id");
  write_pair_file(bundle.item_item, (root / "item_item.tsv").string(),
                  "item_id\tdependent_item_id");
  write_pair_file(bundle.group_user, (root / "groups.tsv").string(),
                  "group_id\tuser_id");
  for (const auto& [key, recs] : bundle.aux) {
    auto path = root / ("aux_" + key.first + "_" + key.second + ".tsv");
    write_pair_file(recs, path.string(), key.first + "_id\t" + key.second + "_id");
  }
}

LoadedData assemble(const Bundle& bundle) {
  LoadedData data;
  data.store = hin::build_store(bundle.user_item, bundle.item_item,
                                bundle.group_user);
  // collect ids for auxiliary entity types (user/item reuse store maps)
  std::map<std::string, std::set<std::string>> raw_ids;
  for (const auto& [key, recs] : bundle.aux) {
    for (const auto& r : recs) {
      for (int side = 0; side < 2; ++side) {
        const std::string& type = side == 0 ? key.first : key.second;
        const std::string& id = side == 0 ? r.a : r.b;
        if (type == "user") {
          if (!data.store.users.contains(id))
            throw DataError(r.file + ":" + std::to_string(r.line) +
                            ": unknown user id '" + id + "'");
        } else if (type == "item") {
          if (!data.store.items.contains(id))
            throw DataError(r.file + ":" + std::to_string(r.line) +
                            ": unknown item id '" + id + "'");
        } else {
          raw_ids[type].insert(id);
        }
      }
    }
  }
  for (auto& [type, ids] : raw_ids)
    data.aux.entities[type] =
        hin::make_id_map(std::vector<std::string>(ids.begin(), ids.end()));
  auto type_map = [&](const std::string& type) -> const hin::IdMap& {
    if (type == "user") return data.store.users;
    if (type == "item") return data.store.items;
    return data.aux.entities.at(type);
  };
  for (const auto& [key, recs] : bundle.aux) {
    const hin::IdMap& left = type_map(key.first);
    const hin::IdMap& right = type_map(key.second);
    std::vector<Eigen::Triplet<std::int32_t>> trips;
    trips.reserve(recs.size());
    for (const auto& r : recs)
      trips.emplace_back(left.dense(r.a), right.dense(r.b), 1);
    SpBool m(left.size(), right.size());
    m.setFromTriplets(trips.begin(), trips.end());
    hin::binarize(m);
    data.aux.relations[key] = std::move(m);
  }
  return data;
}

// ====================================================================
// little-endian binary primitives
// ====================================================================

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw DataError("unexpected end of binary stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
  return v;
}

void put_i64(std::ostream& out, std::int64_t v) {
  put_u64(out, static_cast<std::uint64_t>(v));
}
std::int64_t get_i64(std::istream& in) {
  return static_cast<std::int64_t>(get_u64(in));
}

void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

void put_str(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
  auto len = get_u64(in);
  if (len > (1ull << 32)) throw DataError("corrupt string length in stream");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("unexpected end of binary stream");
  return s;
}

void put_mat(std::ostream& out, const Mat& m) {
  put_i64(out, m.rows());
  put_i64(out, m.cols());
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r) put_f64(out, m(r, c));
}

Mat get_mat(std::istream& in) {
  Index rows = static_cast<Index>(get_i64(in));
  Index cols = static_cast<Index>(get_i64(in));
  if (rows < 0 || cols < 0 || rows * cols > (Index(1) << 31))
    throw DataError("corrupt matrix header in stream");
  Mat m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = get_f64(in);
  return m;
}

void put_sparse(std::ostream& out, const SpBool& m) {
  put_i64(out, m.rows());
  put_i64(out, m.cols());
  put_u64(out, static_cast<std::uint64_t>(m.nonZeros()));
  for (Index r = 0; r < m.outerSize(); ++r)
    for (SpBool::InnerIterator it(m, r); it; ++it) {
      put_i64(out, it.row());
      put_i64(out, it.col());
    }
}

SpBool get_sparse(std::istream& in) {
  Index rows = static_cast<Index>(get_i64(in));
  Index cols = static_cast<Index>(get_i64(in));
  auto nnz = get_u64(in);
  std::vector<Eigen::Triplet<std::int32_t>> trips;
  trips.reserve(nnz);
  for (std::uint64_t i = 0; i < nnz; ++i) {
    auto r = get_i64(in);
    auto c = get_i64(in);
    if (r < 0 || r >= rows || c < 0 || c >= cols)
      throw DataError("sparse entry out of bounds in stream");
    trips.emplace_back(static_cast<Index>(r), static_cast<Index>(c), 1);
  }
  SpBool m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  hin::binarize(m);
  return m;
}

void put_id_map(std::ostream& out, const hin::IdMap& ids) {
  put_u64(out, ids.to_raw.size());
  for (const auto& s : ids.to_raw) put_str(out, s);
}

hin::IdMap get_id_map(std::istream& in) {
  auto n = get_u64(in);
  std::vector<std::string> raw(n);
  for (auto& s : raw) s = get_str(in);
  // raw ids were stored in dense order; rebuild the lookup side directly
  hin::IdMap ids;
  ids.to_raw = std::move(raw);
  for (std::size_t i = 0; i < ids.to_raw.size(); ++i)
    ids.to_dense[ids.to_raw[i]] = static_cast<Index>(i);
  return ids;
}

constexpr char kStoreMagic[9] = "GRSTORE1";
constexpr char kCkptMagic[9] = "GRCKPT01";

void check_magic(std::istream& in, const char* magic, const char* what) {
  char buf[8];
  in.read(buf, 8);
  if (!in || std::memcmp(buf, magic, 8) != 0)
    throw DataError(std::string("not a ") + what +
                    " file (bad magic header)");
}

}  // namespace

// ====================================================================
// prepared-store persistence
// ====================================================================

void save_store(const hin::InteractionStore& store, const hin::AuxRelations& aux,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out.write(kStoreMagic, 8);
  put_u64(out, 1);  // format version
  put_i64(out, store.n_users);
  put_i64(out, store.n_items);
  put_i64(out, store.n_groups);
  put_i64(out, store.depth);
  put_id_map(out, store.users);
  put_id_map(out, store.items);
  put_id_map(out, store.groups);
  put_sparse(out, store.y_uv);
  put_sparse(out, store.y_vv);
  put_u64(out, store.group_table.members.size());
  for (const auto& members : store.group_table.members) {
    put_u64(out, members.size());
    for (Index u : members) put_i64(out, u);
  }
  put_u64(out, aux.entities.size());
  for (const auto& [type, ids] : aux.entities) {
    put_str(out, type);
    put_id_map(out, ids);
  }
  put_u64(out, aux.relations.size());
  for (const auto& [key, m] : aux.relations) {
    put_str(out, key.first);
    put_str(out, key.second);
    put_sparse(out, m);
  }
  if (!out) throw DataError("write failed: " + path);
}

LoadedData load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  check_magic(in, kStoreMagic, "prepared store");
  auto version = get_u64(in);
  if (version != 1)
    throw DataError("unsupported store format version " +
                    std::to_string(version));
  LoadedData data;
  auto& store = data.store;
  store.n_users = static_cast<Index>(get_i64(in));
  store.n_items = static_cast<Index>(get_i64(in));
  store.n_groups = static_cast<Index>(get_i64(in));
  int depth = static_cast<int>(get_i64(in));
  store.users = get_id_map(in);
  store.items = get_id_map(in);
  store.groups = get_id_map(in);
  store.y_uv = get_sparse(in);
  store.y_vv = get_sparse(in);
  auto n_groups = get_u64(in);
  store.group_table.members.resize(n_groups);
  for (auto& members : store.group_table.members) {
    auto k = get_u64(in);
    members.resize(k);
    for (auto& u : members) u = static_cast<Index>(get_i64(in));
  }
  auto n_types = get_u64(in);
  for (std::uint64_t i = 0; i < n_types; ++i) {
    std::string type = get_str(in);
    data.aux.entities[type] = get_id_map(in);
  }
  auto n_rel = get_u64(in);
  for (std::uint64_t i = 0; i < n_rel; ++i) {
    std::string a = get_str(in);
    std::string b = get_str(in);
    data.aux.relations[{a, b}] = get_sparse(in);
  }
  // group rows and the dependency expansion are derived, not stored
  std::vector<Eigen::Triplet<std::int32_t>> trips;
  for (Index g = 0; g < store.n_groups; ++g)
    for (Index u : store.group_table.members[g])
      for (SpBool::InnerIterator it(store.y_uv, u); it; ++it)
        trips.emplace_back(g, it.col(), 1);
  store.y_gv = SpBool(store.n_groups, store.n_items);
  store.y_gv.setFromTriplets(trips.begin(), trips.end());
  hin::binarize(store.y_gv);
  if (depth > 0) hin::derive_multi_hop(store, depth);
  return data;
}

// ====================================================================
// checkpoints
// ====================================================================

Checkpoint snapshot(const training::Trainer& trainer,
                    const std::string& config_json, int stage) {
  Checkpoint ck;
  ck.config_json = config_json;
  ck.seed = trainer.config().seed;
  ck.stage = stage;
  ck.stage1_epochs = trainer.stage1_epochs_done;
  ck.stage2_epochs = trainer.stage2_epochs_done;
  ck.history = trainer.history();
  for (auto& rec : ck.history) rec.seconds = 0.0;  // keep bytes reproducible
  for (const nn::Parameter* p : trainer.params().all()) {
    CheckpointTensor t;
    t.name = p->name;
    t.value = p->value;
    t.adam_m = p->adam_m;
    t.adam_v = p->adam_v;
    t.step = p->step;
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

void restore(const Checkpoint& ck, training::Trainer& trainer) {
  auto params = trainer.params().all();
  if (params.size() != ck.tensors.size())
    throw DataError("checkpoint holds " + std::to_string(ck.tensors.size()) +
                    " tensors, model expects " + std::to_string(params.size()) +
                    " (configuration mismatch?)");
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Parameter* p = params[i];
    const CheckpointTensor& t = ck.tensors[i];
    if (p->name != t.name)
      throw DataError("checkpoint tensor '" + t.name + "' where '" + p->name +
                      "' was expected");
    if (p->value.rows() != t.value.rows() || p->value.cols() != t.value.cols())
      throw DataError("checkpoint tensor '" + t.name + "' has shape " +
                      std::to_string(t.value.rows()) + "x" +
                      std::to_string(t.value.cols()) + ", model expects " +
                      std::to_string(p->value.rows()) + "x" +
                      std::to_string(p->value.cols()));
    p->value = t.value;
    p->adam_m = t.adam_m;
    p->adam_v = t.adam_v;
    p->step = t.step;
  }
  trainer.stage1_epochs_done = ck.stage1_epochs;
  trainer.stage2_epochs_done = ck.stage2_epochs;
  trainer.history() = ck.history;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path,
                     bool json_mirror) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write(kCkptMagic, 8);
    put_u64(out, 1);  // format version
    put_str(out, ck.config_json);
    put_u64(out, ck.seed);
    put_u64(out, static_cast<std::uint64_t>(ck.stage));
    put_u64(out, static_cast<std::uint64_t>(ck.stage1_epochs));
    put_u64(out, static_cast<std::uint64_t>(ck.stage2_epochs));
    put_u64(out, ck.history.size());
    for (const auto& rec : ck.history) {
      put_u64(out, static_cast<std::uint64_t>(rec.stage));
      put_u64(out, static_cast<std::uint64_t>(rec.epoch));
      put_f64(out, rec.loss);
    }
    put_u64(out, ck.tensors.size());
    for (const auto& t : ck.tensors) {
      put_str(out, t.name);
      put_mat(out, t.value);
      put_mat(out, t.adam_m);
      put_mat(out, t.adam_v);
      put_i64(out, t.step);
    }
    if (!out) throw DataError("write failed: " + path);
  }
  if (json_mirror) {
    json j;
    j["format"] = "checkpoint";
    j["version"] = 1;
    j["config"] =
        ck.config_json.empty() ? json::object() : json::parse(ck.config_json);
    j["seed"] = ck.seed;
    j["stage"] = ck.stage;
    j["stage1_epochs"] = ck.stage1_epochs;
    j["stage2_epochs"] = ck.stage2_epochs;
    j["history"] = json::array();
    for (const auto& rec : ck.history)
      j["history"].push_back(
          {{"stage", rec.stage}, {"epoch", rec.epoch}, {"loss", rec.loss}});
    j["tensors"] = json::array();
    for (const auto& t : ck.tensors) {
      json jt;
      jt["name"] = t.name;
      jt["rows"] = t.value.rows();
      jt["cols"] = t.value.cols();
      jt["step"] = t.step;
      auto dump = [](const Mat& m) {
        json rows = json::array();
        for (Index r = 0; r < m.rows(); ++r) {
          json row = json::array();
          for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
          rows.push_back(std::move(row));
        }
        return rows;
      };
      jt["value"] = dump(t.value);
      jt["adam_m"] = dump(t.adam_m);
      jt["adam_v"] = dump(t.adam_v);
      j["tensors"].push_back(std::move(jt));
    }
    std::ofstream out(path + ".json");
    if (!out) throw DataError("cannot write " + path + ".json");
    out << j.dump(2) << "\n";
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  check_magic(in, kCkptMagic, "checkpoint");
  auto version = get_u64(in);
  if (version != 1)
    throw DataError("unsupported checkpoint format version " +
                    std::to_string(version));
  Checkpoint ck;
  ck.config_json = get_str(in);
  ck.seed = get_u64(in);
  ck.stage = static_cast<int>(get_u64(in));
  ck.stage1_epochs = static_cast<int>(get_u64(in));
  ck.stage2_epochs = static_cast<int>(get_u64(in));
  auto n_hist = get_u64(in);
  ck.history.resize(n_hist);
  for (auto& rec : ck.history) {
    rec.stage = static_cast<int>(get_u64(in));
    rec.epoch = static_cast<int>(get_u64(in));
    rec.loss = get_f64(in);
    rec.seconds = 0.0;
  }
  auto n_tensors = get_u64(in);
  ck.tensors.resize(n_tensors);
  for (auto& t : ck.tensors) {
    t.name = get_str(in);
    t.value = get_mat(in);
    t.adam_m = get_mat(in);
    t.adam_v = get_mat(in);
    t.step = get_i64(in);
  }
  return ck;
}

// ====================================================================
// metrics and reports
// ====================================================================

std::string format_sig6(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_report_csv(const eval::EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "variant,metric,N,value\n";
  std::vector<int> cutoffs = report.cutoffs;
  std::sort(cutoffs.begin(), cutoffs.end());
  for (int n : cutoffs)
    out << report.variant << ",HR," << n << ','
        << format_sig6(report.hr.at(n)) << "\n";
  for (int n : cutoffs)
    out << report.variant << ",NDCG," << n << ','
        << format_sig6(report.ndcg.at(n)) << "\n";
  if (!out) throw DataError("write failed: " + path);
}

void write_report_json(const eval::EvalReport& report,
                       const std::string& config_json,
                       const std::string& path) {
  json j;
  j["variant"] = report.variant;
  j["instances"] = report.instance_count;
  j["metrics"]["HR"] = json::object();
  j["metrics"]["NDCG"] = json::object();
  std::vector<int> cutoffs = report.cutoffs;
  std::sort(cutoffs.begin(), cutoffs.end());
  for (int n : cutoffs) {
    j["metrics"]["HR"][std::to_string(n)] = report.hr.at(n);
    j["metrics"]["NDCG"][std::to_string(n)] = report.ndcg.at(n);
  }
  j["config"] =
      config_json.empty() ? json::object() : json::parse(config_json);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

eval::EvalReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  eval::EvalReport report;
  report.variant = j.at("variant").get<std::string>();
  report.instance_count = j.at("instances").get<long>();
  for (auto& [key, val] : j.at("metrics").at("HR").items()) {
    int n = std::stoi(key);
    report.cutoffs.push_back(n);
    report.hr[n] = val.get<Scalar>();
  }
  for (auto& [key, val] : j.at("metrics").at("NDCG").items())
    report.ndcg[std::stoi(key)] = val.get<Scalar>();
  std::sort(report.cutoffs.begin(), report.cutoffs.end());
  return report;
}

void write_loss_csv(const std::vector<training::EpochRecord>& history,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "stage,epoch,loss,seconds\n";
  for (const auto& rec : history) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.3f\n", rec.stage, rec.epoch,
                  rec.loss, rec.seconds);
    out << buf;
  }
  if (!out) throw DataError("write failed: " + path);
}

void write_loss_json(const std::vector<training::EpochRecord>& history,
                     const std::string& path) {
  json j = json::array();
  for (const auto& rec : history)
    j.push_back({{"stage", rec.stage},
                 {"epoch", rec.epoch},
                 {"loss", rec.loss},
                 {"seconds", rec.seconds}});
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_prepare_stats(const hin::InteractionStore& store,
                         const std::string& config_json,
                         const std::string& stats_path,
                         const std::string& histogram_path) {
  json j;
  j["config"] =
      config_json.empty() ? json::object() : json::parse(config_json);
  j["users"] = store.n_users;
  j["items"] = store.n_items;
  j["groups"] = store.n_groups;
  j["dependency_depth"] = store.depth;
  j["counts"]["user_item"] = static_cast<long>(store.y_uv.nonZeros());
  j["counts"]["group_item"] = static_cast<long>(store.y_gv.nonZeros());
  j["counts"]["item_item"] = static_cast<long>(store.y_vv.nonZeros());
  j["counts"]["user_item_dependency"] =
      static_cast<long>(store.y_uvv.nonZeros());
  j["counts"]["group_item_dependency"] =
      static_cast<long>(store.y_gvv.nonZeros());
  auto avg = [](long total, Index denom) {
    return denom > 0 ? static_cast<Scalar>(total) / static_cast<Scalar>(denom)
                     : 0.0;
  };
  long members = 0;
  for (const auto& m : store.group_table.members)
    members += static_cast<long>(m.size());
  j["averages"]["items_per_user"] = avg(store.y_uv.nonZeros(), store.n_users);
  j["averages"]["items_per_group"] = avg(store.y_gv.nonZeros(), store.n_groups);
  j["averages"]["dependency_items_per_user"] =
      avg(store.y_uvv.nonZeros(), store.n_users);
  j["averages"]["dependency_items_per_group"] =
      avg(store.y_gvv.nonZeros(), store.n_groups);
  j["averages"]["group_size"] = avg(members, store.n_groups);
  std::ofstream out(stats_path);
  if (!out) throw DataError("cannot write " + stats_path);
  out << j.dump(2) << "\n";

  // per-item interaction histogram: explicit vs dependency-derived user counts
  std::vector<long> expl(store.n_items, 0), dep(store.n_items, 0);
  for (Index r = 0; r < store.y_uv.outerSize(); ++r)
    for (SpBool::InnerIterator it(store.y_uv, r); it; ++it) ++expl[it.col()];
  for (Index r = 0; r < store.y_uvv.outerSize(); ++r)
    for (SpBool::InnerIterator it(store.y_uvv, r); it; ++it) ++dep[it.col()];
  std::ofstream hist(histogram_path);
  if (!hist) throw DataError("cannot write " + histogram_path);
  hist << "item,explicit_users,dependency_users\n";
  for (Index v = 0; v < store.n_items; ++v)
    hist << store.items.to_raw[v] << ',' << expl[v] << ',' << dep[v] << "\n";
  if (!hist) throw DataError("write failed: " + histogram_path);
}

}  // namespace grouprec::data_io
