#include "iogames/reporting.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

namespace iogames {

namespace {

void require_keys(const Json& doc, const std::vector<std::string>& allowed,
                  const std::string& where) {
  if (!doc.is_object()) throw SchemaError(where + " must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw SchemaError("unknown field '" + key + "' in " + where);
  }
}

const Json& need(const Json& doc, const std::string& key, const std::string& where) {
  auto it = doc.find(key);
  if (it == doc.end()) throw SchemaError("missing field '" + key + "' in " + where);
  return *it;
}

Json serialize_matrix(const CMat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

CMat parse_matrix(const Json& doc, const std::string& where) {
  if (!doc.is_array() || doc.empty()) throw SchemaError(where + ": matrix must be a nonempty array");
  const auto n = doc.size();
  CMat m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (size_t r = 0; r < n; ++r) {
    if (!doc[r].is_array() || doc[r].size() != n)
      throw SchemaError(where + ": matrix rows must all have the matrix order");
    for (size_t c = 0; c < n; ++c) {
      const Json& e = doc[r][c];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw SchemaError(where + ": complex entries must be [re, im] pairs");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

std::string kind_name(ObjectKind k) {
  switch (k) {
    case ObjectKind::Channels: return "channel_collection";
    case ObjectKind::Instruments: return "instrument_collection";
    case ObjectKind::Processes: return "process_matrix";
    case ObjectKind::Testers: return "tester_collection";
  }
  return "?";
}

std::map<std::string, double> parse_params(const Json& doc, const std::string& where) {
  std::map<std::string, double> out;
  if (!doc.is_object()) throw SchemaError(where + ": params must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_number()) throw SchemaError(where + ": parameter '" + key + "' must be numeric");
    out[key] = value.get<double>();
  }
  return out;
}

Json dump_params(const std::map<std::string, double>& params) {
  Json out = Json::object();
  for (const auto& [k, v] : params) out[k] = v;
  return out;
}

}  // namespace

Json serialize_collection(const ChoiCollection& c) {
  Json out;
  out["kind"] = kind_name(c.kind);
  out["n_settings"] = c.n_settings;
  Json blocks = Json::array();
  for (const auto& b : c.blocks) {
    Json jb;
    jb["x"] = b.key.x;
    jb["a"] = b.key.a;
    jb["dims"] = b.m.dims();
    jb["labels"] = b.m.labels();
    jb["matrix"] = serialize_matrix(b.m.mat());
    blocks.push_back(std::move(jb));
  }
  out["blocks"] = std::move(blocks);
  return out;
}

ChoiCollection parse_collection(const Json& doc) {
  require_keys(doc, {"kind", "n_settings", "blocks"}, "object");
  ChoiCollection c;
  std::string kind = need(doc, "kind", "object").get<std::string>();
  if (kind == "channel_collection")
    c.kind = ObjectKind::Channels;
  else if (kind == "instrument_collection")
    c.kind = ObjectKind::Instruments;
  else if (kind == "process_matrix")
    c.kind = ObjectKind::Processes;
  else if (kind == "tester_collection")
    c.kind = ObjectKind::Testers;
  else
    throw SchemaError("unknown object kind '" + kind + "'");
  c.n_settings = need(doc, "n_settings", "object").get<int>();
  const Json& blocks = need(doc, "blocks", "object");
  if (!blocks.is_array() || blocks.empty()) throw SchemaError("object needs at least one block");
  for (const auto& jb : blocks) {
    require_keys(jb, {"x", "a", "dims", "labels", "matrix"}, "block");
    ChoiBlock b;
    b.key.x = need(jb, "x", "block").get<int>();
    b.key.a = need(jb, "a", "block").get<int>();
    std::vector<int> dims = need(jb, "dims", "block").get<std::vector<int>>();
    std::vector<std::string> labels =
        need(jb, "labels", "block").get<std::vector<std::string>>();
    CMat m = parse_matrix(need(jb, "matrix", "block"), "block " + b.key.str());
    try {
      b.m = ComplexMatrix(std::move(m), std::move(dims), std::move(labels));
    } catch (const std::exception& e) {
      throw SchemaError("block " + b.key.str() + ": " + e.what());
    }
    c.blocks.push_back(std::move(b));
  }
  return c;
}

Json serialize_instance(const InstanceFile& inst) {
  Json out;
  out["version"] = inst.version;
  out["task"] = inst.task;
  if (inst.family) {
    Json fam;
    fam["kind"] = "family";
    fam["tag"] = inst.family->first;
    fam["params"] = dump_params(inst.family->second);
    out["object"] = std::move(fam);
  } else if (inst.object) {
    out["object"] = serialize_collection(*inst.object);
  }
  Json fs;
  fs["tag"] = inst.free_set_tag;
  fs["params"] = dump_params(inst.free_set_params);
  out["free_set"] = std::move(fs);
  if (inst.scan) {
    Json sc;
    sc["parameter"] = inst.scan->parameter;
    sc["from"] = inst.scan->from;
    sc["to"] = inst.scan->to;
    sc["steps"] = inst.scan->steps;
    out["scan"] = std::move(sc);
  }
  Json tol;
  tol["solver"] = inst.tolerances.solver;
  tol["verify"] = inst.tolerances.verify;
  tol["membership"] = inst.tolerances.membership;
  out["tolerances"] = std::move(tol);
  if (!inst.comment.empty()) out["comment"] = inst.comment;
  return out;
}

InstanceFile parse_instance(const Json& doc) {
  require_keys(doc, {"version", "task", "object", "free_set", "scan", "tolerances", "comment"},
               "instance");
  InstanceFile inst;
  inst.version = need(doc, "version", "instance").get<int>();
  if (inst.version != 1) throw SchemaError("unsupported schema version");
  inst.task = need(doc, "task", "instance").get<std::string>();
  const std::vector<std::string> tasks{"robustness", "membership", "game", "verify", "scan"};
  if (std::find(tasks.begin(), tasks.end(), inst.task) == tasks.end())
    throw SchemaError("unknown task '" + inst.task + "'");

  const Json& obj = need(doc, "object", "instance");
  if (obj.is_object() && obj.contains("kind") && obj["kind"] == "family") {
    require_keys(obj, {"kind", "tag", "params"}, "object");
    inst.family = {need(obj, "tag", "object").get<std::string>(),
                   parse_params(need(obj, "params", "object"), "object")};
  } else {
    inst.object = parse_collection(obj);
  }

  const Json& fs = need(doc, "free_set", "instance");
  require_keys(fs, {"tag", "params"}, "free_set");
  inst.free_set_tag = need(fs, "tag", "free_set").get<std::string>();
  if (fs.contains("params")) inst.free_set_params = parse_params(fs["params"], "free_set");

  if (doc.contains("scan")) {
    const Json& sc = doc["scan"];
    require_keys(sc, {"parameter", "from", "to", "steps"}, "scan");
    ScanSpec spec;
    spec.parameter = need(sc, "parameter", "scan").get<std::string>();
    spec.from = need(sc, "from", "scan").get<double>();
    spec.to = need(sc, "to", "scan").get<double>();
    spec.steps = need(sc, "steps", "scan").get<int>();
    if (spec.steps < 2) throw SchemaError("scan needs at least two steps");
    inst.scan = spec;
  }
  if (inst.task == "scan") {
    if (!inst.scan) throw SchemaError("scan task needs a scan block");
    if (!inst.family) throw SchemaError("scan task needs a family object");
  }

  if (doc.contains("tolerances")) {
    const Json& tol = doc["tolerances"];
    require_keys(tol, {"solver", "verify", "membership"}, "tolerances");
    if (tol.contains("solver")) inst.tolerances.solver = tol["solver"].get<double>();
    if (tol.contains("verify")) inst.tolerances.verify = tol["verify"].get<double>();
    if (tol.contains("membership"))
      inst.tolerances.membership = tol["membership"].get<double>();
  }
  if (doc.contains("comment")) inst.comment = doc["comment"].get<std::string>();
  return inst;
}

InstanceFile load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open instance file: " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("JSON parse error: ") + e.what());
  }
  return parse_instance(doc);
}

ChoiCollection materialize_object(const InstanceFile& inst) {
  if (inst.family) {
    try {
      return standard_object(inst.family->first, inst.family->second);
    } catch (const std::invalid_argument& e) {
      throw SchemaError(e.what());
    }
  }
  if (!inst.object) throw SchemaError("instance has no object");
  return *inst.object;
}

Json serialize_game(const InputOutputGame& g) {
  Json out;
  out["kind"] = kind_name(g.kind());
  Json canonical;
  canonical["shift"] = g.canonical.shift;
  canonical["scale"] = g.canonical.scale;
  canonical["canonicalized"] = g.canonical.canonicalized;
  out["canonical_record"] = std::move(canonical);
  Json blocks = Json::array();
  for (const auto& bg : g.blocks) {
    Json jb;
    jb["x"] = bg.key.x;
    jb["a"] = bg.key.a;
    jb["p"] = bg.p;
    Json groups = Json::array();
    auto roles = factor_groups(g.kind());
    for (size_t gi = 0; gi < bg.elements.size(); ++gi) {
      Json jg;
      jg["role"] = roles[gi].role == GroupRole::Ensemble
                       ? "ensemble"
                       : (roles[gi].role == GroupRole::Slot ? "instrument" : "povm");
      Json els = Json::array();
      for (const auto& e : bg.elements[gi]) els.push_back(serialize_matrix(e));
      jg["elements"] = std::move(els);
      groups.push_back(std::move(jg));
    }
    jb["groups"] = std::move(groups);
    jb["rewards"] = bg.rewards;
    blocks.push_back(std::move(jb));
  }
  out["blocks"] = std::move(blocks);
  return out;
}

namespace {

Json witness_json(const Witness& w) {
  Json out;
  out["value"] = w.value;
  out["min_eigenvalue"] = w.min_eig;
  out["max_over_free_set"] = w.max_over_free;
  out["reverify_gap"] = w.reverify_gap;
  out["verified"] = w.verified;
  Json blocks = Json::array();
  for (const auto& b : w.blocks) blocks.push_back(serialize_matrix(b));
  out["blocks"] = std::move(blocks);
  return out;
}

Json solver_json(const RobustnessReport& rep) {
  Json out;
  out["status"] = to_string(rep.status);
  out["iterations"] = rep.raw.iterations;
  out["primal_residual"] = rep.raw.primal_residual;
  out["dual_residual"] = rep.raw.dual_residual;
  out["message"] = rep.raw.message;
  return out;
}

}  // namespace

ReportFile run(const InstanceFile& inst, const RunOptions& opts) {
  using Clock = std::chrono::steady_clock;
  auto t0 = Clock::now();
  ReportFile out;
  out.doc["instance"] = serialize_instance(inst);
  out.doc["status"] = "ok";
  Json& values = out.doc["values"];
  values = Json::object();

  if (inst.task == "scan") return run_scan(inst, opts);

  ChoiCollection obj = materialize_object(inst);
  {
    ValidityReport v = validate(obj);
    if (!v.pass) throw SchemaError("object fails validity checks:\n" + v.summary());
  }
  ConicFreeSet f;
  try {
    f = compile_free_set(inst.free_set_tag, inst.free_set_params, obj);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  Json flags = Json::array();
  for (const auto& fl : f.flags) flags.push_back(fl);
  out.doc["flags"] = std::move(flags);

  SolverOptions sopts;
  sopts.gap_tol = inst.tolerances.solver;

  if (inst.task == "robustness" || inst.task == "game") {
    RobustnessReport rep = robustness(obj, f, sopts);
    values["robustness"] = rep.robustness;
    values["primal_value"] = rep.primal_value;
    values["dual_value"] = rep.dual_value;
    values["duality_gap"] = rep.gap;
    values["slater_checked"] = rep.slater_checked;
    values["witness_value"] = rep.witness.value;
    values["witness_max_over_free"] = rep.witness.max_over_free;
    values["witness_verified"] = rep.witness.verified;
    values["noise_residual"] = rep.noise_residual;
    out.doc["solver"] = solver_json(rep);
    if (rep.status != SolveStatus::Optimal) {
      out.doc["status"] = "solver_failure";
      out.exit_code = kExitSolver;
    } else {
      if (opts.emit_witness) out.doc["witness"] = witness_json(rep.witness);
      if (inst.task == "game") {
        InputOutputGame game =
            canonicalize(detail::game_from_witness_blocks(rep.witness.blocks, obj));
        Json record;
        record["shift"] = game.canonical.shift;
        record["scale"] = game.canonical.scale;
        values["canonical_record"] = std::move(record);
        values["payoff_at_candidate"] = payoff(game, obj);
        values["free_max_payoff"] = free_max_payoff(game, f);
        if (opts.emit_game) out.doc["game"] = serialize_game(game);
      }
    }
  } else if (inst.task == "membership") {
    MembershipCertificate cert = membership(obj, f);
    values["member"] = cert.is_member;
    values["robustness"] = cert.robustness;
    values["tolerance"] = inst.tolerances.membership;
    if (cert.is_member) {
      values["certificate_residual"] = cert.feasible_residual;
    } else {
      values["witness_value"] = cert.witness_value;
      values["witness_max_over_free"] = cert.witness_max_over_free;
    }
    out.doc["summary"] = cert.summary();
  } else if (inst.task == "verify") {
    double tol = opts.tol_override.value_or(inst.tolerances.verify);
    PayoffReport rep = verify_equality(obj, f, tol, sopts);
    values["payoff"] = rep.payoff;
    values["free_max"] = rep.free_max;
    values["global_max"] = rep.global_max;
    values["global_min"] = rep.global_min;
    values["ratio"] = rep.ratio;
    values["robustness_bound"] = rep.robustness_bound;
    values["equality_residual"] = rep.equality_residual;
    values["duality_gap"] = rep.duality_gap;
    values["witness_max_over_free"] = rep.witness_max_over_free;
    values["tolerance"] = tol;
    Json notes = Json::array();
    for (const auto& n : rep.notes) notes.push_back(n);
    out.doc["notes"] = std::move(notes);
    if (!rep.pass) {
      out.doc["status"] = "verification_failure";
      out.exit_code = kExitVerification;
    }
  } else {
    throw SchemaError("unknown task '" + inst.task + "'");
  }

  auto t1 = Clock::now();
  out.doc["timing_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  return out;
}

ReportFile run_scan(const InstanceFile& inst, const RunOptions& opts) {
  if (!inst.scan || !inst.family) throw SchemaError("scan task needs scan and family blocks");
  const ScanSpec& sc = *inst.scan;

  struct RowResult {
    double param = 0.0;
    double robustness = 0.0;
    double gap = 0.0;
    std::string status = "pending";
  };
  std::vector<RowResult> rows(static_cast<size_t>(sc.steps));
  for (int i = 0; i < sc.steps; ++i)
    rows[static_cast<size_t>(i)].param =
        sc.from + (sc.to - sc.from) * i / static_cast<double>(sc.steps - 1);

  SolverOptions sopts;
  sopts.gap_tol = inst.tolerances.solver;

  std::mutex next_mutex;
  int next = 0;
  auto worker = [&]() {
    for (;;) {
      int i;
      {
        std::lock_guard<std::mutex> lock(next_mutex);
        if (next >= sc.steps) return;
        i = next++;
      }
      RowResult& row = rows[static_cast<size_t>(i)];
      try {
        auto params = inst.family->second;
        params[sc.parameter] = row.param;
        ChoiCollection obj = standard_object(inst.family->first, params);
        ConicFreeSet f = compile_free_set(inst.free_set_tag, inst.free_set_params, obj);
        RobustnessReport rep = robustness(obj, f, sopts);
        row.robustness = rep.robustness;
        row.gap = rep.gap;
        row.status = to_string(rep.status);
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
    }
  };
  int jobs = std::max(1, opts.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ReportFile out;
  out.doc["instance"] = serialize_instance(inst);
  out.doc["status"] = "ok";
  std::string csv = "param,robustness,gap,status\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.3g,", row.param, row.robustness, row.gap);
    csv += buf;
    csv += row.status;
    csv += "\n";
    if (row.status != "optimal" && out.exit_code == kExitOk) out.exit_code = kExitSolver;
  }
  if (out.exit_code != kExitOk) out.doc["status"] = "solver_failure";
  out.csv = std::move(csv);
  out.doc["rows"] = sc.steps;
  return out;
}

std::string fixtures_dir() {
  if (const char* env = std::getenv("IOGAMES_FIXTURES")) return env;
#ifdef IOGAMES_FIXTURE_DIR
  return IOGAMES_FIXTURE_DIR;
#else
  return "fixtures";
#endif
}

}  // namespace iogames
