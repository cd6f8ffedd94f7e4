#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "iogames/reporting.hpp"

using namespace iogames;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

InstanceFile fixture(const std::string& name) {
  return load_instance((std::filesystem::path(fixtures_dir()) / name).string());
}

}  // namespace

TEST_CASE("fixture corpus: serialize-parse-serialize is byte identical") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(fixtures_dir())) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    std::string original = slurp(entry.path());
    InstanceFile inst = load_instance(entry.path().string());
    std::string once = serialize_instance(inst).dump(2) + "\n";
    CHECK_MESSAGE(once == original, entry.path().filename().string());
    InstanceFile again = parse_instance(Json::parse(once));
    CHECK(serialize_instance(again).dump(2) + "\n" == once);
  }
  CHECK(count >= 19);
}

TEST_CASE("collection serialization round trip") {
  ChoiCollection c = standard_object("luders_xz_instruments", {{"eta", 0.8}});
  Json doc = serialize_collection(c);
  ChoiCollection back = parse_collection(doc);
  REQUIRE(back.n_blocks() == c.n_blocks());
  for (int b = 0; b < c.n_blocks(); ++b) {
    CHECK(back.block(b).key == c.block(b).key);
    CHECK((back.block(b).m.mat() - c.block(b).m.mat()).norm() == 0.0);
    CHECK(back.block(b).m.dims() == c.block(b).m.dims());
  }
}

TEST_CASE("schema: malformed and unknown fields rejected") {
  CHECK_THROWS_AS(load_instance("/nonexistent/file.json"), SchemaError);
  CHECK_THROWS_AS(parse_instance(Json::parse(R"({"version":1})")), SchemaError);
  CHECK_THROWS_AS(parse_instance(Json::parse(
                      R"({"version":1,"task":"robustness","object":{"kind":"family","tag":"identity","params":{}},"free_set":{"tag":"classical_channels","params":{}},"surprise":1})")),
                  SchemaError);
  CHECK_THROWS_AS(parse_instance(Json::parse(
                      R"({"version":2,"task":"robustness","object":{"kind":"family","tag":"identity","params":{}},"free_set":{"tag":"classical_channels","params":{}}})")),
                  SchemaError);
  CHECK_THROWS_AS(parse_instance(Json::parse(
                      R"({"version":1,"task":"paint","object":{"kind":"family","tag":"identity","params":{}},"free_set":{"tag":"classical_channels","params":{}}})")),
                  SchemaError);
}

TEST_CASE("run: membership instance") {
  ReportFile rep = run(fixture("depol02_vs_eb.json"));
  CHECK(rep.exit_code == kExitOk);
  CHECK(rep.doc["values"]["member"].get<bool>());
  CHECK(rep.doc["values"]["robustness"].get<double>() <= 1e-6);
  // The PPT surrogate is flagged on every report that uses it.
  bool flagged = false;
  for (const auto& f : rep.doc["flags"]) {
    if (f.get<std::string>().find("PPT") != std::string::npos) flagged = true;
  }
  CHECK(flagged);
}

TEST_CASE("run: verify instance meets its tolerance") {
  ReportFile rep = run(fixture("identity_vs_classical.json"));
  CHECK(rep.exit_code == kExitOk);
  CHECK(rep.doc["status"] == "ok");
  CHECK(rep.doc["values"]["equality_residual"].get<double>() <= 1e-5);
  CHECK(std::abs(rep.doc["values"]["robustness_bound"].get<double>() - 2.0) < 1e-6);
}

TEST_CASE("run: game task embeds the canonical record") {
  InstanceFile inst = fixture("identity_vs_classical.json");
  inst.task = "game";
  RunOptions opts;
  opts.emit_game = true;
  opts.emit_witness = true;
  ReportFile rep = run(inst, opts);
  CHECK(rep.exit_code == kExitOk);
  CHECK(rep.doc.contains("game"));
  CHECK(rep.doc["game"].contains("canonical_record"));
  CHECK(rep.doc.contains("witness"));
  CHECK(rep.doc["witness"]["verified"].get<bool>());
  // Third parties can re-evaluate: shift/scale plus payoff are embedded.
  double shift = rep.doc["game"]["canonical_record"]["shift"].get<double>();
  double scale = rep.doc["game"]["canonical_record"]["scale"].get<double>();
  CHECK(scale > 0.0);
  CHECK(std::abs(shift) < 1e-6);
}

TEST_CASE("run: determinism of report values") {
  InstanceFile inst = fixture("noisy_xz_09_vs_jm.json");
  ReportFile r1 = run(inst);
  ReportFile r2 = run(inst);
  CHECK(r1.doc["values"].dump() == r2.doc["values"].dump());
}

TEST_CASE("scan: depolarizing vs PPT with monotone robustness") {
  InstanceFile inst = fixture("scan_depolarizing_eb.json");
  inst.scan->steps = 11;
  ReportFile rep = run_scan(inst, {});
  CHECK(rep.exit_code == kExitOk);
  std::istringstream csv(rep.csv);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "param,robustness,gap,status");
  std::vector<double> ps, rs;
  std::string line;
  while (std::getline(csv, line)) {
    double p, r;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf", &p, &r) == 2);
    CHECK(line.find("optimal") != std::string::npos);
    ps.push_back(p);
    rs.push_back(r);
  }
  REQUIRE(rs.size() == 11);
  for (size_t i = 1; i < rs.size(); ++i) CHECK(rs[i] >= rs[i - 1] - 1e-6);
  CHECK(rs.front() <= 1e-8);   // p = 0 is entanglement breaking
  CHECK(rs.back() > 1e-3);     // p = 1 is not
  // Zero robustness exactly up to the 1/3 transition.
  for (size_t i = 0; i < ps.size(); ++i) {
    if (ps[i] < 1.0 / 3.0 - 1e-9) CHECK(rs[i] <= 1e-6);
    if (ps[i] > 1.0 / 3.0 + 0.05) CHECK(rs[i] > 1e-6);
  }
}

TEST_CASE("scan: constant family yields a constant column") {
  InstanceFile inst = fixture("scan_depolarizing_eb.json");
  inst.scan->parameter = "p";
  inst.scan->from = 0.05;
  inst.scan->to = 0.25;
  inst.scan->steps = 5;
  ReportFile rep = run_scan(inst, {});
  std::istringstream csv(rep.csv);
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    double p, r;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf", &p, &r) == 2);
    CHECK(std::abs(r) <= 1e-6);  // inside the PPT region everywhere
  }
}

TEST_CASE("scan: concurrent jobs match the serial rows") {
  InstanceFile inst = fixture("scan_noisy_xz_jm.json");
  inst.scan->steps = 7;
  ReportFile serial = run_scan(inst, {});
  RunOptions par;
  par.jobs = 4;
  ReportFile parallel = run_scan(inst, par);
  CHECK(serial.csv == parallel.csv);
}

TEST_CASE("run: verification failure exit code") {
  InstanceFile inst = fixture("identity_vs_classical.json");
  inst.tolerances.verify = 1e-14;  // unreachably tight
  ReportFile rep = run(inst);
  CHECK(rep.exit_code == kExitVerification);
  CHECK(rep.doc["status"] == "verification_failure");
}
