#pragma once

#include <nlohmann/json.hpp>

#include "iogames/supermaps.hpp"

namespace iogames {

using Json = nlohmann::ordered_json;

// Exit-code contract, one code per failure class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSchema = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitVerification = 4;

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ToleranceSpec {
  double solver = 1e-9;
  double verify = 1e-5;
  double membership = 1e-6;
};

struct ScanSpec {
  std::string parameter;
  double from = 0.0;
  double to = 1.0;
  int steps = 2;
};

struct InstanceFile {
  int version = 1;
  std::string task;  // robustness | membership | game | verify | scan
  std::optional<ChoiCollection> object;
  std::optional<std::pair<std::string, std::map<std::string, double>>> family;
  std::string free_set_tag;
  std::map<std::string, double> free_set_params;
  std::optional<ScanSpec> scan;
  ToleranceSpec tolerances;
  std::string comment;
};

struct RunOptions {
  bool emit_witness = false;
  bool emit_game = false;
  int jobs = 1;
  std::optional<double> tol_override;
};

struct ReportFile {
  Json doc;
  std::string csv;  // scan output
  int exit_code = kExitOk;
};

// JSON <-> objects. Unknown fields are rejected; complex entries are
// [re, im] pairs.
Json serialize_collection(const ChoiCollection& c);
ChoiCollection parse_collection(const Json& doc);
Json serialize_instance(const InstanceFile& inst);
InstanceFile parse_instance(const Json& doc);
InstanceFile load_instance(const std::string& path);

Json serialize_game(const InputOutputGame& g);

// Resolves the object (family tags included) into concrete blocks.
ChoiCollection materialize_object(const InstanceFile& inst);

ReportFile run(const InstanceFile& inst, const RunOptions& opts = {});
ReportFile run_scan(const InstanceFile& inst, const RunOptions& opts = {});

// Fixture directory: $IOGAMES_FIXTURES, else the compiled-in source
// path, else ./fixtures.
std::string fixtures_dir();

}  // namespace iogames
