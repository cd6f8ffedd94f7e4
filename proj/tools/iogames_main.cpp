#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "iogames/reporting.hpp"

namespace {

constexpr const char* kFooter =
    "Exit codes:\n"
    "  0  success\n"
    "  2  schema error (malformed instance, invalid object, unknown tag)\n"
    "  3  solver failure (no certified optimum, scan row failed)\n"
    "  4  verification failure (equality residual above tolerance)\n"
    "\n"
    "The fixture directory defaults to ./fixtures and can be overridden\n"
    "with the IOGAMES_FIXTURES environment variable.";

int write_output(const std::string& path, const std::string& payload) {
  if (path.empty()) {
    std::cout << payload;
    return 0;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "cannot write to " << path << "\n";
    return 1;
  }
  out << payload;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iogames: robustness of dynamical quantum resources and the games that certify it"};
  app.footer(kFooter);
  app.require_subcommand(1);

  std::string instance_path, out_path;
  double tol = -1.0;
  int jobs = 1;
  bool emit_witness = false, emit_game = false;

  for (const char* name : {"robustness", "membership", "game", "verify", "scan"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run a ") + name + " instance");
    sub->add_option("--instance", instance_path, "instance JSON file")->required();
    sub->add_option("--out", out_path, "output path (report JSON, or CSV for scan)");
    sub->add_option("--tol", tol, "override the task tolerance");
    sub->add_option("--jobs", jobs, "concurrent scan points");
    sub->add_flag("--emit-witness", emit_witness, "embed the witness blocks in the report");
    sub->add_flag("--emit-game", emit_game, "embed the constructed game in the report");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string task = app.get_subcommands().front()->get_name();

  try {
    iogames::InstanceFile inst = iogames::load_instance(instance_path);
    if (inst.task != task)
      throw iogames::SchemaError("instance task '" + inst.task + "' does not match subcommand '" +
                                 task + "'");
    iogames::RunOptions opts;
    opts.emit_witness = emit_witness;
    opts.emit_game = emit_game;
    opts.jobs = jobs;
    if (tol > 0) opts.tol_override = tol;

    iogames::ReportFile report =
        task == "scan" ? iogames::run_scan(inst, opts) : iogames::run(inst, opts);
    const std::string payload = task == "scan" ? report.csv : report.doc.dump(2) + "\n";
    if (write_output(out_path, payload) != 0) return 1;
    return report.exit_code;
  } catch (const iogames::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return iogames::kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return iogames::kExitSolver;
  }
}
