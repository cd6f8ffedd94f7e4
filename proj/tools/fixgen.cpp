// Regenerates the versioned fixture corpus. Run from the repository
// root (or pass a target directory) after changing the schema or the
// fixture constructors; tests byte-compare against these files.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "iogames/reporting.hpp"

using namespace iogames;

namespace {

void write(const std::filesystem::path& dir, const std::string& name, const InstanceFile& inst) {
  std::ofstream out(dir / name);
  out << serialize_instance(inst).dump(2) << "\n";
  std::cout << "wrote " << (dir / name).string() << "\n";
}

InstanceFile family_instance(const std::string& task, const std::string& tag,
                             std::map<std::string, double> params, const std::string& free_tag,
                             const std::string& comment = "") {
  InstanceFile inst;
  inst.task = task;
  inst.family = {tag, std::move(params)};
  inst.free_set_tag = free_tag;
  inst.comment = comment;
  return inst;
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "fixtures";
  std::filesystem::create_directories(dir);

  write(dir, "depol02_vs_eb.json",
        family_instance("membership", "depolarizing", {{"p", 0.2}}, "entanglement_breaking_ppt",
                        "weakly depolarized qubit channel stays entanglement breaking (PPT)"));
  write(dir, "identity_vs_eb.json",
        family_instance("membership", "identity", {}, "entanglement_breaking_ppt"));
  write(dir, "classicalz_vs_eb.json",
        family_instance("membership", "classical_z", {}, "entanglement_breaking_ppt",
                        "measure-and-prepare channels are separable, hence PPT"));
  write(dir, "identity_vs_classical.json",
        family_instance("verify", "identity", {}, "classical_channels",
                        "equality between payoff ratio and 1+R for the identity channel"));
  write(dir, "depol0_vs_classical.json",
        family_instance("membership", "depolarizing", {{"p", 0.0}}, "classical_channels"));
  write(dir, "sharp_xz_vs_jm.json",
        family_instance("verify", "sharp_xz_povms", {}, "jointly_measurable"));
  write(dir, "noisy_xz_05_vs_jm.json",
        family_instance("membership", "noisy_xz_povms", {{"eta", 0.5}}, "jointly_measurable"));
  write(dir, "noisy_xz_09_vs_jm.json",
        family_instance("membership", "noisy_xz_povms", {{"eta", 0.9}}, "jointly_measurable"));
  write(dir, "idid_vs_compatible.json",
        family_instance("verify", "identity_pair", {}, "compatible_channels",
                        "no-cloning: two perfect copies of the identity channel"));
  write(dir, "depdep_vs_compatible.json",
        family_instance("membership", "depolarizing_pair", {{"p", 0.0}}, "compatible_channels"));
  write(dir, "luders_sharp_vs_ci.json",
        family_instance("verify", "luders_xz_instruments", {{"eta", 1.0}},
                        "compatible_instruments"));
  write(dir, "parent_luders03_vs_ci.json",
        family_instance("membership", "parent_luders_instruments", {{"eta", 0.3}},
                        "compatible_instruments",
                        "post-processings of one parent instrument are compatible"));
  write(dir, "depol_vs_pauli_covariant.json",
        family_instance("membership", "depolarizing", {{"p", 0.6}}, "g_covariant_pauli"));
  write(dir, "hadamard_vs_zcov.json",
        family_instance("membership", "hadamard", {}, "g_covariant_z"));
  write(dir, "circuit_vs_causally_separable.json",
        family_instance("membership", "circuit_process", {{"seed", 3}}, "causally_separable"));
  write(dir, "shared_testers_vs_compatible.json",
        family_instance("membership", "shared_tester_pair", {}, "compatible_testers"));
  write(dir, "conjugate_testers_vs_compatible.json",
        family_instance("verify", "prepare_measure_testers", {}, "compatible_testers",
                        "testers probing conjugate input-output behaviour of a qubit slot"));

  {
    // The causally nonseparable two-party process, shipped explicitly.
    InstanceFile inst;
    inst.task = "verify";
    inst.object = standard_object("ocb_process", {});
    inst.free_set_tag = "causally_separable";
    inst.comment =
        "two-party process matrix with trivial global past/future, from "
        "Oreshkov, Costa and Brukner, Nat. Commun. 3, 1092 (2012), "
        "rescaled to unit trace; causally nonseparable";
    write(dir, "ocb_vs_causally_separable.json", inst);
  }

  {
    InstanceFile inst = family_instance("scan", "depolarizing", {}, "entanglement_breaking_ppt",
                                        "entanglement-breaking transition at p = 1/3");
    inst.scan = ScanSpec{"p", 0.0, 1.0, 21};
    write(dir, "scan_depolarizing_eb.json", inst);
  }
  {
    InstanceFile inst = family_instance("scan", "noisy_xz_povms", {}, "jointly_measurable",
                                        "joint-measurability transition at eta = 1/sqrt(2)");
    inst.scan = ScanSpec{"eta", 0.0, 1.0, 21};
    write(dir, "scan_noisy_xz_jm.json", inst);
  }
  return 0;
}
