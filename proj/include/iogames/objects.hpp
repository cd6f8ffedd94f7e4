#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iogames/linalg.hpp"

namespace iogames {

// Normalization used throughout: the Choi state of a channel A->B is
// J = (1/d_A) sum_ij |i><j| (x) Lambda(|i><j|), so tr J = 1 and
// tr_out J = I/d_A. Instrument elements keep the same 1/d_A prefactor,
// making the sum rule literal addition. Process matrices are also
// normalized to unit trace.

class DensityMatrix {
 public:
  explicit DensityMatrix(CMat rho, double tol = 1e-10);
  const CMat& mat() const { return rho_; }
  int dim() const { return static_cast<int>(rho_.rows()); }

 private:
  CMat rho_;
};

class Povm {
 public:
  explicit Povm(std::vector<CMat> effects, double tol = 1e-10);
  const std::vector<CMat>& effects() const { return effects_; }
  int dim() const { return static_cast<int>(effects_.front().rows()); }
  int n_outcomes() const { return static_cast<int>(effects_.size()); }

 private:
  std::vector<CMat> effects_;
};

class ChoiChannel {
 public:
  // j must live on factors (in, out), be PSD with unit trace, and have
  // the maximally mixed input marginal.
  explicit ChoiChannel(ComplexMatrix j, double tol = tolerance::solver);

  const ComplexMatrix& choi() const { return j_; }
  int d_in() const { return j_.factor_dim(0); }
  int d_out() const { return j_.factor_dim(1); }

 private:
  ComplexMatrix j_;
};

// Choi state of the channel with the given Kraus operators.
ChoiChannel channel_to_choi(const std::vector<CMat>& kraus);

// Subnormalized Choi block of a (not necessarily trace-preserving) CP
// map given by Kraus operators; same 1/d_in prefactor as channel_to_choi.
ComplexMatrix cp_choi_block(const std::vector<CMat>& kraus, int d_in, int d_out);

// Inverse of the Choi map: Lambda(rho) = d_in tr_in[(rho^T (x) I) J].
DensityMatrix apply_channel(const ChoiChannel& c, const DensityMatrix& rho);
CMat apply_choi_block(const ComplexMatrix& j, const CMat& rho);

// tr[Lambda(rho) effect] evaluated through the Choi pairing.
double choi_pairing(const ComplexMatrix& j, const CMat& rho, const CMat& effect);

struct ChannelCollection {
  std::vector<ChoiChannel> blocks;
  int size() const { return static_cast<int>(blocks.size()); }
};

struct InstrumentCollection {
  // blocks[x][a] is the subnormalized Choi block J_{a|x}; for every x
  // the blocks sum to a valid channel Choi.
  std::vector<std::vector<ComplexMatrix>> blocks;
  int n_settings() const { return static_cast<int>(blocks.size()); }
};

class ProcessMatrix {
 public:
  // w lives on the six labeled factors (I0, I1, O1, I2, O2, O0); factors
  // may have dimension 1. PSD and unit trace are enforced here; the
  // validity-subspace residual is reported by validate().
  explicit ProcessMatrix(ComplexMatrix w, double tol = tolerance::solver);
  const ComplexMatrix& mat() const { return w_; }
  int dim(const std::string& label) const { return w_.factor_dim(w_.factor_index(label)); }

  static std::vector<std::string> factor_labels();

 private:
  ComplexMatrix w_;
};

struct SuperinstrumentCollection {
  // blocks[x][a] is the PSD block W_{a|x} on the process factors; for
  // every x the blocks sum to a valid process matrix (a comb, for
  // testers).
  std::vector<std::vector<ComplexMatrix>> blocks;
  int n_settings() const { return static_cast<int>(blocks.size()); }
};

// ---------------------------------------------------------------------
// Generic block view consumed by the free-set compiler, the robustness
// program builder and the game constructions.

enum class ObjectKind { Channels, Instruments, Processes, Testers };

std::string to_string(ObjectKind k);

struct BlockKey {
  int x = 0;
  int a = -1;  // outcome index; -1 for channel/process blocks
  std::string str() const;
  bool operator==(const BlockKey& o) const { return x == o.x && a == o.a; }
};

struct ChoiBlock {
  BlockKey key;
  ComplexMatrix m;
};

struct ChoiCollection {
  ObjectKind kind = ObjectKind::Channels;
  std::vector<ChoiBlock> blocks;
  int n_settings = 1;

  int n_blocks() const { return static_cast<int>(blocks.size()); }
  const ChoiBlock& block(int i) const { return blocks[static_cast<size_t>(i)]; }
};

ChoiCollection as_collection(const ChannelCollection& c);
ChoiCollection as_collection(const InstrumentCollection& c);
ChoiCollection as_collection(const ProcessMatrix& w);
ChoiCollection as_collection(const SuperinstrumentCollection& t);

// Role a factor group plays when a witness block is turned into game
// elements.
enum class GroupRole { Ensemble, Slot, Measurement };

struct FactorGroup {
  GroupRole role;
  std::vector<int> factors;
};

// Factor grouping of one block of the given kind: (in | out) for
// channels and instruments, (I0 | I1 O1 | I2 O2 | O0) for processes and
// testers.
std::vector<FactorGroup> factor_groups(ObjectKind kind);

// ---------------------------------------------------------------------
// Validation

struct ValidityCheck {
  std::string name;
  double residual = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct ValidityReport {
  std::vector<ValidityCheck> checks;
  bool pass = true;
  std::string summary() const;
  void add(const std::string& name, double residual, double tol);
};

ValidityReport validate(const ChoiCollection& obj);

// ---------------------------------------------------------------------
// Fixture constructors

// Qubit depolarizing channel with identity weight p.
ChoiChannel make_depolarizing(double p, int d = 2);
ChoiChannel make_identity_channel(int d = 2);
ChoiChannel make_unitary_channel(const CMat& u);

// Measure-and-prepare channel sending only a classical message:
// rho -> sum_a tr[N_a rho] |b_a><b_a|.
ChoiChannel make_classical_channel(const Povm& povm, const CMat& basis = CMat());

// Noisy X/Z qubit pair with visibility eta: effects (I +- eta sigma)/2.
std::vector<Povm> make_noisy_xz_povms(double eta);

// Explicit parent POVM for the noisy X/Z pair, PSD iff eta <= 1/sqrt(2).
Povm make_xz_parent_povm(double eta);

// Luders instrument of a POVM: I_a(rho) = sqrt(A_a) rho sqrt(A_a).
InstrumentCollection make_luders_instruments(const std::vector<Povm>& povms);

// Post-processings of the Luders instrument of the X/Z parent POVM;
// compatible by construction, with noisy X/Z outcome statistics.
InstrumentCollection make_parent_luders_instruments(double eta);

// POVMs encoded as trivial-output classical channels (computational
// basis), the encoding used for joint-measurability robustness.
ChannelCollection povms_to_channels(const std::vector<Povm>& povms);

// Deterministically seeded random channel via a Stinespring isometry
// with `n_kraus` Kraus operators.
ChoiChannel random_channel(int d_in, int d_out, int n_kraus, unsigned seed);

// Tag-driven fixture factory used by the CLI and the fixture files.
// Supported tags: identity, depolarizing, hadamard, classical_z,
// random_channel, identity_pair, depolarizing_pair, random_pair,
// noisy_xz_povms, sharp_xz_povms, luders_xz_instruments,
// parent_luders_instruments, prepare_measure_testers, shared_tester_pair,
// ocb_process, circuit_process, maximally_mixed_process.
ChoiCollection standard_object(const std::string& tag,
                               const std::map<std::string, double>& params);

}  // namespace iogames
