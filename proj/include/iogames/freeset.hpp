#pragma once

#include <functional>
#include <optional>

#include "iogames/objects.hpp"

namespace iogames {

// A compiled convex compact free set. The description is stored in
// homogeneous (conic-hull) form: candidate blocks J_b, auxiliary PSD
// blocks U_k and a scale alpha satisfy
//
//   sum_b <C_b, J_b> + sum_k <A_k, U_k> + c * alpha = 0   (every row)
//
// together with blockwise positive semidefiniteness. Members of the set
// itself are the points with alpha = 1; scaling a feasible point by any
// alpha >= 0 stays feasible, so the rows describe the cone over the set.

struct CandidateBlockSpec {
  BlockKey key;
  std::vector<int> factor_dims;
  std::vector<std::string> labels;
  int dim = 0;
};

struct AuxBlockSpec {
  std::string name;
  int dim = 0;
};

struct FreeSetRow {
  std::vector<std::pair<int, CMat>> cand;
  std::vector<std::pair<int, CMat>> aux;
  double alpha = 0.0;
};

struct FreeAssignment {
  std::vector<CMat> candidate;
  std::vector<CMat> aux;
  double alpha = 1.0;
};

struct ConicFreeSet {
  std::string label;
  ObjectKind object_kind = ObjectKind::Channels;
  std::vector<CandidateBlockSpec> candidate_blocks;
  int n_settings = 1;
  std::vector<AuxBlockSpec> aux_blocks;
  std::vector<FreeSetRow> rows;
  // Scalar inequality rows, same term layout, meaning <= 0.
  std::vector<FreeSetRow> inequality_rows;
  std::optional<FreeAssignment> slater_point;
  std::vector<std::string> flags;

  int candidate_index(const BlockKey& key) const;
  // Largest absolute equality-row residual at the given assignment.
  double row_residual(const FreeAssignment& pt) const;
  bool shape_matches(const ChoiCollection& obj) const;
};

// Builder that expands operator equalities into scalar rows over an
// orthonormal Hermitian basis of the target space.
class FreeSetBuilder {
 public:
  explicit FreeSetBuilder(ConicFreeSet skeleton) : set_(std::move(skeleton)) {}

  enum class Slot { Candidate, Aux };

  struct Term {
    Slot slot;
    int index;
    // Maps a target-space basis element to the coefficient matrix on
    // this slot (the adjoint of the forward map).
    std::function<CMat(const CMat&)> adjoint;
  };

  // Adds rows for: sum_t map_t(X_t) = alpha * rhs. Pass a zero matrix
  // (or empty) rhs for homogeneous constraints.
  void add_operator_equality(int target_dim, const std::vector<Term>& terms,
                             const CMat& alpha_rhs = CMat());

  ConicFreeSet take() && { return std::move(set_); }

 private:
  ConicFreeSet set_;
};

// --- compilers ---

// Channels {Lambda_x} obtainable as marginals of one broadcast channel
// A -> B_1 ... B_n. Output slots are ordered by input index.
ConicFreeSet compile_compatible_channels(int n_channels, int d_in, int d_out);

// POVMs encoded as trivial-output classical channels; parent POVM ranges
// over deterministic outcome assignments.
ConicFreeSet compile_jointly_measurable(const std::vector<int>& outcome_counts, int d);

// PPT surrogate for entanglement-breaking channels; exact only for
// d_in * d_out <= 6, flagged on the compiled set.
ConicFreeSet compile_entanglement_breaking_ppt(int d_in, int d_out);

// Channels sending only a classical message in the given output basis.
ConicFreeSet compile_classical_channels(int d_in, int n_outcomes, const CMat& basis = CMat());

// Instrument collections reachable from one parent instrument by
// deterministic post-processing.
ConicFreeSet compile_compatible_instruments(const std::vector<int>& arities, int d_in,
                                            int d_out);

// Channels commuting with the conjugate action of every group unitary.
ConicFreeSet compile_g_covariant(int d, const std::vector<CMat>& group_unitaries);

// Base sets (no resource restriction), used for canonicalization and as
// trivial free sets.
ConicFreeSet compile_all_channels(int n_channels, int d_in, int d_out);
ConicFreeSet compile_all_instruments(const std::vector<int>& arities, int d_in, int d_out);

// Base set matching the shape of the given collection (dispatches to the
// process/tester compilers for higher-order objects).
ConicFreeSet compile_base_set(const ChoiCollection& shape);

// Free set selected by tag, shaped after the candidate. Tags:
// classical_channels, entanglement_breaking_ppt, jointly_measurable,
// compatible_channels, compatible_instruments, g_covariant,
// causally_separable, compatible_testers, all_channels, all_instruments,
// valid_processes, all_testers.
ConicFreeSet compile_free_set(const std::string& tag,
                              const std::map<std::string, double>& params,
                              const ChoiCollection& candidate);

// --- membership ---

struct MembershipCertificate {
  bool is_member = false;
  double robustness = 0.0;
  double tolerance = 1e-6;
  // Feasible auxiliary assignment when inside (alpha = 1).
  std::optional<FreeAssignment> feasible_point;
  double feasible_residual = 0.0;
  // Separating witness when outside: sum_b tr[Y_b J_b] > 1 >= max over F.
  std::vector<CMat> witness;
  double witness_value = 0.0;
  double witness_max_over_free = 0.0;
  std::string summary() const;
};

MembershipCertificate membership(const ChoiCollection& candidate, const ConicFreeSet& f);

}  // namespace iogames
