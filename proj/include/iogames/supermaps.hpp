#pragma once

#include "iogames/games.hpp"

namespace iogames {

// Two-slot higher-order layer. Process matrices live on the six labeled
// factors (I0, I1, O1, I2, O2, O0); factors of dimension 1 make the
// global past/future or a whole slot trivial, so one-slot combs and
// testers use the same representation.

enum class CombOrder { Slot1First, Slot2First };

// Orthogonal projection onto the subspace of valid process matrices,
// assembled from commuting trace-and-replace projectors. Idempotent and
// self-adjoint; valid processes are its fixed points.
ComplexMatrix validity_project(const ComplexMatrix& w);

// Orthogonal projection onto the fixed-order comb subspace (signalling
// only along the given slot order). Comb cone = fixed points that are
// PSD.
ComplexMatrix comb_project(const ComplexMatrix& w, CombOrder order);

// Dimensions of a two-slot circuit pre: I0 -> I1 (x) anc1,
// mid: O1 (x) anc1 -> I2 (x) anc2, post: O2 (x) anc2 -> O0.
struct CircuitDims {
  int i0 = 1, i1 = 2, o1 = 2, i2 = 2, o2 = 2, o0 = 1;
  int anc1 = 1, anc2 = 1;
};

// Process matrix of the fixed-order circuit built from three channels
// (link product over the ancillas). For order Slot2First the slots are
// relabeled.
ProcessMatrix process_of_circuit(const ChoiChannel& pre, const ChoiChannel& mid,
                                 const ChoiChannel& post, const CircuitDims& dims,
                                 CombOrder order = CombOrder::Slot1First);

// Outcome probability of instruments plugged into the slots followed by
// a final measurement effect:
//   p = D tr[W (rho^T (x) J_C^T (x) J_D^T (x) M)],
// with D the product of every factor dimension except O0. Summing over
// complete instruments and a full POVM gives 1.
double probability(const ProcessMatrix& w, const ComplexMatrix& slot1_block,
                   const ComplexMatrix& slot2_block, const CMat& effect, const CMat& rho);

// Free sets.
ConicFreeSet compile_causally_separable(const std::vector<int>& dims);
ConicFreeSet compile_valid_processes(const std::vector<int>& dims, int n_processes = 1);
ConicFreeSet compile_comb_cone_set(const std::vector<int>& dims, CombOrder order,
                                   int n_processes = 1);
ConicFreeSet compile_compatible_testers(const std::vector<int>& arities,
                                        const std::vector<int>& dims,
                                        CombOrder order = CombOrder::Slot1First);
ConicFreeSet compile_all_testers(const std::vector<int>& arities, const std::vector<int>& dims,
                                 CombOrder order = CombOrder::Slot1First);

// Robustness of a process or superinstrument collection; delegates to
// the generic conic machinery and re-verifies the witness.
RobustnessReport supermap_robustness(const ChoiCollection& candidate, const ConicFreeSet& f,
                                     const SolverOptions& opts = {});

// Witness-to-game construction across the factor groups
// (I0 | I1 O1 | I2 O2 | O0).
CollaborativeGame game_from_process_witness(const Witness& y,
                                            const ChoiCollection& candidate_shape);

PayoffReport verify_theorem2(const ChoiCollection& candidate, const ConicFreeSet& f,
                             double tol);

// Fixtures.
ProcessMatrix make_ocb_process();
ProcessMatrix make_causally_ordered_fixture(unsigned seed);
ProcessMatrix make_maximally_mixed_process(const std::vector<int>& dims);

}  // namespace iogames
