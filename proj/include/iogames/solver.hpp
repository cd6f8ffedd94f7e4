#pragma once

#include "iogames/freeset.hpp"

namespace iogames {

// Cone program over a product of Hermitian PSD blocks (1x1 blocks act as
// nonnegative scalars):
//
//   minimize    sum_k <C_k, X_k> + offset
//   subject to  sum_k <A_ik, X_k> = b_i
//               sum_k <G_ik, X_k> <= g_i   (converted to slack scalars)
//               X_k >= 0.

struct BlockVar {
  std::string name;
  int dim = 0;
};

struct LinearRow {
  std::vector<std::pair<int, CMat>> terms;
  double rhs = 0.0;
};

struct ConeProgram {
  std::vector<BlockVar> blocks;
  std::vector<std::pair<int, CMat>> objective;
  double objective_offset = 0.0;
  std::vector<LinearRow> equalities;
  std::vector<LinearRow> inequalities;
  std::string provenance;

  void check_consistent() const;
};

enum class SolveStatus { Optimal, IterationLimit, NumericalTrouble, Infeasible };
std::string to_string(SolveStatus s);

struct Solution {
  SolveStatus status = SolveStatus::NumericalTrouble;
  double primal_value = 0.0;
  double dual_value = 0.0;
  // |primal - dual| / max(1, |primal|)
  double gap = 1.0;
  double primal_residual = 1.0;
  double dual_residual = 1.0;
  std::vector<CMat> primal;
  std::vector<CMat> dual_slack;
  std::vector<double> y;
  int iterations = 0;
  std::string message;
};

struct SolverOptions {
  double gap_tol = 1e-9;
  double feas_tol = 1e-9;
  // Thresholds at which a finished run still counts as optimal.
  double accept_gap = 1e-7;
  double accept_feas = 1e-8;
  int max_iterations = 100;
  bool verbose = false;
};

// Primal-dual path following with Nesterov-Todd scaling and a Mehrotra
// predictor-corrector step; dense Schur complement. Deterministic for
// identical inputs.
Solution solve(const ConeProgram& p, const SolverOptions& opts = {});

// --- robustness programs (conic form of the generalized robustness) ---

// min (1/|X|) tr J_Gamma  s.t.  J_Gamma - J_Lambda >= 0, J_Gamma in the
// cone over J_F. J_Gamma is eliminated through the slack S = J_Gamma -
// J_Lambda, so the program variables are (S blocks, aux blocks, alpha)
// and the witness is recovered as the dual slack on the S blocks.
struct RobustnessProgram {
  ConeProgram program;
  int n_candidate = 0;  // slack blocks occupy [0, n_candidate)
  int n_aux = 0;        // aux blocks occupy [n_candidate, n_candidate + n_aux)
  int alpha_index = 0;
};

RobustnessProgram build_robustness_primal(const ChoiCollection& candidate,
                                          const ConicFreeSet& f);

// True iff the shipped interior point of f is strictly feasible: row
// residuals within 1e-7 and PSD margin at least 1e-6 on every block.
bool slater_check(const ConicFreeSet& f);

struct Witness {
  std::vector<CMat> blocks;
  double value = 0.0;           // sum_b tr[Y_b J_b]
  double min_eig = 0.0;
  double max_over_free = 0.0;   // re-verified by an auxiliary solve
  double reverify_gap = 1.0;
  bool verified = false;
};

struct RobustnessReport {
  double robustness = 0.0;
  double primal_value = 1.0;  // 1 + R
  double dual_value = 1.0;
  double gap = 1.0;
  SolveStatus status = SolveStatus::NumericalTrouble;
  bool slater_checked = false;
  Witness witness;
  // Optimal noise (Gamma - Lambda)/t and its validity residual, filled
  // when t > 1e-6.
  std::vector<CMat> optimal_noise;
  double noise_residual = 0.0;
  std::vector<std::string> flags;
  Solution raw;
};

RobustnessReport robustness(const ChoiCollection& candidate, const ConicFreeSet& f,
                            const SolverOptions& opts = {});

// Recovers the witness from a solved robustness program and re-verifies
// it: Y >= -1e-9, tr[Y J] = primal within 1e-6, and max over the free
// set of tr[Y T] <= 1 + 1e-6 (computed by an auxiliary solve).
Witness extract_witness(const Solution& s, const RobustnessProgram& rp,
                        const ChoiCollection& candidate, const ConicFreeSet& f,
                        const SolverOptions& opts = {});

// Optimizes a linear functional sum_b <G_b, T_b> over members of the
// free set (alpha pinned to 1). Returns the optimum in
// Solution::primal_value (sign already corrected for maximization).
Solution optimize_over_free_set(const std::vector<CMat>& objective_blocks,
                                const ConicFreeSet& f, bool maximize,
                                const SolverOptions& opts = {});

}  // namespace iogames
