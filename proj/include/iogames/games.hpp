#pragma once

#include "iogames/solver.hpp"

namespace iogames {

// Affine reward remap that made a game canonical: the canonical payoff
// of any collection equals (raw payoff - shift) / scale.
struct CanonicalRecord {
  double shift = 0.0;
  double scale = 1.0;
  bool canonicalized = false;
};

// Game elements attached to one witness block. `elements` holds one list
// per factor group of the object kind: ensemble states, then one list of
// CP Choi blocks per slot (completion block last), then POVM effects
// (completion effect last). Rewards are flat, row-major over the element
// indices in group order; completion entries start at reward 0 and pick
// up the canonicalization shift later.
struct BlockGame {
  BlockKey key;
  std::vector<std::vector<CMat>> elements;
  std::vector<double> p;  // weight of ensemble element i; sums to 1 over all blocks of one x
  std::vector<double> rewards;

  int n_elements(int group) const { return static_cast<int>(elements[static_cast<size_t>(group)].size()); }
  double& reward(const std::vector<int>& idx);
  double reward(const std::vector<int>& idx) const;
};

struct InputOutputGame {
  // Block keys, factor dims and kind of the collections this game is
  // played against.
  ChoiCollection shape;
  std::vector<BlockGame> blocks;
  CanonicalRecord canonical;

  ObjectKind kind() const { return shape.kind; }
};

// Collaborative games share the layout, with slot groups populated.
using CollaborativeGame = InputOutputGame;

struct PayoffReport {
  double payoff = 0.0;
  double free_max = 0.0;
  double global_max = 0.0;
  double global_min = 0.0;
  double ratio = 0.0;
  double robustness_bound = 0.0;  // 1 + R
  double equality_residual = 1.0;
  double duality_gap = 1.0;
  double witness_max_over_free = 0.0;
  bool pass = false;
  std::vector<std::string> notes;
};

// Expected reward of a collection under a game, evaluated through the
// Choi pairing (channels, instruments) or the process probability rule.
double payoff(const InputOutputGame& g, const ChoiCollection& c);

// The per-block operator G_b with payoff = sum_b <G_b, J_b>; equals the
// witness the game was built from, up to the canonical remap.
std::vector<CMat> game_operators(const InputOutputGame& g);

// Builds the canonical-form game of a witness: Hermitian operator
// Schmidt split per factor group, positive/negative parts folded into
// signed rewards, states normalized (transposed into the ensemble),
// slot blocks shrunk against a reference channel and completed, effects
// jointly rescaled so each block's sum fits under the identity.
InputOutputGame game_from_witness(const Witness& y, const ChoiCollection& candidate_shape);

// Rescales rewards so the payoff ranges over [0, 1] across every
// collection of the candidate's shape (two conic solves). Throws on
// degenerate games (max - min below 1e-10).
InputOutputGame canonicalize(const InputOutputGame& g);

// max over members of f of the payoff; one conic solve.
double free_max_payoff(const InputOutputGame& g, const ConicFreeSet& f);

// Minimum-error discrimination form of a nonnegative-reward channel
// game: sigma_{j|x} = sum_i p(i,x) w_{ijx} Lambda_x(rho_{i|x}).
struct DiscriminationForm {
  std::vector<std::vector<CMat>> sigma_hat;  // normalized, per block
  std::vector<std::vector<double>> pjx;
  double normalization = 0.0;  // N
  double payoff_value = 0.0;
  double reconstruction_residual = 0.0;
};
DiscriminationForm discrimination_form(const InputOutputGame& g, const ChoiCollection& c);

// Full pipeline: robustness -> witness -> game -> canonicalize ->
// payoffs; asserts |P/free_max - (1+R)| <= tol. Works for every object
// kind; verify_theorem1 restricts to channels/instruments.
PayoffReport verify_equality(const ChoiCollection& candidate, const ConicFreeSet& f,
                             double tol, const SolverOptions& opts = {});

PayoffReport verify_theorem1(const ChoiCollection& candidate, const ConicFreeSet& f,
                             double tol);

// Internal helpers shared with the supermap layer.
namespace detail {

// Pairing prefactor: product of all factor dims except the measurement
// group (d_in for channels, D for processes).
double pairing_prefactor(const ComplexMatrix& block);

// kron of (state^T, slot blocks^T ..., effect) in factor-group order,
// scaled by the pairing prefactor.
CMat pairing_operator(const ChoiCollection& shape, int block_index,
                      const std::vector<const CMat*>& group_elements);

InputOutputGame game_from_witness_blocks(const std::vector<CMat>& y_blocks,
                                         const ChoiCollection& shape);

}  // namespace detail

}  // namespace iogames
