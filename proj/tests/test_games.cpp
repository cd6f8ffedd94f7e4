#include <doctest.h>

#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "iogames/games.hpp"

using namespace iogames;

namespace {

ChoiCollection identity_channel() {
  return as_collection(ChannelCollection{{make_identity_channel(2)}});
}

// Literal payoff loop, used as the oracle for the operator-based path.
double payoff_literal(const InputOutputGame& g, const ChoiCollection& c) {
  double total = 0.0;
  for (size_t b = 0; b < g.blocks.size(); ++b) {
    const auto& bg = g.blocks[b];
    const auto& j = c.block(static_cast<int>(b)).m;
    for (size_t i = 0; i < bg.elements[0].size(); ++i)
      for (size_t k = 0; k < bg.elements[1].size(); ++k) {
        double w = bg.reward({static_cast<int>(i), static_cast<int>(k)});
        if (w == 0.0) continue;
        total += bg.p[i] * w * choi_pairing(j, bg.elements[0][i], bg.elements[1][k]);
      }
  }
  return total;
}

InputOutputGame identity_indicator_game() {
  InputOutputGame g;
  g.shape = identity_channel();
  BlockGame bg;
  bg.key = {0, -1};
  CMat p0 = CMat::Zero(2, 2), p1 = CMat::Zero(2, 2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  bg.elements = {{p0}, {p0, p1}};
  bg.p = {1.0};
  bg.rewards = {1.0, 0.0};
  g.blocks.push_back(std::move(bg));
  return g;
}

InputOutputGame random_game(int n_blocks, int n_states, int n_effects, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  InputOutputGame g;
  ChannelCollection shape;
  for (int x = 0; x < n_blocks; ++x) shape.blocks.push_back(make_identity_channel(2));
  g.shape = as_collection(shape);
  for (int x = 0; x < n_blocks; ++x) {
    BlockGame bg;
    bg.key = {x, -1};
    std::vector<CMat> states, effects;
    for (int i = 0; i < n_states; ++i) states.push_back(random_density(2, seed + 10 * x + i));
    // Random complete POVM from squared Gaussians.
    std::vector<CMat> gs;
    CMat sum = CMat::Zero(2, 2);
    for (int j = 0; j < n_effects; ++j) {
      CMat h = random_hermitian(2, seed + 100 + 10 * x + j);
      gs.push_back(CMat(h * h));
      sum += gs.back();
    }
    Eigen::SelfAdjointEigenSolver<CMat> es(sum);
    CMat isqrt = es.eigenvectors() *
                 es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                 es.eigenvectors().adjoint();
    for (auto& e : gs) effects.push_back(CMat(isqrt * e * isqrt));
    bg.elements = {states, effects};
    for (int i = 0; i < n_states; ++i) bg.p.push_back(1.0 / (n_blocks * n_states));
    for (int i = 0; i < n_states * n_effects; ++i) bg.rewards.push_back(u(rng));
    g.blocks.push_back(std::move(bg));
  }
  return g;
}

}  // namespace

TEST_CASE("payoff: zeros, indicator and the Kraus oracle") {
  InputOutputGame zero = identity_indicator_game();
  zero.blocks[0].rewards = {0.0, 0.0};
  CHECK(payoff(zero, identity_channel()) == doctest::Approx(0.0));

  CHECK(payoff(identity_indicator_game(), identity_channel()) ==
        doctest::Approx(1.0).epsilon(1e-12));

  for (unsigned seed : {5u, 6u}) {
    InputOutputGame g = random_game(2, 2, 2, seed);
    ChoiCollection c = as_collection(ChannelCollection{
        {random_channel(2, 2, 4, seed + 1), random_channel(2, 2, 4, seed + 2)}});
    CHECK(std::abs(payoff(g, c) - payoff_literal(g, c)) < 1e-10);
  }
}

TEST_CASE("game_from_witness: product witness") {
  // Y = d rho^T (x) eta is already in the decomposed form.
  CMat rho = random_density(2, 11);
  CMat eta = CMat::Zero(2, 2);
  eta(0, 0) = 0.7;
  CMat y = 2.0 * Eigen::kroneckerProduct(rho.transpose().eval(), eta).eval();
  Witness w;
  w.blocks = {y};
  InputOutputGame g = game_from_witness(w, identity_channel());
  REQUIRE(g.blocks.size() == 1);
  CHECK(g.blocks[0].elements[0].size() == 1);  // one ensemble state
  CHECK(g.blocks[0].elements[1].size() == 2);  // effect + completion
  // Payoff reproduces tr[Y J] on random channels.
  for (unsigned seed : {21u, 22u}) {
    ChoiCollection c = as_collection(ChannelCollection{{random_channel(2, 2, 4, seed)}});
    double expect = (y.adjoint() * c.block(0).m.mat()).trace().real();
    CHECK(std::abs(payoff(g, c) - expect) < 1e-9);
  }
}

TEST_CASE("game_from_witness: zero witness block gives empty ensemble") {
  Witness w;
  w.blocks = {CMat::Zero(4, 4)};
  InputOutputGame g = game_from_witness(w, identity_channel());
  CHECK(g.blocks[0].elements[0].empty());
  CHECK(payoff(g, identity_channel()) == doctest::Approx(0.0));
}

TEST_CASE("canonicalize: indicator game and idempotence") {
  InputOutputGame g = canonicalize(identity_indicator_game());
  // The indicator game already spans [0, 1]: an orthogonal-state
  // channel scores 0, the identity scores 1.
  CHECK(std::abs(g.canonical.shift) < 1e-7);
  CHECK(g.canonical.scale == doctest::Approx(1.0).epsilon(1e-6));

  InputOutputGame g2 = canonicalize(g);
  CHECK(std::abs(g2.canonical.shift) < 1e-7);
  for (size_t i = 0; i < g.blocks[0].rewards.size(); ++i)
    CHECK(std::abs(g2.blocks[0].rewards[i] - g.blocks[0].rewards[i]) < 1e-9);
}

TEST_CASE("canonicalize: constant game is degenerate") {
  InputOutputGame g = identity_indicator_game();
  g.blocks[0].rewards = {0.5, 0.5};  // constant: P = 0.5 for every channel
  CHECK_THROWS(canonicalize(g));
}

TEST_CASE("free_max_payoff: all channels gives the canonical max") {
  InputOutputGame g = canonicalize(identity_indicator_game());
  ConicFreeSet all = compile_all_channels(1, 2, 2);
  CHECK(free_max_payoff(g, all) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("theorem 1: identity vs classical channels") {
  ConicFreeSet cl = compile_classical_channels(2, 2);
  PayoffReport rep = verify_theorem1(identity_channel(), cl, 1e-5);
  CHECK(rep.pass);
  CHECK(rep.equality_residual <= 1e-5);
  CHECK(std::abs(rep.robustness_bound - 2.0) < 1e-6);
  CHECK(rep.global_max == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(rep.global_min) < 1e-6);
  CHECK(rep.ratio <= rep.robustness_bound + 1e-6);

  // Eq. (5) self-consistency: free_max * (1 + R) = payoff at the candidate.
  CHECK(std::abs(rep.free_max * rep.robustness_bound - rep.payoff) < 1e-5);
}

TEST_CASE("theorem 1: witness game size stays small for qubits") {
  ConicFreeSet cl = compile_classical_channels(2, 2);
  RobustnessReport rob = robustness(identity_channel(), cl);
  REQUIRE(rob.status == SolveStatus::Optimal);
  InputOutputGame g = game_from_witness(rob.witness, identity_channel());
  // Count (i, j) pairs with nonzero reward, completion effect excluded.
  int pairs = 0;
  const auto& bg = g.blocks[0];
  for (int i = 0; i < static_cast<int>(bg.elements[0].size()); ++i)
    for (int j = 0; j + 1 < static_cast<int>(bg.elements[1].size()); ++j)
      if (bg.reward({i, j}) != 0.0) ++pairs;
  CHECK(pairs <= 16);
}

TEST_CASE("theorem 1: sharp X/Z pair vs joint measurability") {
  ConicFreeSet jm = compile_jointly_measurable({2, 2}, 2);
  ChoiCollection xz = as_collection(povms_to_channels(make_noisy_xz_povms(1.0)));
  PayoffReport rep = verify_theorem1(xz, jm, 1e-5);
  CHECK(rep.pass);
  CHECK(rep.equality_residual <= 1e-5);
}

TEST_CASE("theorem 1: member candidate has ratio one") {
  ConicFreeSet eb = compile_entanglement_breaking_ppt(2, 2);
  PayoffReport rep = verify_theorem1(
      as_collection(ChannelCollection{{make_depolarizing(0.2)}}), eb, 1e-5);
  CHECK(rep.pass);
  CHECK(std::abs(rep.robustness_bound - 1.0) < 1e-6);
  CHECK(rep.ratio == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("theorem 1: Luders X/Z instruments vs compatible instruments") {
  ConicFreeSet ci = compile_compatible_instruments({2, 2}, 2, 2);
  ChoiCollection inst = as_collection(make_luders_instruments(make_noisy_xz_povms(1.0)));
  PayoffReport rep = verify_theorem1(inst, ci, 1e-5);
  CHECK(rep.pass);
  CHECK(rep.equality_residual <= 1e-5);
}

TEST_CASE("payoff ratio bound holds for random canonical games") {
  ConicFreeSet cl = compile_classical_channels(2, 2);
  RobustnessReport rob = robustness(identity_channel(), cl);
  REQUIRE(rob.status == SolveStatus::Optimal);
  const double bound = rob.primal_value;
  for (unsigned seed = 0; seed < 10; ++seed) {
    InputOutputGame g = canonicalize(random_game(1, 2, 2, 900 + seed));
    double p = payoff(g, identity_channel());
    double fmax = free_max_payoff(g, cl);
    CHECK(p / fmax <= bound + 1e-6);
  }
}

TEST_CASE("reward scaling leaves the payoff ratio unchanged") {
  ConicFreeSet cl = compile_classical_channels(2, 2);
  InputOutputGame g = canonicalize(random_game(1, 2, 2, 1234));
  double r1 = payoff(g, identity_channel()) / free_max_payoff(g, cl);
  InputOutputGame scaled = g;
  for (auto& w : scaled.blocks[0].rewards) w *= 3.5;
  double r2 = payoff(scaled, identity_channel()) /
              optimize_over_free_set(game_operators(scaled), cl, true).primal_value;
  CHECK(std::abs(r1 - r2) < 1e-8);
}

TEST_CASE("robustness monotonicity under free mixing") {
  ConicFreeSet cl = compile_classical_channels(2, 2);
  RobustnessReport base = robustness(identity_channel(), cl);
  REQUIRE(base.status == SolveStatus::Optimal);
  Povm z({CMat(0.5 * (CMat::Identity(2, 2) + pauli_z())),
          CMat(0.5 * (CMat::Identity(2, 2) - pauli_z()))});
  CMat jfree = make_classical_channel(z).choi().mat();
  CMat jid = make_identity_channel(2).choi().mat();
  for (double s : {0.1, 1.0, 10.0}) {
    CMat mix = (jid + s * jfree) / (1.0 + s);
    ChoiCollection c = as_collection(
        ChannelCollection{{ChoiChannel(ComplexMatrix(mix, {2, 2}, {"in", "out"}))}});
    RobustnessReport rep = robustness(c, cl);
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK(rep.robustness <= base.robustness + 1e-6);
  }
}

TEST_CASE("discrimination form") {
  ChoiCollection id = identity_channel();

  // Identity-indicator game: N = sum tr sigma, reconstruction exact.
  InputOutputGame g = identity_indicator_game();
  DiscriminationForm d = discrimination_form(g, id);
  CHECK(d.normalization == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(d.reconstruction_residual < 1e-10);
  CHECK(d.payoff_value == doctest::Approx(payoff(g, id)).epsilon(1e-10));

  // All-zero rewards: empty ensemble, zero payoff.
  InputOutputGame z = identity_indicator_game();
  z.blocks[0].rewards = {0.0, 0.0};
  DiscriminationForm dz = discrimination_form(z, id);
  CHECK(dz.normalization == doctest::Approx(0.0));
  CHECK(dz.payoff_value == doctest::Approx(0.0));

  // Negative rewards are rejected.
  InputOutputGame neg = identity_indicator_game();
  neg.blocks[0].rewards = {1.0, -0.5};
  CHECK_THROWS(discrimination_form(neg, id));
}

TEST_CASE("witness exactness as an affine payoff identity") {
  ConicFreeSet cl = compile_classical_channels(2, 2);
  RobustnessReport rob = robustness(identity_channel(), cl);
  REQUIRE(rob.status == SolveStatus::Optimal);
  InputOutputGame g = canonicalize(game_from_witness(rob.witness, identity_channel()));
  for (unsigned seed : {31u, 32u, 33u}) {
    ChoiCollection c = as_collection(ChannelCollection{{random_channel(2, 2, 4, seed)}});
    double raw = (rob.witness.blocks[0].adjoint() * c.block(0).m.mat()).trace().real();
    double expect = (raw - g.canonical.shift) / g.canonical.scale;
    CHECK(std::abs(payoff(g, c) - expect) < 1e-9);
  }
}
