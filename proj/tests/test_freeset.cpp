#include <doctest.h>

#include <unsupported/Eigen/KroneckerProduct>

#include "iogames/solver.hpp"

using namespace iogames;

namespace {

CMat max_entangled_choi() {
  CMat phi = CMat::Zero(4, 4);
  phi(0, 0) = phi(0, 3) = phi(3, 0) = phi(3, 3) = 0.5;
  return phi;
}

ChoiCollection identity_channel() {
  return as_collection(ChannelCollection{{make_identity_channel(2)}});
}

ChoiCollection depolarizing(double p) {
  return as_collection(ChannelCollection{{make_depolarizing(p)}});
}

ChoiCollection xz_povm_channels(double eta) {
  return as_collection(povms_to_channels(make_noisy_xz_povms(eta)));
}

// Channels whose Choi must annihilate the maximally entangled projector;
// the zero overlap admits no strictly feasible point.
ConicFreeSet rank_one_pinned_set() {
  ConicFreeSet set;
  set.label = "tr[JP]=0";
  set.object_kind = ObjectKind::Channels;
  set.n_settings = 1;
  set.candidate_blocks.push_back({BlockKey{0, -1}, {2, 2}, {"in", "out"}, 4});
  FreeSetBuilder b(std::move(set));
  CMat p = max_entangled_choi();
  b.add_operator_equality(2,
                          {{FreeSetBuilder::Slot::Candidate, 0,
                            [](const CMat& e) {
                              return CMat(embed_at(e, {2}, {0}, {2, 2}));
                            }}},
                          CMat(CMat::Identity(2, 2) / 2));
  b.add_operator_equality(1, {{FreeSetBuilder::Slot::Candidate, 0, [p](const CMat& e) {
                                 return CMat(e(0, 0).real() * p);
                               }}});
  ConicFreeSet out = std::move(b).take();
  FreeAssignment sl;
  sl.candidate.push_back(CMat::Identity(4, 4) / 4);
  out.slater_point = std::move(sl);
  return out;
}

// Channels with <phi|J|phi> <= 0.6 alpha; robustness of the identity
// channel against it is exactly 2/3 (scale alpha until 0.6 alpha reaches
// the unit overlap, with an explicit PSD slack construction).
ConicFreeSet capped_overlap_set() {
  ConicFreeSet set;
  set.label = "overlap<=0.6";
  set.object_kind = ObjectKind::Channels;
  set.n_settings = 1;
  set.candidate_blocks.push_back({BlockKey{0, -1}, {2, 2}, {"in", "out"}, 4});
  FreeSetBuilder b(std::move(set));
  b.add_operator_equality(2,
                          {{FreeSetBuilder::Slot::Candidate, 0,
                            [](const CMat& e) {
                              return CMat(embed_at(e, {2}, {0}, {2, 2}));
                            }}},
                          CMat(CMat::Identity(2, 2) / 2));
  ConicFreeSet out = std::move(b).take();
  CMat p = max_entangled_choi();
  FreeSetRow ineq;
  ineq.cand.emplace_back(0, p);
  ineq.alpha = -0.6;
  out.inequality_rows.push_back(std::move(ineq));
  FreeAssignment sl;
  sl.candidate.push_back(CMat::Identity(4, 4) / 4);
  out.slater_point = std::move(sl);
  return out;
}

}  // namespace

TEST_CASE("slater points of every compiled set") {
  CHECK(slater_check(compile_all_channels(1, 2, 2)));
  CHECK(slater_check(compile_classical_channels(2, 2)));
  CHECK(slater_check(compile_entanglement_breaking_ppt(2, 2)));
  CHECK(slater_check(compile_compatible_channels(2, 2, 2)));
  CHECK(slater_check(compile_jointly_measurable({2, 2}, 2)));
  CHECK(slater_check(compile_compatible_instruments({2, 2}, 2, 2)));
  CHECK(slater_check(compile_all_instruments({2, 2}, 2, 2)));
  CMat eye = CMat::Identity(2, 2);
  CHECK(slater_check(compile_g_covariant(2, {eye, pauli_x(), pauli_y(), pauli_z()})));
  CHECK_FALSE(slater_check(rank_one_pinned_set()));
}

TEST_CASE("cone and convexity properties of compiled sets") {
  for (const auto& set :
       {compile_classical_channels(2, 2), compile_entanglement_breaking_ppt(2, 2),
        compile_jointly_measurable({2, 2}, 2)}) {
    REQUIRE(set.slater_point.has_value());
    const FreeAssignment& pt = *set.slater_point;
    for (double t : {0.0, 0.5, 2.0}) {
      FreeAssignment scaled = pt;
      for (auto& c : scaled.candidate) c *= t;
      for (auto& a : scaled.aux) a *= t;
      scaled.alpha = pt.alpha * t;
      CHECK(set.row_residual(scaled) < 1e-9);
    }
  }
}

TEST_CASE("membership: entanglement-breaking PPT surrogate") {
  ConicFreeSet eb = compile_entanglement_breaking_ppt(2, 2);
  CHECK(!eb.flags.empty());

  MembershipCertificate in = membership(depolarizing(0.2), eb);
  CHECK(in.is_member);
  CHECK(in.feasible_residual < 1e-6);

  // Direct PPT eigenvalue oracle agrees just below the 1/3 boundary.
  MembershipCertificate edge = membership(depolarizing(1.0 / 3.0 - 1e-3), eb);
  CHECK(edge.is_member);
  {
    ComplexMatrix j = depolarizing(1.0 / 3.0 - 1e-3).block(0).m;
    CHECK(min_eigenvalue(partial_transpose(j, 1).mat()) > -1e-12);
  }

  MembershipCertificate out = membership(identity_channel(), eb);
  CHECK_FALSE(out.is_member);
  CHECK(out.witness_value > 1.0 + 1e-6);
  CHECK(out.witness_max_over_free <= 1.0 + 1e-6);

  // Classical channels are measure-and-prepare, hence PPT members.
  Povm z({CMat(0.5 * (CMat::Identity(2, 2) + pauli_z())),
          CMat(0.5 * (CMat::Identity(2, 2) - pauli_z()))});
  ChoiCollection cz = as_collection(ChannelCollection{{make_classical_channel(z)}});
  CHECK(membership(cz, eb).is_member);
}

TEST_CASE("robustness: identity vs classical channels is exactly one") {
  // Dual witness c|phi+><phi+| with c = 2 and the matching primal
  // construction give 1 + R = 2 for a qubit.
  ConicFreeSet cl = compile_classical_channels(2, 2);
  RobustnessReport rep = robustness(identity_channel(), cl);
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(std::abs(rep.robustness - 1.0) < 1e-6);
  CHECK(rep.gap <= 1e-7);
  CHECK(rep.witness.verified);
  CHECK(std::abs(rep.witness.value - 2.0) < 1e-6);
  CHECK(rep.witness.max_over_free <= 1.0 + 1e-6);
  CHECK(rep.witness.min_eig >= -1e-9);
  // Optimal noise reconstructs to a valid channel.
  CHECK(rep.noise_residual < 1e-7);
}

TEST_CASE("membership: classical channels") {
  ConicFreeSet cl = compile_classical_channels(2, 2);
  CHECK_FALSE(membership(identity_channel(), cl).is_member);
  CHECK(membership(depolarizing(0.0), cl).is_member);
}

TEST_CASE("membership: joint measurability thresholds") {
  ConicFreeSet jm = compile_jointly_measurable({2, 2}, 2);

  // The same sharp measurement twice is trivially compatible.
  auto povms = make_noisy_xz_povms(1.0);
  ChoiCollection xx = as_collection(povms_to_channels({povms[0], povms[0]}));
  CHECK(membership(xx, jm).is_member);

  CHECK_FALSE(membership(xz_povm_channels(1.0), jm).is_member);
  CHECK(membership(xz_povm_channels(0.5), jm).is_member);
  CHECK(membership(xz_povm_channels(0.9), jm).is_member == false);

  // Upper bound on the sharp-pair robustness from trivial-POVM noise:
  // visibility 1/(1+t) reaches 1/sqrt(2) at t = sqrt(2) - 1.
  RobustnessReport rep = robustness(xz_povm_channels(1.0), jm);
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(rep.robustness > 0.1);
  CHECK(rep.robustness <= std::sqrt(2.0) - 1.0 + 1e-6);
  CHECK(rep.witness.verified);
}

TEST_CASE("membership: compatible channels") {
  ConicFreeSet cc = compile_compatible_channels(2, 2, 2);

  ChoiCollection dd = as_collection(
      ChannelCollection{{make_depolarizing(0.0), make_depolarizing(0.0)}});
  CHECK(membership(dd, cc).is_member);

  // No-cloning: two perfect copies of the identity are incompatible.
  ChoiCollection idid = as_collection(
      ChannelCollection{{make_identity_channel(2), make_identity_channel(2)}});
  MembershipCertificate nc = membership(idid, cc);
  CHECK_FALSE(nc.is_member);
  CHECK(nc.witness_value > 1.0 + 1e-6);

  // Measure-and-prepare channels broadcast: measure once, prepare twice.
  Povm z({CMat(0.5 * (CMat::Identity(2, 2) + pauli_z())),
          CMat(0.5 * (CMat::Identity(2, 2) - pauli_z()))});
  ChoiChannel mp = make_classical_channel(z);
  ChoiCollection mpmp = as_collection(ChannelCollection{{mp, mp}});
  CHECK(membership(mpmp, cc).is_member);
}

TEST_CASE("membership: compatible instruments") {
  ConicFreeSet ci = compile_compatible_instruments({2, 2}, 2, 2);

  auto sharp = make_luders_instruments(make_noisy_xz_povms(1.0));
  InstrumentCollection same{{sharp.blocks[0], sharp.blocks[0]}};
  CHECK(membership(as_collection(same), ci).is_member);

  CHECK_FALSE(membership(as_collection(sharp), ci).is_member);

  // Post-processings of a parent instrument are members by construction.
  CHECK(membership(as_collection(make_parent_luders_instruments(0.3)), ci).is_member);
}

TEST_CASE("membership: G-covariant channels") {
  CMat eye = CMat::Identity(2, 2);
  ConicFreeSet pauli = compile_g_covariant(2, {eye, pauli_x(), pauli_y(), pauli_z()});
  for (double p : {0.1, 0.6, 1.0}) CHECK(membership(depolarizing(p), pauli).is_member);

  // With a trivial group every channel is free.
  ConicFreeSet trivial = compile_g_covariant(2, {eye});
  CHECK(membership(identity_channel(), trivial).is_member);

  ConicFreeSet zcov = compile_g_covariant(2, {eye, pauli_z()});
  CMat h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  ChoiCollection had = as_collection(ChannelCollection{{make_unitary_channel(h)}});
  CHECK_FALSE(membership(had, zcov).is_member);
  // Direct commutator residual of the Hadamard Choi with conj(Z) (x) Z.
  CMat v = Eigen::kroneckerProduct(pauli_z().conjugate().eval(), pauli_z()).eval();
  CMat comm = v * had.block(0).m.mat() * v.adjoint() - had.block(0).m.mat();
  CHECK(comm.norm() > 0.1);

  // A rotation that does not close under multiplication is rejected.
  CMat rot(2, 2);
  rot << Complex(std::cos(0.3), 0), Complex(-std::sin(0.3), 0), Complex(std::sin(0.3), 0),
      Complex(std::cos(0.3), 0);
  CHECK_THROWS(compile_g_covariant(2, std::vector<CMat>{eye, rot}));
}

TEST_CASE("covariance convention: members commute as channels") {
  // Members of the compiled commutant set are covariant in the channel
  // picture: Lambda(U rho U^dag) = U Lambda(rho) U^dag.
  ChoiChannel dep = make_depolarizing(0.55);
  for (const CMat& u : {pauli_x(), pauli_z()}) {
    for (unsigned rep = 0; rep < 5; ++rep) {
      CMat rho = random_density(2, 700 + rep);
      DensityMatrix r1(CMat(u * rho * u.adjoint()));
      CMat lhs = apply_channel(dep, r1).mat();
      CMat rhs = u * apply_channel(dep, DensityMatrix(rho)).mat() * u.adjoint();
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("robustness against an inequality-constrained set") {
  ConicFreeSet capped = capped_overlap_set();
  CHECK(slater_check(capped));
  RobustnessReport rep = robustness(identity_channel(), capped);
  REQUIRE(rep.status == SolveStatus::Optimal);
  CHECK(std::abs(rep.robustness - 2.0 / 3.0) < 1e-6);
}

TEST_CASE("membership consistency with robustness across the corpus") {
  struct Case {
    ChoiCollection obj;
    ConicFreeSet set;
    bool member;
  };
  std::vector<Case> corpus;
  corpus.push_back({depolarizing(0.2), compile_entanglement_breaking_ppt(2, 2), true});
  corpus.push_back({identity_channel(), compile_entanglement_breaking_ppt(2, 2), false});
  corpus.push_back({identity_channel(), compile_classical_channels(2, 2), false});
  corpus.push_back({depolarizing(0.0), compile_classical_channels(2, 2), true});
  corpus.push_back({xz_povm_channels(0.5), compile_jointly_measurable({2, 2}, 2), true});
  corpus.push_back({xz_povm_channels(1.0), compile_jointly_measurable({2, 2}, 2), false});

  for (const auto& c : corpus) {
    RobustnessReport rep = robustness(c.obj, c.set);
    REQUIRE(rep.status == SolveStatus::Optimal);
    CHECK((rep.robustness <= 1e-6) == c.member);
    CHECK(membership(c.obj, c.set).is_member == c.member);
  }
}
