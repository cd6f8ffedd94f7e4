#include <doctest.h>

#include <random>

#include "iogames/objects.hpp"

using namespace iogames;

namespace {

CMat apply_kraus(const std::vector<CMat>& kraus, const CMat& rho) {
  CMat out = CMat::Zero(kraus.front().rows(), kraus.front().rows());
  for (const auto& k : kraus) out += k * rho * k.adjoint();
  return out;
}

std::vector<CMat> random_kraus(int d_in, int d_out, int n_kraus, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CMat m(n_kraus * d_out, d_in);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<CMat> qr(m);
  CMat q = CMat(qr.householderQ()).leftCols(d_in);
  std::vector<CMat> kraus;
  for (int k = 0; k < n_kraus; ++k) kraus.push_back(q.middleRows(k * d_out, d_out));
  return kraus;
}

}  // namespace

TEST_CASE("channel_to_choi identity and depolarizing") {
  ChoiChannel id = make_identity_channel(2);
  CMat phi = CMat::Zero(4, 4);
  phi(0, 0) = phi(0, 3) = phi(3, 0) = phi(3, 3) = 0.5;
  CHECK((id.choi().mat() - phi).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(id.choi().mat().trace().real() - 1.0) < 1e-14);

  ChoiChannel dep = make_depolarizing(0.0);
  CHECK((dep.choi().mat() - CMat::Identity(4, 4) / 4).cwiseAbs().maxCoeff() < 1e-14);

  ChoiChannel dep1 = make_depolarizing(1.0);
  CHECK((dep1.choi().mat() - phi).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("channel_to_choi rejects non-trace-preserving Kraus") {
  CMat half = 0.5 * CMat::Identity(2, 2);
  CHECK_THROWS(channel_to_choi({half}));
}

TEST_CASE("apply_channel basics") {
  DensityMatrix rho(random_density(2, 5));
  ChoiChannel id = make_identity_channel(2);
  CHECK((apply_channel(id, rho).mat() - rho.mat()).cwiseAbs().maxCoeff() < 1e-12);

  ChoiChannel dep = make_depolarizing(0.0);
  CHECK((apply_channel(dep, rho).mat() - CMat::Identity(2, 2) / 2).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("Choi round trip matches Kraus application") {
  for (int d_in : {2, 3}) {
    for (int d_out : {2, 3}) {
      for (unsigned rep = 0; rep < 50; ++rep) {
        unsigned seed = 1000 + 100 * d_in + 10 * d_out + rep;
        auto kraus = random_kraus(d_in, d_out, 2, seed);
        ChoiChannel c = channel_to_choi(kraus);
        CMat rho = random_density(d_in, seed + 1);
        CMat via_choi = apply_choi_block(c.choi(), rho);
        CMat direct = apply_kraus(kraus, rho);
        CHECK((via_choi - direct).cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }
}

TEST_CASE("choi_pairing matches direct evaluation") {
  auto kraus = random_kraus(2, 2, 3, 77);
  ChoiChannel c = channel_to_choi(kraus);
  for (unsigned rep = 0; rep < 10; ++rep) {
    CMat rho = random_density(2, 200 + rep);
    CMat eff = random_hermitian(2, 300 + rep);
    double direct = (apply_kraus(kraus, rho) * eff).trace().real();
    CHECK(std::abs(choi_pairing(c.choi(), rho, eff) - direct) < 1e-10);
  }
}

TEST_CASE("classical channel from a sigma_z measurement is diagonal") {
  Povm z({CMat(0.5 * (CMat::Identity(2, 2) + pauli_z())),
          CMat(0.5 * (CMat::Identity(2, 2) - pauli_z()))});
  ChoiChannel c = make_classical_channel(z);
  // Product-basis off-diagonal entries vanish.
  const CMat& j = c.choi().mat();
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col)
      if (r % 2 != col % 2) CHECK(std::abs(j(r, col)) < 1e-14);
  // And the channel reproduces the measure-and-prepare rule.
  CMat rho = random_density(2, 31);
  CMat out = apply_choi_block(c.choi(), rho);
  for (int a = 0; a < 2; ++a) {
    double expect = (z.effects()[static_cast<size_t>(a)] * rho).trace().real();
    CHECK(std::abs(out(a, a).real() - expect) < 1e-12);
  }
}

TEST_CASE("noisy X/Z POVMs") {
  auto povms = make_noisy_xz_povms(0.0);
  for (const auto& p : povms)
    for (const auto& e : p.effects())
      CHECK((e - 0.5 * CMat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS(make_noisy_xz_povms(1.5));

  // Parent POVM reproduces the pair below the compatibility threshold.
  double eta = 0.6;
  Povm parent = make_xz_parent_povm(eta);
  auto pair = make_noisy_xz_povms(eta);
  CMat gx = parent.effects()[0] + parent.effects()[1];  // lambda = (+,t)
  CHECK((gx - pair[0].effects()[0]).cwiseAbs().maxCoeff() < 1e-14);
  CMat gz = parent.effects()[0] + parent.effects()[2];  // lambda = (s,+)
  CHECK((gz - pair[1].effects()[0]).cwiseAbs().maxCoeff() < 1e-14);

  // Above the threshold the parent stops being positive semidefinite.
  CHECK_THROWS(make_xz_parent_povm(0.9));
}

TEST_CASE("Luders instruments sum to a valid channel") {
  auto inst = make_luders_instruments(make_noisy_xz_povms(1.0));
  ValidityReport rep = validate(as_collection(inst));
  CHECK(rep.pass);

  // Outcome statistics reproduce the POVM probabilities.
  auto povms = make_noisy_xz_povms(1.0);
  CMat rho = random_density(2, 41);
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 2; ++a) {
      CMat out = apply_choi_block(inst.blocks[static_cast<size_t>(x)][static_cast<size_t>(a)], rho);
      double expect =
          (povms[static_cast<size_t>(x)].effects()[static_cast<size_t>(a)] * rho).trace().real();
      CHECK(std::abs(out.trace().real() - expect) < 1e-12);
    }
}

TEST_CASE("parent-constructed instruments validate") {
  auto inst = make_parent_luders_instruments(0.3);
  CHECK(validate(as_collection(inst)).pass);
}

TEST_CASE("validate flags a perturbed Choi marginal") {
  CMat phi = CMat::Zero(4, 4);
  phi(0, 0) = phi(0, 3) = phi(3, 0) = phi(3, 3) = 0.5;
  phi(0, 0) += 1e-3;
  ChoiCollection c;
  c.kind = ObjectKind::Channels;
  c.n_settings = 1;
  c.blocks.push_back({BlockKey{0, -1}, ComplexMatrix(phi, {2, 2}, {"in", "out"})});
  ValidityReport rep = validate(c);
  CHECK(!rep.pass);
  bool marginal_failed = false;
  for (const auto& chk : rep.checks)
    if (chk.name.find("marginal") != std::string::npos && !chk.pass) marginal_failed = true;
  CHECK(marginal_failed);
}

TEST_CASE("validate accepts the depolarizing fixture") {
  ChannelCollection cc{{make_depolarizing(0.37)}};
  CHECK(validate(as_collection(cc)).pass);
}

TEST_CASE("standard_object tags") {
  ChoiCollection dep = standard_object("depolarizing", {{"p", 1.0}});
  CMat phi = CMat::Zero(4, 4);
  phi(0, 0) = phi(0, 3) = phi(3, 0) = phi(3, 3) = 0.5;
  CHECK((dep.block(0).m.mat() - phi).cwiseAbs().maxCoeff() < 1e-14);

  CHECK(standard_object("identity_pair", {}).n_blocks() == 2);
  CHECK(standard_object("noisy_xz_povms", {{"eta", 0.5}}).n_blocks() == 2);
  CHECK(standard_object("luders_xz_instruments", {{"eta", 1.0}}).n_blocks() == 4);
  CHECK_THROWS(standard_object("no_such_tag", {}));
  CHECK_THROWS(standard_object("depolarizing", {{"p", 2.0}}));
}

TEST_CASE("random channels validate across dimensions") {
  for (int d_in : {2, 3})
    for (int d_out : {2, 3}) {
      ChoiChannel c = random_channel(d_in, d_out, d_in * d_out, 600u + d_in + 10 * d_out);
      ChannelCollection cc{{c}};
      CHECK(validate(as_collection(cc)).pass);
    }
}
