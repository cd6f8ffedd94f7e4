#include "iogames/objects.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "iogames/supermaps.hpp"

namespace iogames {

namespace {

CMat matrix_sqrt_psd(const CMat& m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m));
  CMat d = CMat::Zero(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    d(i, i) = std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  return es.eigenvectors() * d * es.eigenvectors().adjoint();
}

// Unnormalized maximally entangled operator sum_ij |ii><jj| on d x d.
CMat omega(int d) {
  CMat w = CMat::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) w(i * d + i, j * d + j) = 1.0;
  return w;
}

double param(const std::map<std::string, double>& params, const std::string& key,
             double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

DensityMatrix::DensityMatrix(CMat rho, double tol) : rho_(std::move(rho)) {
  if (rho_.rows() != rho_.cols()) throw std::invalid_argument("state must be square");
  if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("state must be Hermitian");
  if (std::abs(rho_.trace().real() - 1.0) > tol)
    throw std::invalid_argument("state must have unit trace");
  if (min_eigenvalue(rho_) < -tol)
    throw std::invalid_argument("state must be positive semidefinite");
}

Povm::Povm(std::vector<CMat> effects, double tol) : effects_(std::move(effects)) {
  if (effects_.empty()) throw std::invalid_argument("POVM needs at least one effect");
  const auto n = effects_.front().rows();
  CMat sum = CMat::Zero(n, n);
  for (const auto& e : effects_) {
    if (e.rows() != n || e.cols() != n)
      throw std::invalid_argument("POVM effects must share dimensions");
    if (min_eigenvalue(e) < -tol)
      throw std::invalid_argument("POVM effect not positive semidefinite");
    sum += e;
  }
  if ((sum - CMat::Identity(n, n)).cwiseAbs().maxCoeff() > tol)
    throw std::invalid_argument("POVM effects must sum to identity");
}

ChoiChannel::ChoiChannel(ComplexMatrix j, double tol) : j_(std::move(j)) {
  if (j_.num_factors() != 2)
    throw std::invalid_argument("channel Choi must have (in, out) factors");
  j_.require_hermitian(1e-9);
  if (std::abs(j_.mat().trace().real() - 1.0) > tol)
    throw std::invalid_argument("channel Choi must have unit trace");
  if (min_eigenvalue(j_.mat()) < -tol)
    throw std::invalid_argument("channel Choi must be positive semidefinite");
  ComplexMatrix marg = partial_trace(j_, {0});
  double r = (marg.mat() - CMat::Identity(d_in(), d_in()) / d_in()).cwiseAbs().maxCoeff();
  if (r > std::max(tol, tolerance::solver))
    throw std::invalid_argument("channel Choi must have maximally mixed input marginal");
  if (j_.labels().empty()) j_ = j_.with_labels({"in", "out"});
}

ComplexMatrix cp_choi_block(const std::vector<CMat>& kraus, int d_in, int d_out) {
  if (kraus.empty()) throw std::invalid_argument("empty Kraus set");
  CMat w = omega(d_in);
  CMat j = CMat::Zero(d_in * d_out, d_in * d_out);
  CMat eye = CMat::Identity(d_in, d_in);
  for (const auto& k : kraus) {
    if (k.rows() != d_out || k.cols() != d_in)
      throw std::invalid_argument("Kraus operator has wrong shape");
    CMat ik = Eigen::kroneckerProduct(eye, k);
    j += ik * w * ik.adjoint();
  }
  j /= static_cast<double>(d_in);
  return ComplexMatrix(std::move(j), {d_in, d_out}, {"in", "out"});
}

ChoiChannel channel_to_choi(const std::vector<CMat>& kraus) {
  if (kraus.empty()) throw std::invalid_argument("empty Kraus set");
  const int d_in = static_cast<int>(kraus.front().cols());
  const int d_out = static_cast<int>(kraus.front().rows());
  CMat sum = CMat::Zero(d_in, d_in);
  for (const auto& k : kraus) sum += k.adjoint() * k;
  if ((sum - CMat::Identity(d_in, d_in)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("Kraus set is not trace preserving");
  return ChoiChannel(cp_choi_block(kraus, d_in, d_out));
}

CMat apply_choi_block(const ComplexMatrix& j, const CMat& rho) {
  const int d_in = j.factor_dim(0);
  const int d_out = j.factor_dim(1);
  if (rho.rows() != d_in) throw std::invalid_argument("state dimension mismatch");
  CMat lifted = Eigen::kroneckerProduct(rho.transpose(), CMat::Identity(d_out, d_out));
  ComplexMatrix prod(CMat(lifted * j.mat()), {d_in, d_out});
  return static_cast<double>(d_in) * partial_trace(prod, {1}).mat();
}

DensityMatrix apply_channel(const ChoiChannel& c, const DensityMatrix& rho) {
  return DensityMatrix(apply_choi_block(c.choi(), rho.mat()), 1e-8);
}

double choi_pairing(const ComplexMatrix& j, const CMat& rho, const CMat& effect) {
  const int d_in = j.factor_dim(0);
  CMat probe = Eigen::kroneckerProduct(rho.transpose(), effect);
  return static_cast<double>(d_in) * (j.mat() * probe).trace().real();
}

std::string to_string(ObjectKind k) {
  switch (k) {
    case ObjectKind::Channels: return "channels";
    case ObjectKind::Instruments: return "instruments";
    case ObjectKind::Processes: return "processes";
    case ObjectKind::Testers: return "testers";
  }
  return "?";
}

std::string BlockKey::str() const {
  std::ostringstream os;
  if (a >= 0)
    os << "a=" << a << "|x=" << x;
  else
    os << "x=" << x;
  return os.str();
}

ProcessMatrix::ProcessMatrix(ComplexMatrix w, double tol) : w_(std::move(w)) {
  if (w_.num_factors() != 6 || w_.labels() != factor_labels())
    throw std::invalid_argument("process matrix needs factors (I0,I1,O1,I2,O2,O0)");
  w_.require_hermitian(1e-9);
  if (std::abs(w_.mat().trace().real() - 1.0) > tol)
    throw std::invalid_argument("process matrix must have unit trace");
  if (min_eigenvalue(w_.mat()) < -tol)
    throw std::invalid_argument("process matrix must be positive semidefinite");
}

std::vector<std::string> ProcessMatrix::factor_labels() {
  return {"I0", "I1", "O1", "I2", "O2", "O0"};
}

ChoiCollection as_collection(const ChannelCollection& c) {
  ChoiCollection out;
  out.kind = ObjectKind::Channels;
  out.n_settings = c.size();
  for (int x = 0; x < c.size(); ++x)
    out.blocks.push_back({BlockKey{x, -1}, c.blocks[static_cast<size_t>(x)].choi()});
  return out;
}

ChoiCollection as_collection(const InstrumentCollection& c) {
  ChoiCollection out;
  out.kind = ObjectKind::Instruments;
  out.n_settings = c.n_settings();
  for (int x = 0; x < c.n_settings(); ++x)
    for (int a = 0; a < static_cast<int>(c.blocks[static_cast<size_t>(x)].size()); ++a)
      out.blocks.push_back(
          {BlockKey{x, a}, c.blocks[static_cast<size_t>(x)][static_cast<size_t>(a)]});
  return out;
}

ChoiCollection as_collection(const ProcessMatrix& w) {
  ChoiCollection out;
  out.kind = ObjectKind::Processes;
  out.n_settings = 1;
  out.blocks.push_back({BlockKey{0, -1}, w.mat()});
  return out;
}

ChoiCollection as_collection(const SuperinstrumentCollection& t) {
  ChoiCollection out;
  out.kind = ObjectKind::Testers;
  out.n_settings = t.n_settings();
  for (int x = 0; x < t.n_settings(); ++x)
    for (int a = 0; a < static_cast<int>(t.blocks[static_cast<size_t>(x)].size()); ++a)
      out.blocks.push_back(
          {BlockKey{x, a}, t.blocks[static_cast<size_t>(x)][static_cast<size_t>(a)]});
  return out;
}

std::vector<FactorGroup> factor_groups(ObjectKind kind) {
  if (kind == ObjectKind::Channels || kind == ObjectKind::Instruments)
    return {{GroupRole::Ensemble, {0}}, {GroupRole::Measurement, {1}}};
  return {{GroupRole::Ensemble, {0}},
          {GroupRole::Slot, {1, 2}},
          {GroupRole::Slot, {3, 4}},
          {GroupRole::Measurement, {5}}};
}

void ValidityReport::add(const std::string& name, double residual, double tol) {
  bool ok = residual <= tol;
  checks.push_back({name, residual, tol, ok});
  pass = pass && ok;
}

std::string ValidityReport::summary() const {
  std::ostringstream os;
  for (const auto& c : checks)
    os << (c.pass ? "  ok  " : " FAIL ") << c.name << "  residual=" << c.residual
       << "  tol=" << c.tol << "\n";
  return os.str();
}

namespace {

void validate_channel_block(const ComplexMatrix& j, const std::string& prefix,
                            ValidityReport& rep, double trace_target = 1.0) {
  rep.add(prefix + " hermitian", (j.mat() - j.mat().adjoint()).cwiseAbs().maxCoeff(), 1e-9);
  rep.add(prefix + " psd", std::max(0.0, -min_eigenvalue(j.mat())), 1e-9);
  rep.add(prefix + " trace", std::abs(j.mat().trace().real() - trace_target), 1e-8);
  const int d_in = j.factor_dim(0);
  CMat marg = partial_trace(j, {0}).mat();
  rep.add(prefix + " input marginal",
          (marg - trace_target * CMat::Identity(d_in, d_in) / d_in).cwiseAbs().maxCoeff(),
          tolerance::solver);
}

}  // namespace

ValidityReport validate(const ChoiCollection& obj) {
  ValidityReport rep;
  switch (obj.kind) {
    case ObjectKind::Channels: {
      for (const auto& b : obj.blocks) validate_channel_block(b.m, b.key.str(), rep);
      break;
    }
    case ObjectKind::Instruments: {
      std::map<int, ComplexMatrix> sums;
      for (const auto& b : obj.blocks) {
        rep.add(b.key.str() + " psd", std::max(0.0, -min_eigenvalue(b.m.mat())), 1e-9);
        auto it = sums.find(b.key.x);
        if (it == sums.end())
          sums.emplace(b.key.x, b.m);
        else
          it->second.mat() += b.m.mat();
      }
      for (auto& [x, sum] : sums)
        validate_channel_block(sum, "x=" + std::to_string(x) + " sum", rep);
      break;
    }
    case ObjectKind::Processes: {
      for (const auto& b : obj.blocks) {
        rep.add("psd", std::max(0.0, -min_eigenvalue(b.m.mat())), 1e-9);
        rep.add("trace", std::abs(b.m.mat().trace().real() - 1.0), 1e-8);
        ComplexMatrix proj = validity_project(b.m);
        rep.add("validity subspace", (proj.mat() - b.m.mat()).norm(), tolerance::solver);
      }
      break;
    }
    case ObjectKind::Testers: {
      std::map<int, ComplexMatrix> sums;
      for (const auto& b : obj.blocks) {
        rep.add(b.key.str() + " psd", std::max(0.0, -min_eigenvalue(b.m.mat())), 1e-9);
        auto it = sums.find(b.key.x);
        if (it == sums.end())
          sums.emplace(b.key.x, b.m);
        else
          it->second.mat() += b.m.mat();
      }
      for (auto& [x, sum] : sums) {
        std::string prefix = "x=" + std::to_string(x) + " sum";
        rep.add(prefix + " trace", std::abs(sum.mat().trace().real() - 1.0), 1e-8);
        ComplexMatrix proj = validity_project(sum);
        rep.add(prefix + " validity", (proj.mat() - sum.mat()).norm(), tolerance::solver);
        ComplexMatrix comb = comb_project(sum, CombOrder::Slot1First);
        rep.add(prefix + " comb", (comb.mat() - sum.mat()).norm(), tolerance::solver);
      }
      break;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------
// Fixtures

ChoiChannel make_identity_channel(int d) {
  return channel_to_choi({CMat::Identity(d, d)});
}

ChoiChannel make_depolarizing(double p, int d) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("depolarizing weight must be in [0,1]");
  CMat jid = cp_choi_block({CMat::Identity(d, d)}, d, d).mat();
  CMat jmix = CMat::Identity(d * d, d * d) / static_cast<double>(d * d);
  return ChoiChannel(ComplexMatrix(p * jid + (1.0 - p) * jmix, {d, d}, {"in", "out"}));
}

ChoiChannel make_unitary_channel(const CMat& u) { return channel_to_choi({u}); }

ChoiChannel make_classical_channel(const Povm& povm, const CMat& basis) {
  const int d = povm.dim();
  const int n = povm.n_outcomes();
  CMat b = basis;
  if (b.size() == 0) b = CMat::Identity(n, n);
  if (b.rows() != n || b.cols() != n)
    throw std::invalid_argument("basis must be n x n for an n-outcome POVM");
  if ((b.adjoint() * b - CMat::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("basis is not orthonormal");
  CMat j = CMat::Zero(d * n, d * n);
  for (int a = 0; a < n; ++a) {
    CMat proj = b.col(a) * b.col(a).adjoint();
    j += Eigen::kroneckerProduct(povm.effects()[static_cast<size_t>(a)].transpose().eval(),
                                 proj);
  }
  j /= static_cast<double>(d);
  return ChoiChannel(ComplexMatrix(std::move(j), {d, n}, {"in", "out"}));
}

std::vector<Povm> make_noisy_xz_povms(double eta) {
  if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("visibility must be in [0,1]");
  CMat eye = CMat::Identity(2, 2);
  std::vector<Povm> out;
  out.emplace_back(std::vector<CMat>{0.5 * (eye + eta * pauli_x()),
                                     0.5 * (eye - eta * pauli_x())});
  out.emplace_back(std::vector<CMat>{0.5 * (eye + eta * pauli_z()),
                                     0.5 * (eye - eta * pauli_z())});
  return out;
}

Povm make_xz_parent_povm(double eta) {
  CMat eye = CMat::Identity(2, 2);
  std::vector<CMat> effects;
  for (int s : {+1, -1})
    for (int t : {+1, -1})
      effects.push_back(0.25 * (eye + s * eta * pauli_x() + t * eta * pauli_z()));
  return Povm(std::move(effects));
}

InstrumentCollection make_luders_instruments(const std::vector<Povm>& povms) {
  InstrumentCollection out;
  for (const auto& povm : povms) {
    std::vector<ComplexMatrix> blocks;
    for (const auto& e : povm.effects())
      blocks.push_back(cp_choi_block({matrix_sqrt_psd(e)}, povm.dim(), povm.dim()));
    out.blocks.push_back(std::move(blocks));
  }
  return out;
}

InstrumentCollection make_parent_luders_instruments(double eta) {
  Povm parent = make_xz_parent_povm(eta);
  std::vector<ComplexMatrix> kblocks;
  for (const auto& g : parent.effects())
    kblocks.push_back(cp_choi_block({matrix_sqrt_psd(g)}, 2, 2));
  // Parent outcomes are ordered (s,t) with s the X label and t the Z
  // label; marginalizing over the other label gives the two instruments.
  InstrumentCollection out;
  std::vector<ComplexMatrix> xblocks{
      ComplexMatrix(CMat(kblocks[0].mat() + kblocks[1].mat()), {2, 2}, {"in", "out"}),
      ComplexMatrix(CMat(kblocks[2].mat() + kblocks[3].mat()), {2, 2}, {"in", "out"})};
  std::vector<ComplexMatrix> zblocks{
      ComplexMatrix(CMat(kblocks[0].mat() + kblocks[2].mat()), {2, 2}, {"in", "out"}),
      ComplexMatrix(CMat(kblocks[1].mat() + kblocks[3].mat()), {2, 2}, {"in", "out"})};
  out.blocks.push_back(std::move(xblocks));
  out.blocks.push_back(std::move(zblocks));
  return out;
}

ChannelCollection povms_to_channels(const std::vector<Povm>& povms) {
  ChannelCollection out;
  for (const auto& p : povms) out.blocks.push_back(make_classical_channel(p));
  return out;
}

ChoiChannel random_channel(int d_in, int d_out, int n_kraus, unsigned seed) {
  if (n_kraus * d_out < d_in)
    throw std::invalid_argument("need n_kraus * d_out >= d_in for an isometry");
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CMat m(n_kraus * d_out, d_in);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<CMat> qr(m);
  CMat q = CMat(qr.householderQ()).leftCols(d_in);
  std::vector<CMat> kraus;
  for (int k = 0; k < n_kraus; ++k) kraus.push_back(q.middleRows(k * d_out, d_out));
  return channel_to_choi(kraus);
}

namespace {

ChoiCollection tester_collection(
    const std::vector<std::vector<std::pair<CMat, CMat>>>& prep_measure) {
  // One tester per setting: prepare sigma on the slot input, measure
  // M_a on the slot output. Block form (sigma (x) M_a^T)/d_out embedded
  // on the six process factors with trivial ends and trivial slot 2.
  SuperinstrumentCollection t;
  std::vector<int> dims{1, 2, 2, 1, 1, 1};
  for (const auto& setting : prep_measure) {
    std::vector<ComplexMatrix> blocks;
    for (const auto& [sigma, effect] : setting) {
      CMat block = Eigen::kroneckerProduct(sigma, effect.transpose().eval()) / 2.0;
      blocks.emplace_back(block, dims, ProcessMatrix::factor_labels());
    }
    t.blocks.push_back(std::move(blocks));
  }
  return as_collection(t);
}

}  // namespace

ChoiCollection standard_object(const std::string& tag,
                               const std::map<std::string, double>& params) {
  const int d = static_cast<int>(param(params, "d", 2));
  const double p = param(params, "p", 1.0);
  const double eta = param(params, "eta", 1.0);
  const unsigned seed = static_cast<unsigned>(param(params, "seed", 1));

  if (tag == "identity") return as_collection(ChannelCollection{{make_identity_channel(d)}});
  if (tag == "depolarizing")
    return as_collection(ChannelCollection{{make_depolarizing(p, d)}});
  if (tag == "hadamard") {
    CMat h(2, 2);
    h << 1, 1, 1, -1;
    h /= std::sqrt(2.0);
    return as_collection(ChannelCollection{{make_unitary_channel(h)}});
  }
  if (tag == "classical_z") {
    Povm z({CMat(0.5 * (CMat::Identity(2, 2) + pauli_z())),
            CMat(0.5 * (CMat::Identity(2, 2) - pauli_z()))});
    return as_collection(ChannelCollection{{make_classical_channel(z)}});
  }
  if (tag == "random_channel") {
    const int d_out = static_cast<int>(param(params, "d_out", d));
    const int n_kraus = static_cast<int>(param(params, "kraus", d * d_out));
    return as_collection(ChannelCollection{{random_channel(d, d_out, n_kraus, seed)}});
  }
  if (tag == "identity_pair")
    return as_collection(
        ChannelCollection{{make_identity_channel(d), make_identity_channel(d)}});
  if (tag == "depolarizing_pair")
    return as_collection(ChannelCollection{{make_depolarizing(p, d), make_depolarizing(p, d)}});
  if (tag == "random_pair")
    return as_collection(ChannelCollection{
        {random_channel(d, d, d * d, seed), random_channel(d, d, d * d, seed + 1)}});
  if (tag == "noisy_xz_povms") return as_collection(povms_to_channels(make_noisy_xz_povms(eta)));
  if (tag == "sharp_xz_povms")
    return as_collection(povms_to_channels(make_noisy_xz_povms(1.0)));
  if (tag == "luders_xz_instruments")
    return as_collection(make_luders_instruments(make_noisy_xz_povms(eta)));
  if (tag == "parent_luders_instruments")
    return as_collection(make_parent_luders_instruments(eta));
  if (tag == "prepare_measure_testers") {
    CMat zero = CMat::Zero(2, 2), plus(2, 2);
    zero(0, 0) = 1.0;
    plus << 0.5, 0.5, 0.5, 0.5;
    CMat minus(2, 2);
    minus << 0.5, -0.5, -0.5, 0.5;
    CMat one = CMat::Zero(2, 2);
    one(1, 1) = 1.0;
    return tester_collection({{{zero, zero}, {zero, one}}, {{plus, plus}, {plus, minus}}});
  }
  if (tag == "shared_tester_pair") {
    CMat zero = CMat::Zero(2, 2), one = CMat::Zero(2, 2);
    zero(0, 0) = 1.0;
    one(1, 1) = 1.0;
    return tester_collection({{{zero, zero}, {zero, one}}, {{zero, zero}, {zero, one}}});
  }
  if (tag == "ocb_process") return as_collection(make_ocb_process());
  if (tag == "circuit_process") return as_collection(make_causally_ordered_fixture(seed));
  if (tag == "maximally_mixed_process") {
    std::vector<int> dims{1, 2, 2, 2, 2, 1};
    int n = 16;
    return as_collection(ProcessMatrix(ComplexMatrix(
        CMat(CMat::Identity(n, n) / n), dims, ProcessMatrix::factor_labels())));
  }
  throw std::invalid_argument("unknown standard object tag: " + tag);
}

}  // namespace iogames
