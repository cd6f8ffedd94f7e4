#include "iogames/linalg.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

namespace iogames {

namespace {

int product(const std::vector<int>& dims) {
  int p = 1;
  for (int d : dims) {
    if (d <= 0) throw std::invalid_argument("factor dimensions must be positive");
    p *= d;
  }
  return p;
}

// Strides of a row-major multi-index: first factor slowest.
std::vector<int> strides(const std::vector<int>& dims) {
  std::vector<int> s(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i)
    s[i] = s[i + 1] * dims[i + 1];
  return s;
}

}  // namespace

ComplexMatrix::ComplexMatrix(CMat m, std::vector<int> dims, std::vector<std::string> labels)
    : mat_(std::move(m)), dims_(std::move(dims)), labels_(std::move(labels)) {
  if (mat_.rows() != mat_.cols()) throw std::invalid_argument("matrix must be square");
  if (product(dims_) != mat_.rows())
    throw std::invalid_argument("product of factor dims must equal matrix order");
  if (!labels_.empty() && labels_.size() != dims_.size())
    throw std::invalid_argument("labels must match factor count");
}

ComplexMatrix::ComplexMatrix(CMat m) : mat_(std::move(m)) {
  if (mat_.rows() != mat_.cols()) throw std::invalid_argument("matrix must be square");
  dims_ = {static_cast<int>(mat_.rows())};
}

int ComplexMatrix::factor_dim(int f) const {
  if (f < 0 || f >= num_factors()) throw std::out_of_range("invalid factor index");
  return dims_[f];
}

int ComplexMatrix::factor_index(const std::string& label) const {
  for (size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return static_cast<int>(i);
  throw std::out_of_range("no factor labeled " + label);
}

bool ComplexMatrix::is_hermitian(double tol) const {
  return (mat_ - mat_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

void ComplexMatrix::require_hermitian(double tol) const {
  if (!is_hermitian(tol)) throw std::invalid_argument("matrix is not Hermitian");
}

ComplexMatrix ComplexMatrix::with_labels(std::vector<std::string> labels) const {
  return ComplexMatrix(mat_, dims_, std::move(labels));
}

ComplexMatrix ComplexMatrix::identity(const std::vector<int>& dims,
                                      std::vector<std::string> labels) {
  int n = product(dims);
  return ComplexMatrix(CMat::Identity(n, n), dims, std::move(labels));
}

ComplexMatrix ComplexMatrix::zero(const std::vector<int>& dims,
                                  std::vector<std::string> labels) {
  int n = product(dims);
  return ComplexMatrix(CMat::Zero(n, n), dims, std::move(labels));
}

ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
  CMat out = Eigen::kroneckerProduct(a.mat(), b.mat());
  std::vector<int> dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  std::vector<std::string> labels;
  if (!a.labels().empty() || !b.labels().empty()) {
    auto la = a.labels().empty() ? std::vector<std::string>(a.num_factors(), "") : a.labels();
    auto lb = b.labels().empty() ? std::vector<std::string>(b.num_factors(), "") : b.labels();
    labels = la;
    labels.insert(labels.end(), lb.begin(), lb.end());
  }
  return ComplexMatrix(std::move(out), std::move(dims), std::move(labels));
}

std::vector<int> complement_factors(int n_factors, const std::vector<int>& keep) {
  std::vector<bool> kept(n_factors, false);
  for (int k : keep) {
    if (k < 0 || k >= n_factors) throw std::out_of_range("invalid factor index");
    kept[k] = true;
  }
  std::vector<int> comp;
  for (int i = 0; i < n_factors; ++i)
    if (!kept[i]) comp.push_back(i);
  return comp;
}

ComplexMatrix partial_trace(const ComplexMatrix& m, const std::vector<int>& keep) {
  const auto& dims = m.dims();
  const int nf = m.num_factors();
  std::vector<int> keep_sorted = keep;
  std::sort(keep_sorted.begin(), keep_sorted.end());
  for (int k : keep_sorted)
    if (k < 0 || k >= nf) throw std::out_of_range("invalid factor index");
  std::vector<int> traced = complement_factors(nf, keep_sorted);

  std::vector<int> kdims, klabels_idx;
  for (int k : keep_sorted) kdims.push_back(dims[k]);
  int dk = product(kdims);
  std::vector<int> tdims;
  for (int t : traced) tdims.push_back(dims[t]);
  int dt = product(tdims);

  auto st = strides(dims);
  auto stk = strides(kdims);
  auto stt = strides(tdims);

  CMat out = CMat::Zero(dk, dk);
  // Row/col composite indices assembled from kept and traced parts.
  for (int rk = 0; rk < dk; ++rk) {
    for (int ck = 0; ck < dk; ++ck) {
      Complex acc = 0.0;
      for (int t = 0; t < dt; ++t) {
        int row = 0, col = 0;
        for (size_t i = 0; i < keep_sorted.size(); ++i) {
          int idx = (rk / stk[i]) % kdims[i];
          row += idx * st[keep_sorted[i]];
          idx = (ck / stk[i]) % kdims[i];
          col += idx * st[keep_sorted[i]];
        }
        for (size_t i = 0; i < traced.size(); ++i) {
          int idx = (t / stt[i]) % tdims[i];
          row += idx * st[traced[i]];
          col += idx * st[traced[i]];
        }
        acc += m.mat()(row, col);
      }
      out(rk, ck) = acc;
    }
  }

  std::vector<std::string> labels;
  if (!m.labels().empty())
    for (int k : keep_sorted) labels.push_back(m.labels()[k]);
  if (kdims.empty()) kdims = {1};
  return ComplexMatrix(std::move(out), std::move(kdims), std::move(labels));
}

ComplexMatrix partial_transpose(const ComplexMatrix& m, int factor) {
  const auto& dims = m.dims();
  if (factor < 0 || factor >= m.num_factors())
    throw std::out_of_range("invalid factor index");
  auto st = strides(dims);
  const int n = m.order();
  const int df = dims[factor];
  const int sf = st[factor];
  CMat out(n, n);
  for (int r = 0; r < n; ++r) {
    int rf = (r / sf) % df;
    int rbase = r - rf * sf;
    for (int c = 0; c < n; ++c) {
      int cf = (c / sf) % df;
      int cbase = c - cf * sf;
      out(rbase + cf * sf, cbase + rf * sf) = m.mat()(r, c);
    }
  }
  return ComplexMatrix(std::move(out), dims, m.labels());
}

HermitianEig hermitian_eig(const ComplexMatrix& m) {
  m.require_hermitian();
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m.mat()));
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

void for_each_hermitian_basis(int d, const std::function<void(const CMat&)>& fn) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CMat e = CMat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    e(i, i) = 1.0;
    fn(e);
    e(i, i) = 0.0;
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      e(i, j) = inv_sqrt2;
      e(j, i) = inv_sqrt2;
      fn(e);
      e(i, j) = Complex(0.0, inv_sqrt2);
      e(j, i) = Complex(0.0, -inv_sqrt2);
      fn(e);
      e(i, j) = 0.0;
      e(j, i) = 0.0;
    }
  }
}

std::vector<SchmidtTerm> operator_schmidt(const ComplexMatrix& m, int n_left_factors) {
  m.require_hermitian();
  const int nf = m.num_factors();
  if (n_left_factors <= 0 || n_left_factors >= nf)
    throw std::invalid_argument("cut must split the factors into two nonempty groups");

  std::vector<int> ldims(m.dims().begin(), m.dims().begin() + n_left_factors);
  std::vector<int> rdims(m.dims().begin() + n_left_factors, m.dims().end());
  const int da = product(ldims);
  const int db = product(rdims);

  // Coefficient matrix of m in an orthonormal Hermitian product basis is
  // real; its SVD yields Hermitian Schmidt factors with nonnegative
  // weights.
  std::vector<CMat> abasis, bbasis;
  abasis.reserve(static_cast<size_t>(da) * da);
  bbasis.reserve(static_cast<size_t>(db) * db);
  for_each_hermitian_basis(da, [&](const CMat& e) { abasis.push_back(e); });
  for_each_hermitian_basis(db, [&](const CMat& e) { bbasis.push_back(e); });

  // Contract the left index block of m with each left basis element:
  // T_i[b,b'] = sum_{a,a'} conj(F_i[a,a']) m[(a,b),(a',b')].
  RMat coeff(da * da, db * db);
  const CMat& M = m.mat();
  for (size_t i = 0; i < abasis.size(); ++i) {
    CMat t = CMat::Zero(db, db);
    const CMat& F = abasis[i];
    for (int a = 0; a < da; ++a)
      for (int ap = 0; ap < da; ++ap) {
        Complex f = std::conj(F(a, ap));
        if (f == Complex(0.0, 0.0)) continue;
        t += f * M.block(a * db, ap * db, db, db);
      }
    for (size_t j = 0; j < bbasis.size(); ++j) {
      Complex c = (bbasis[j].adjoint() * t).trace();
      coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c.real();
    }
  }

  Eigen::JacobiSVD<RMat> svd(coeff, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVec& sv = svd.singularValues();
  double smax = sv.size() > 0 ? sv(0) : 0.0;

  std::vector<SchmidtTerm> terms;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (smax <= 0.0 || sv(k) <= smax * 1e-12) break;
    CMat L = CMat::Zero(da, da), R = CMat::Zero(db, db);
    for (Eigen::Index i = 0; i < svd.matrixU().rows(); ++i)
      if (svd.matrixU()(i, k) != 0.0) L += svd.matrixU()(i, k) * abasis[static_cast<size_t>(i)];
    for (Eigen::Index j = 0; j < svd.matrixV().rows(); ++j)
      if (svd.matrixV()(j, k) != 0.0) R += svd.matrixV()(j, k) * bbasis[static_cast<size_t>(j)];
    SchmidtTerm term;
    term.weight = sv(k);
    term.left = ComplexMatrix(hermitian_part(L), ldims);
    term.right = ComplexMatrix(hermitian_part(R), rdims);
    terms.push_back(std::move(term));
  }
  return terms;
}

ComplexMatrix trace_and_replace(const ComplexMatrix& m, int factor) {
  return trace_and_replace(m, std::vector<int>{factor});
}

ComplexMatrix trace_and_replace(const ComplexMatrix& m, const std::vector<int>& factors) {
  if (factors.empty()) return m;
  const auto& dims = m.dims();
  const int nf = m.num_factors();
  std::vector<int> fs = factors;
  std::sort(fs.begin(), fs.end());
  fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
  for (int f : fs)
    if (f < 0 || f >= nf) throw std::out_of_range("invalid factor index");

  std::vector<int> keep = complement_factors(nf, fs);
  double drep = 1.0;
  for (int f : fs) drep *= dims[f];

  if (keep.empty()) {
    Complex tr = m.mat().trace();
    CMat out = (tr / drep) * CMat::Identity(m.order(), m.order());
    return ComplexMatrix(std::move(out), dims, m.labels());
  }

  ComplexMatrix reduced = partial_trace(m, keep);
  std::vector<int> keep_dims;
  for (int k : keep) keep_dims.push_back(dims[k]);
  CMat embedded = embed_at(reduced.mat(), keep_dims, keep, dims);
  return ComplexMatrix(embedded / drep, dims, m.labels());
}

ComplexMatrix permute_factors(const ComplexMatrix& m, const std::vector<int>& perm) {
  const int nf = m.num_factors();
  if (static_cast<int>(perm.size()) != nf)
    throw std::invalid_argument("permutation length must match factor count");
  std::vector<bool> seen(nf, false);
  for (int p : perm) {
    if (p < 0 || p >= nf || seen[p]) throw std::invalid_argument("invalid permutation");
    seen[p] = true;
  }
  const auto& dims = m.dims();
  std::vector<int> new_dims(nf);
  for (int i = 0; i < nf; ++i) new_dims[i] = dims[perm[i]];
  auto st_old = strides(dims);
  auto st_new = strides(new_dims);

  const int n = m.order();
  // Map each old composite index to its new position.
  std::vector<int> remap(n);
  for (int idx = 0; idx < n; ++idx) {
    int out = 0;
    for (int i = 0; i < nf; ++i) {
      int comp = (idx / st_old[perm[i]]) % dims[perm[i]];
      out += comp * st_new[i];
    }
    remap[idx] = out;
  }
  CMat out(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) out(remap[r], remap[c]) = m.mat()(r, c);

  std::vector<std::string> labels;
  if (!m.labels().empty()) {
    labels.resize(perm.size());
    for (int i = 0; i < nf; ++i) labels[i] = m.labels()[perm[i]];
  }
  return ComplexMatrix(std::move(out), std::move(new_dims), std::move(labels));
}

CMat embed_at(const CMat& op, const std::vector<int>& op_dims,
              const std::vector<int>& positions, const std::vector<int>& dims) {
  if (op_dims.size() != positions.size())
    throw std::invalid_argument("embed_at: positions must match op factor count");
  const int n = product(dims);
  const int dop = product(op_dims);
  if (op.rows() != dop) throw std::invalid_argument("embed_at: op order mismatch");
  for (size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] < 0 || positions[i] >= static_cast<int>(dims.size()))
      throw std::out_of_range("embed_at: invalid position");
    if (dims[positions[i]] != op_dims[i])
      throw std::invalid_argument("embed_at: dimension mismatch at position");
    if (i > 0 && positions[i] <= positions[i - 1])
      throw std::invalid_argument("embed_at: positions must be strictly increasing");
  }

  auto st = strides(dims);
  auto sto = strides(op_dims);
  std::vector<int> rest = complement_factors(static_cast<int>(dims.size()), positions);
  std::vector<int> rdims;
  for (int r : rest) rdims.push_back(dims[r]);
  int drest = product(rdims);
  auto str = strides(rdims);

  CMat out = CMat::Zero(n, n);
  for (int ro = 0; ro < dop; ++ro) {
    for (int co = 0; co < dop; ++co) {
      Complex v = op(ro, co);
      if (v == Complex(0.0, 0.0)) continue;
      int rbase = 0, cbase = 0;
      for (size_t i = 0; i < positions.size(); ++i) {
        rbase += ((ro / sto[i]) % op_dims[i]) * st[positions[i]];
        cbase += ((co / sto[i]) % op_dims[i]) * st[positions[i]];
      }
      for (int t = 0; t < drest; ++t) {
        int off = 0;
        for (size_t i = 0; i < rest.size(); ++i)
          off += ((t / str[i]) % rdims[i]) * st[rest[i]];
        out(rbase + off, cbase + off) += v;
      }
    }
  }
  return out;
}

double hs_norm(const CMat& m) { return m.norm(); }

CMat hermitian_part(const CMat& m) { return 0.5 * (m + m.adjoint()); }

PosNegSplit positive_negative_split(const CMat& m, double tol) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m));
  const int n = static_cast<int>(m.rows());
  CMat pos = CMat::Zero(n, n), neg = CMat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double lam = es.eigenvalues()(i);
    if (lam > tol)
      pos += lam * es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
    else if (lam < -tol)
      neg -= lam * es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
  }
  return {pos, neg};
}

double min_eigenvalue(const CMat& hermitian) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(hermitian),
                                         Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const CMat& hermitian) {
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(hermitian),
                                         Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

CMat random_hermitian(int d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CMat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = Complex(g(rng), g(rng));
  return hermitian_part(m);
}

CMat random_unitary(int d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CMat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<CMat> qr(m);
  CMat q = qr.householderQ();
  // Fix phases so the result is deterministic across Eigen versions.
  CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < d; ++i) {
    Complex rii = r(i, i);
    if (std::abs(rii) > 0) q.col(i) *= rii / std::abs(rii);
  }
  return q;
}

CMat random_density(int d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CMat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = Complex(g(rng), g(rng));
  CMat rho = m * m.adjoint();
  return rho / rho.trace().real();
}

CMat pauli_x() {
  CMat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

CMat pauli_y() {
  CMat m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}

CMat pauli_z() {
  CMat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace iogames
