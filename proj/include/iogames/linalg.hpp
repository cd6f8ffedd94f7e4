#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace iogames {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

// Tolerance ladder: construction checks, decomposition residuals, solver
// feasibility. Keep the three levels distinct so linear-algebra noise is
// never confused with optimization noise.
namespace tolerance {
inline constexpr double construct = 1e-12;
inline constexpr double decomp = 1e-10;
inline constexpr double solver = 1e-8;
}  // namespace tolerance

// Dense square complex matrix carrying its tensor-factor structure.
// Factor convention: the first listed factor is the slowest (most
// significant) index of the row-major composite index, matching the
// Kronecker product order of tensor().
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(CMat m, std::vector<int> dims, std::vector<std::string> labels = {});

  // Square matrix with a single factor equal to its order.
  explicit ComplexMatrix(CMat m);

  const CMat& mat() const { return mat_; }
  CMat& mat() { return mat_; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<std::string>& labels() const { return labels_; }
  int order() const { return static_cast<int>(mat_.rows()); }
  int num_factors() const { return static_cast<int>(dims_.size()); }

  int factor_dim(int f) const;
  int factor_index(const std::string& label) const;

  bool is_hermitian(double tol = tolerance::construct) const;
  void require_hermitian(double tol = tolerance::construct) const;

  ComplexMatrix with_labels(std::vector<std::string> labels) const;

  static ComplexMatrix identity(const std::vector<int>& dims,
                                std::vector<std::string> labels = {});
  static ComplexMatrix zero(const std::vector<int>& dims,
                            std::vector<std::string> labels = {});

 private:
  CMat mat_;
  std::vector<int> dims_;
  std::vector<std::string> labels_;
};

// One term of a Hermitian operator Schmidt decomposition. Both factors
// have unit Hilbert-Schmidt norm; weights are nonnegative.
struct SchmidtTerm {
  double weight = 0.0;
  ComplexMatrix left;
  ComplexMatrix right;
};

// Kronecker product, dims concatenated (left factors slowest).
ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b);

// Trace over every factor not listed in `keep`; kept factors retain
// their original relative order. tr(out) == tr(in).
ComplexMatrix partial_trace(const ComplexMatrix& m, const std::vector<int>& keep);

// Transpose a single tensor factor in place; involutive.
ComplexMatrix partial_transpose(const ComplexMatrix& m, int factor);

// Eigendecomposition of a Hermitian matrix, eigenvalues ascending,
// m = V diag(vals) V^dagger.
struct HermitianEig {
  RVec eigenvalues;
  CMat eigenvectors;
};
HermitianEig hermitian_eig(const ComplexMatrix& m);

// Hermitian operator Schmidt decomposition across the cut that puts the
// first `n_left_factors` factors on the left: m = sum_k w_k L_k (x) R_k
// with Hermitian L_k, R_k. Implemented as a real SVD of the coefficient
// matrix of m in an orthonormal Hermitian product basis, which keeps
// both factors Hermitian.
std::vector<SchmidtTerm> operator_schmidt(const ComplexMatrix& m, int n_left_factors);

// tr_f(m) (x) I_f / d_f with the identity reinserted at the original
// factor position. Idempotent, trace preserving, self-adjoint.
ComplexMatrix trace_and_replace(const ComplexMatrix& m, int factor);
ComplexMatrix trace_and_replace(const ComplexMatrix& m, const std::vector<int>& factors);

// Reorders tensor factors: output factor i is input factor perm[i].
ComplexMatrix permute_factors(const ComplexMatrix& m, const std::vector<int>& perm);

// --- small helpers shared across modules ---

double hs_norm(const CMat& m);

// Hermitian part (m + m^dagger)/2.
CMat hermitian_part(const CMat& m);

// Splits a Hermitian matrix into positive and negative parts,
// m = pos - neg with pos, neg >= 0. Eigenvalues within +-1e-12 of zero
// are dropped.
struct PosNegSplit {
  CMat pos;
  CMat neg;
};
PosNegSplit positive_negative_split(const CMat& m, double tol = 1e-12);

double min_eigenvalue(const CMat& hermitian);
double max_eigenvalue(const CMat& hermitian);

// Enumerates an orthonormal Hermitian basis of d x d matrices
// (diagonal units, then symmetric and antisymmetric pairs) and feeds
// each element to `fn`. Basis order is fixed; callers rely on it for
// deterministic constraint rows.
void for_each_hermitian_basis(int d, const std::function<void(const CMat&)>& fn);

// Embeds an operator acting on a subset of factors into the full space
// with identities elsewhere. `positions` lists the factor slots (in
// increasing order) that `op` acts on; `dims` are the full factor dims.
CMat embed_at(const CMat& op, const std::vector<int>& op_dims,
              const std::vector<int>& positions, const std::vector<int>& dims);

std::vector<int> complement_factors(int n_factors, const std::vector<int>& keep);

// Deterministically seeded random objects for tests and fixtures.
CMat random_hermitian(int d, unsigned seed);
CMat random_unitary(int d, unsigned seed);
CMat random_density(int d, unsigned seed);

// Pauli matrices.
CMat pauli_x();
CMat pauli_y();
CMat pauli_z();

}  // namespace iogames
