#include "iogames/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace iogames {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::NumericalTrouble: return "numerical_trouble";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "?";
}

void ConeProgram::check_consistent() const {
  const int nb = static_cast<int>(blocks.size());
  auto check_terms = [&](const std::vector<std::pair<int, CMat>>& terms) {
    for (const auto& [k, A] : terms) {
      if (k < 0 || k >= nb) throw std::invalid_argument("constraint references unknown block");
      if (A.rows() != blocks[static_cast<size_t>(k)].dim ||
          A.cols() != blocks[static_cast<size_t>(k)].dim)
        throw std::invalid_argument("constraint coefficient dimension mismatch");
      if ((A - A.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("constraint coefficient must be Hermitian");
    }
  };
  check_terms(objective);
  for (const auto& r : equalities) check_terms(r.terms);
  for (const auto& r : inequalities) check_terms(r.terms);
}

namespace {

constexpr double kInf = 1e30;

struct Row {
  std::vector<std::pair<int, CMat>> terms;
  double rhs = 0.0;
  double scale = 1.0;   // factor the row was divided by
  int original = -1;    // index into the pre-conversion row list, -1 if dropped source
};

// Internal equality-only standard form.
struct StdForm {
  std::vector<int> dims;
  std::vector<CMat> C;
  std::vector<Row> rows;
  double offset = 0.0;
  int nu = 0;  // sum of block orders
  // per block: (row index, coefficient) pairs, fixed order
  std::vector<std::vector<std::pair<int, const CMat*>>> block_rows;
  double bnorm = 0.0;
  double cnorm = 0.0;
};

StdForm build_std_form(const ConeProgram& p, std::string* err) {
  StdForm f;
  for (const auto& b : p.blocks) {
    if (b.dim <= 0) throw std::invalid_argument("block dimension must be positive");
    f.dims.push_back(b.dim);
  }
  f.C.assign(f.dims.size(), CMat());
  for (size_t k = 0; k < f.dims.size(); ++k)
    f.C[k] = CMat::Zero(f.dims[k], f.dims[k]);
  for (const auto& [k, c] : p.objective) f.C[static_cast<size_t>(k)] += hermitian_part(c);
  f.offset = p.objective_offset;

  std::vector<Row> rows;
  int orig = 0;
  for (const auto& r : p.equalities) {
    rows.push_back({r.terms, r.rhs, 1.0, orig++});
  }
  // Inequalities become equalities with a fresh scalar slack block.
  for (const auto& r : p.inequalities) {
    Row row{r.terms, r.rhs, 1.0, orig++};
    int slack = static_cast<int>(f.dims.size());
    f.dims.push_back(1);
    f.C.push_back(CMat::Zero(1, 1));
    row.terms.emplace_back(slack, CMat::Ones(1, 1));
    rows.push_back(std::move(row));
  }

  // Normalize rows; drop numerically empty ones.
  for (auto& r : rows) {
    double n2 = 0.0;
    for (auto& [k, A] : r.terms) {
      A = hermitian_part(A);
      n2 += A.squaredNorm();
    }
    double nrm = std::sqrt(n2);
    if (nrm < 1e-13) {
      if (std::abs(r.rhs) > 1e-10) {
        if (err) *err = "empty constraint row with nonzero right-hand side";
        return f;
      }
      continue;  // trivially satisfied
    }
    r.scale = nrm;
    for (auto& [k, A] : r.terms) A /= nrm;
    r.rhs /= nrm;
    f.rows.push_back(std::move(r));
  }

  f.nu = std::accumulate(f.dims.begin(), f.dims.end(), 0);
  f.block_rows.assign(f.dims.size(), {});
  for (size_t i = 0; i < f.rows.size(); ++i)
    for (const auto& [k, A] : f.rows[i].terms)
      f.block_rows[static_cast<size_t>(k)].emplace_back(static_cast<int>(i), &A);
  for (const auto& r : f.rows) f.bnorm += r.rhs * r.rhs;
  f.bnorm = std::sqrt(f.bnorm);
  for (const auto& c : f.C) f.cnorm += c.squaredNorm();
  f.cnorm = std::sqrt(f.cnorm);
  return f;
}

CMat chol_lower(const CMat& m, double base_jitter) {
  CMat a = m;
  double jitter = base_jitter;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<CMat> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    a = m + jitter * CMat::Identity(m.rows(), m.cols());
    jitter *= 100.0;
  }
  throw std::runtime_error("Cholesky factorization failed");
}

struct Scaling {
  CMat R;     // T = R R^dagger is the NT scaling point
  CMat Rinv;
  RVec lambda;  // scaled spectrum, X_hat = Z_hat = diag(lambda)
};

// NT scaling of a PSD block pair: R = Gx V S^{-1/2} with Gz^dag Gx = U S V^dag.
Scaling nt_scaling(const CMat& X, const CMat& Z) {
  const int n = static_cast<int>(X.rows());
  double jit = 1e-15 * (1.0 + X.trace().real() / n);
  CMat Gx = chol_lower(X, jit);
  CMat Gz = chol_lower(Z, 1e-15 * (1.0 + Z.trace().real() / n));
  Eigen::JacobiSVD<CMat> svd(Gz.adjoint() * Gx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  RVec s = svd.singularValues();
  for (int i = 0; i < n; ++i) s(i) = std::max(s(i), 1e-150);
  CMat V = svd.matrixV();
  RVec shalf = s.cwiseSqrt();
  Scaling sc;
  sc.R = Gx * V * shalf.cwiseInverse().asDiagonal();
  sc.Rinv = shalf.asDiagonal() * V.adjoint() *
            Gx.triangularView<Eigen::Lower>().solve(CMat::Identity(n, n));
  sc.lambda = s;
  return sc;
}

// Lyapunov solve: H(U) = (L U + U L)/2 = D with L = diag(lambda).
CMat lyap_solve(const RVec& lambda, const CMat& D) {
  const int n = static_cast<int>(lambda.size());
  CMat U(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) U(i, j) = D(i, j) * 2.0 / (lambda(i) + lambda(j));
  return U;
}

// Largest step alpha with diag(lambda) + alpha * Dhat >= 0.
double max_step(const RVec& lambda, const CMat& Dhat) {
  RVec inv_sqrt = lambda.cwiseSqrt().cwiseInverse();
  CMat W = inv_sqrt.asDiagonal() * Dhat * inv_sqrt.asDiagonal();
  double lmin = min_eigenvalue(W);
  if (lmin >= -1e-300) return kInf;
  return -1.0 / lmin;
}

// Real vectorization with exact Hermitian inner products:
// dot(vec(A), vec(B)) = Re tr(A^dag B).
void vectorize_into(const CMat& A, double* out) {
  const auto n2 = A.size();
  const Complex* d = A.data();
  for (Eigen::Index i = 0; i < n2; ++i) {
    out[i] = d[i].real();
    out[n2 + i] = d[i].imag();
  }
}

}  // namespace

Solution solve(const ConeProgram& p, const SolverOptions& opts) {
  p.check_consistent();
  Solution sol;
  std::string err;
  StdForm f = build_std_form(p, &err);
  if (!err.empty()) {
    sol.status = SolveStatus::Infeasible;
    sol.message = err;
    return sol;
  }
  // Normalize the objective so the iteration path is independent of its
  // scale; values and dual variables are mapped back on exit. This also
  // makes objective scaling exact.
  const double cscale = f.cnorm > 1e-12 ? f.cnorm : 1.0;
  if (cscale != 1.0) {
    for (auto& c : f.C) c /= cscale;
    f.offset /= cscale;
    f.cnorm = 1.0;
  }
  const int nb = static_cast<int>(f.dims.size());
  const int m = static_cast<int>(f.rows.size());
  if (m == 0) {
    sol.status = SolveStatus::NumericalTrouble;
    sol.message = "program has no constraints";
    return sol;
  }

  // Interior start: identity scaled from the data norms.
  double sx = std::max(1.0, std::sqrt(f.bnorm));
  double sz = std::max(1.0, f.cnorm);
  std::vector<CMat> X(nb), Z(nb);
  for (int k = 0; k < nb; ++k) {
    X[k] = sx * CMat::Identity(f.dims[k], f.dims[k]);
    Z[k] = sz * CMat::Identity(f.dims[k], f.dims[k]);
  }
  RVec y = RVec::Zero(m);
  RVec b(m);
  for (int i = 0; i < m; ++i) b(i) = f.rows[static_cast<size_t>(i)].rhs;

  std::vector<Scaling> sc(nb);
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<RowMat> vecA(nb);  // scaled constraint stacks, rebuilt each iteration
  RMat schur(m, m);

  // Best-iterate safeguard: degenerate faces can make late iterations
  // diverge after the gap has already closed, so keep the best point.
  struct Snapshot {
    std::vector<CMat> X, Z;
    RVec y;
    double merit = kInf;
    double pobj = 0, dobj = 0, gap = 1, pres = 1, dres = 1;
  } best;
  int best_since = 0;

  auto finalize = [&](SolveStatus proposed, const std::string& msg) {
    sol.message = msg;
    if (best.merit < kInf) {
      sol.primal = best.X;
      sol.dual_slack = best.Z;
      sol.primal_value = best.pobj;
      sol.dual_value = best.dobj;
      sol.gap = best.gap;
      sol.primal_residual = best.pres;
      sol.dual_residual = best.dres;
    } else {
      sol.primal = X;
      sol.dual_slack = Z;
      best.y = y;
    }
    // Undo the row normalization and the objective scaling.
    sol.y.assign(static_cast<size_t>(m), 0.0);
    for (int i = 0; i < m; ++i)
      sol.y[static_cast<size_t>(i)] =
          cscale * best.y(i) / f.rows[static_cast<size_t>(i)].scale;
    for (auto& z : sol.dual_slack) z *= cscale;
    sol.primal_value *= cscale;
    sol.dual_value *= cscale;
    sol.gap = std::abs(sol.primal_value - sol.dual_value) /
              std::max(1.0, std::abs(sol.primal_value));
    sol.status = proposed;
    if (sol.gap <= opts.accept_gap && sol.primal_residual <= opts.accept_feas &&
        sol.dual_residual <= opts.accept_feas)
      sol.status = SolveStatus::Optimal;
    return sol;
  };

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    // Residuals.
    RVec rp = b;
    for (int i = 0; i < m; ++i)
      for (const auto& [k, A] : f.rows[static_cast<size_t>(i)].terms)
        rp(i) -= (A.adjoint() * X[static_cast<size_t>(k)]).trace().real();
    std::vector<CMat> Rd(nb);
    for (int k = 0; k < nb; ++k) Rd[k] = f.C[static_cast<size_t>(k)] - Z[k];
    for (int i = 0; i < m; ++i)
      for (const auto& [k, A] : f.rows[static_cast<size_t>(i)].terms)
        Rd[static_cast<size_t>(k)] -= y(i) * A;

    double pobj = f.offset, dobj = f.offset + b.dot(y);
    double xz = 0.0;
    for (int k = 0; k < nb; ++k) {
      pobj += (f.C[static_cast<size_t>(k)].adjoint() * X[k]).trace().real();
      xz += (X[k] * Z[k]).trace().real();
    }
    double mu = xz / f.nu;
    double pres = rp.norm() / (1.0 + f.bnorm);
    double dres = 0.0;
    for (int k = 0; k < nb; ++k) dres += Rd[static_cast<size_t>(k)].squaredNorm();
    dres = std::sqrt(dres) / (1.0 + f.cnorm);
    // Gap measured in original objective units.
    double gap = cscale * std::abs(pobj - dobj) / std::max(1.0, cscale * std::abs(pobj));

    sol.primal_value = pobj;
    sol.dual_value = dobj;
    sol.gap = gap;
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.iterations = iter;

    double merit = std::max({gap, pres, dres});
    if (merit < best.merit) {
      best = {X, Z, y, merit, pobj, dobj, gap, pres, dres};
      best_since = iter;
    }

    if (opts.verbose)
      std::printf("it %3d  pobj % .10e  dobj % .10e  gap %.2e  pres %.2e  dres %.2e  mu %.2e\n",
                  iter, pobj, dobj, gap, pres, dres, mu);

    if (gap <= opts.gap_tol && pres <= opts.feas_tol && dres <= opts.feas_tol)
      return finalize(SolveStatus::Optimal, "converged");
    if (std::abs(dobj) > 1e9 * std::max(1.0, f.bnorm) && pres > 1e-4)
      return finalize(SolveStatus::Infeasible, "dual objective diverged");
    if (!std::isfinite(mu) || !std::isfinite(pobj))
      return finalize(SolveStatus::NumericalTrouble, "non-finite iterate");
    if (mu < 1e-15 * sx * sz)
      return finalize(SolveStatus::IterationLimit, "complementarity at machine precision");
    if (iter - best_since > 10)
      return finalize(SolveStatus::IterationLimit, "no progress over ten iterations");

    // NT scalings and scaled constraint stacks.
    try {
      for (int k = 0; k < nb; ++k) sc[static_cast<size_t>(k)] = nt_scaling(X[k], Z[k]);
    } catch (const std::exception& e) {
      return finalize(SolveStatus::NumericalTrouble, e.what());
    }
    for (int k = 0; k < nb; ++k) {
      const auto& rowsk = f.block_rows[static_cast<size_t>(k)];
      const int n2x2 = 2 * f.dims[static_cast<size_t>(k)] * f.dims[static_cast<size_t>(k)];
      vecA[static_cast<size_t>(k)].resize(static_cast<Eigen::Index>(rowsk.size()), n2x2);
      for (size_t r = 0; r < rowsk.size(); ++r) {
        CMat scaled = sc[static_cast<size_t>(k)].R.adjoint() * (*rowsk[r].second) *
                      sc[static_cast<size_t>(k)].R;
        vectorize_into(scaled, vecA[static_cast<size_t>(k)].row(static_cast<Eigen::Index>(r)).data());
      }
    }

    // Schur complement M_ij = sum_k <Atilde_ik, Atilde_jk>.
    schur.setZero();
    for (int k = 0; k < nb; ++k) {
      const auto& rowsk = f.block_rows[static_cast<size_t>(k)];
      if (rowsk.empty()) continue;
      RMat gram = vecA[static_cast<size_t>(k)] * vecA[static_cast<size_t>(k)].transpose();
      for (size_t a = 0; a < rowsk.size(); ++a)
        for (size_t c = 0; c < rowsk.size(); ++c)
          schur(rowsk[a].first, rowsk[c].first) += gram(static_cast<Eigen::Index>(a),
                                                        static_cast<Eigen::Index>(c));
    }
    double diag_max = schur.diagonal().maxCoeff();
    Eigen::LLT<RMat> schur_llt;
    double reg = 1e-13 * std::max(1.0, diag_max);
    for (int attempt = 0;; ++attempt) {
      RMat reg_m = schur + reg * RMat::Identity(m, m);
      schur_llt.compute(reg_m);
      if (schur_llt.info() == Eigen::Success) break;
      reg *= 100.0;
      if (attempt > 8) return finalize(SolveStatus::NumericalTrouble, "singular Newton system");
    }

    auto schur_solve = [&](const RVec& rhs) {
      RVec dy = schur_llt.solve(rhs);
      for (int refine = 0; refine < 2; ++refine) {
        RVec resid = rhs - schur * dy;
        dy += schur_llt.solve(resid);
      }
      return dy;
    };

    // Direction for a given scaled complementarity right-hand side.
    std::vector<CMat> u(nb), dZ(nb), dX(nb), dZhat(nb), dXhat(nb);
    RVec scaled_rd_vs_u(m);
    auto compute_direction = [&](const std::vector<CMat>& D, RVec& dy) {
      RVec rhs = rp;
      for (int k = 0; k < nb; ++k) {
        u[static_cast<size_t>(k)] = lyap_solve(sc[static_cast<size_t>(k)].lambda,
                                               D[static_cast<size_t>(k)]);
        CMat w = sc[static_cast<size_t>(k)].R.adjoint() * Rd[static_cast<size_t>(k)] *
                     sc[static_cast<size_t>(k)].R -
                 u[static_cast<size_t>(k)];
        const auto& rowsk = f.block_rows[static_cast<size_t>(k)];
        if (rowsk.empty()) continue;
        RVec wv(2 * w.size());
        vectorize_into(w, wv.data());
        RVec contrib = vecA[static_cast<size_t>(k)] * wv;
        for (size_t r = 0; r < rowsk.size(); ++r) rhs(rowsk[r].first) += contrib(static_cast<Eigen::Index>(r));
      }
      dy = schur_solve(rhs);
      for (int k = 0; k < nb; ++k) {
        dZ[static_cast<size_t>(k)] = Rd[static_cast<size_t>(k)];
      }
      for (int i = 0; i < m; ++i)
        for (const auto& [k, A] : f.rows[static_cast<size_t>(i)].terms)
          dZ[static_cast<size_t>(k)] -= dy(i) * A;
      for (int k = 0; k < nb; ++k) {
        dZhat[static_cast<size_t>(k)] = sc[static_cast<size_t>(k)].R.adjoint() *
                                        dZ[static_cast<size_t>(k)] * sc[static_cast<size_t>(k)].R;
        dXhat[static_cast<size_t>(k)] =
            hermitian_part(u[static_cast<size_t>(k)] - dZhat[static_cast<size_t>(k)]);
        dX[static_cast<size_t>(k)] = hermitian_part(
            sc[static_cast<size_t>(k)].R * dXhat[static_cast<size_t>(k)] *
            sc[static_cast<size_t>(k)].R.adjoint());
      }
      (void)scaled_rd_vs_u;
    };

    // Predictor (affine) direction.
    std::vector<CMat> D(nb);
    for (int k = 0; k < nb; ++k) {
      RVec l2 = sc[static_cast<size_t>(k)].lambda.array().square();
      D[static_cast<size_t>(k)] = CMat((-l2).asDiagonal());
    }
    RVec dy_aff;
    compute_direction(D, dy_aff);

    double ap = 1.0, ad = 1.0;
    for (int k = 0; k < nb; ++k) {
      ap = std::min(ap, max_step(sc[static_cast<size_t>(k)].lambda, dXhat[static_cast<size_t>(k)]));
      ad = std::min(ad, max_step(sc[static_cast<size_t>(k)].lambda, dZhat[static_cast<size_t>(k)]));
    }
    double mu_aff = 0.0;
    for (int k = 0; k < nb; ++k) {
      CMat xa = X[k] + std::min(1.0, ap) * dX[static_cast<size_t>(k)];
      CMat za = Z[k] + std::min(1.0, ad) * dZ[static_cast<size_t>(k)];
      mu_aff += (xa * za).trace().real();
    }
    mu_aff /= f.nu;
    double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);
    sigma = std::clamp(sigma, 1e-8, 0.999);

    // Corrector.
    std::vector<CMat> dXhat_aff = dXhat, dZhat_aff = dZhat;
    for (int k = 0; k < nb; ++k) {
      const RVec& l = sc[static_cast<size_t>(k)].lambda;
      CMat cross = 0.5 * (dXhat_aff[static_cast<size_t>(k)] * dZhat_aff[static_cast<size_t>(k)] +
                          dZhat_aff[static_cast<size_t>(k)] * dXhat_aff[static_cast<size_t>(k)]);
      CMat d = -cross;
      for (int i = 0; i < l.size(); ++i) d(i, i) += sigma * mu - l(i) * l(i);
      D[static_cast<size_t>(k)] = hermitian_part(d);
    }
    RVec dy;
    compute_direction(D, dy);

    ap = kInf;
    ad = kInf;
    for (int k = 0; k < nb; ++k) {
      ap = std::min(ap, max_step(sc[static_cast<size_t>(k)].lambda, dXhat[static_cast<size_t>(k)]));
      ad = std::min(ad, max_step(sc[static_cast<size_t>(k)].lambda, dZhat[static_cast<size_t>(k)]));
    }
    ap = std::min(1.0, 0.99 * ap);
    ad = std::min(1.0, 0.99 * ad);
    if (ap < 1e-10 && ad < 1e-10)
      return finalize(SolveStatus::NumericalTrouble, "step length collapsed");

    for (int k = 0; k < nb; ++k) {
      X[k] = hermitian_part(X[k] + ap * dX[static_cast<size_t>(k)]);
      Z[k] = hermitian_part(Z[k] + ad * dZ[static_cast<size_t>(k)]);
    }
    y += ad * dy;
  }

  return finalize(SolveStatus::IterationLimit, "iteration limit reached");
}

// ---------------------------------------------------------------------
// Robustness layer

int ConicFreeSet::candidate_index(const BlockKey& key) const {
  for (size_t i = 0; i < candidate_blocks.size(); ++i)
    if (candidate_blocks[i].key == key) return static_cast<int>(i);
  throw std::invalid_argument("free set has no candidate block " + key.str());
}

double ConicFreeSet::row_residual(const FreeAssignment& pt) const {
  double worst = 0.0;
  for (const auto& r : rows) {
    double v = r.alpha * pt.alpha;
    for (const auto& [b, C] : r.cand)
      v += (C.adjoint() * pt.candidate[static_cast<size_t>(b)]).trace().real();
    for (const auto& [k, A] : r.aux)
      v += (A.adjoint() * pt.aux[static_cast<size_t>(k)]).trace().real();
    worst = std::max(worst, std::abs(v));
  }
  for (const auto& r : inequality_rows) {
    double v = r.alpha * pt.alpha;
    for (const auto& [b, C] : r.cand)
      v += (C.adjoint() * pt.candidate[static_cast<size_t>(b)]).trace().real();
    for (const auto& [k, A] : r.aux)
      v += (A.adjoint() * pt.aux[static_cast<size_t>(k)]).trace().real();
    worst = std::max(worst, std::max(0.0, v));
  }
  return worst;
}

bool ConicFreeSet::shape_matches(const ChoiCollection& obj) const {
  if (obj.n_blocks() != static_cast<int>(candidate_blocks.size())) return false;
  for (int i = 0; i < obj.n_blocks(); ++i) {
    const auto& spec = candidate_blocks[static_cast<size_t>(i)];
    const auto& blk = obj.block(i);
    if (!(spec.key == blk.key)) return false;
    if (spec.factor_dims != blk.m.dims()) return false;
  }
  return true;
}

void FreeSetBuilder::add_operator_equality(int target_dim, const std::vector<Term>& terms,
                                           const CMat& alpha_rhs) {
  for_each_hermitian_basis(target_dim, [&](const CMat& e) {
    FreeSetRow row;
    for (const auto& t : terms) {
      CMat coeff = t.adjoint(e);
      if (coeff.cwiseAbs().maxCoeff() < 1e-14) continue;
      if ((coeff - coeff.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::logic_error("constraint adjoint produced a non-Hermitian coefficient");
      if (t.slot == Slot::Candidate)
        row.cand.emplace_back(t.index, hermitian_part(coeff));
      else
        row.aux.emplace_back(t.index, hermitian_part(coeff));
    }
    if (alpha_rhs.size() > 0)
      row.alpha = -(e.adjoint() * alpha_rhs).trace().real();
    if (std::abs(row.alpha) < 1e-14) row.alpha = 0.0;
    if (row.cand.empty() && row.aux.empty() && row.alpha == 0.0) return;
    set_.rows.push_back(std::move(row));
    if (set_.rows.size() > 20000)
      throw std::runtime_error("free-set description exceeds the 20k row cap");
  });
}

RobustnessProgram build_robustness_primal(const ChoiCollection& candidate,
                                          const ConicFreeSet& f) {
  if (!f.shape_matches(candidate))
    throw std::invalid_argument("candidate does not match the free set's block structure");
  const int nb = candidate.n_blocks();
  const int nsettings = f.n_settings;

  double trace_sum = 0.0;
  for (const auto& b : candidate.blocks) trace_sum += b.m.mat().trace().real();
  if (std::abs(trace_sum / nsettings - 1.0) > 1e-7)
    throw std::invalid_argument("candidate blocks are not normalized to one per setting");

  RobustnessProgram rp;
  rp.n_candidate = nb;
  rp.n_aux = static_cast<int>(f.aux_blocks.size());
  rp.alpha_index = nb + rp.n_aux;

  ConeProgram& prog = rp.program;
  for (const auto& b : candidate.blocks)
    prog.blocks.push_back({"slack:" + b.key.str(), b.m.order()});
  for (const auto& a : f.aux_blocks) prog.blocks.push_back({"aux:" + a.name, a.dim});
  prog.blocks.push_back({"alpha", 1});

  // Objective (1/|X|) sum_b tr(J_Lambda_b + S_b); the constant part is
  // the offset.
  for (int b = 0; b < nb; ++b) {
    int n = candidate.block(b).m.order();
    prog.objective.emplace_back(b, CMat::Identity(n, n) / nsettings);
  }
  prog.objective_offset = trace_sum / nsettings;

  auto convert = [&](const FreeSetRow& r) {
    LinearRow row;
    double rhs = 0.0;
    for (const auto& [b, C] : r.cand) {
      row.terms.emplace_back(b, C);
      rhs -= (C.adjoint() * candidate.block(b).m.mat()).trace().real();
    }
    for (const auto& [k, A] : r.aux) row.terms.emplace_back(nb + k, A);
    if (r.alpha != 0.0)
      row.terms.emplace_back(rp.alpha_index, r.alpha * CMat::Ones(1, 1));
    row.rhs = rhs;
    return row;
  };
  for (const auto& r : f.rows) prog.equalities.push_back(convert(r));
  for (const auto& r : f.inequality_rows) prog.inequalities.push_back(convert(r));
  prog.provenance = "robustness vs " + f.label;
  return rp;
}

bool slater_check(const ConicFreeSet& f) {
  if (!f.slater_point) return false;
  const auto& pt = *f.slater_point;
  if (pt.candidate.size() != f.candidate_blocks.size() ||
      pt.aux.size() != f.aux_blocks.size())
    return false;
  if (f.row_residual(pt) > 1e-7) return false;
  for (const auto& c : pt.candidate)
    if (min_eigenvalue(c) < 1e-6) return false;
  for (const auto& a : pt.aux)
    if (min_eigenvalue(a) < 1e-6) return false;
  return pt.alpha > 1e-6;
}

Solution optimize_over_free_set(const std::vector<CMat>& objective_blocks,
                                const ConicFreeSet& f, bool maximize,
                                const SolverOptions& opts) {
  if (objective_blocks.size() != f.candidate_blocks.size())
    throw std::invalid_argument("objective must cover every candidate block");
  ConeProgram prog;
  const int nb = static_cast<int>(f.candidate_blocks.size());
  for (const auto& c : f.candidate_blocks) prog.blocks.push_back({"cand:" + c.key.str(), c.dim});
  for (const auto& a : f.aux_blocks) prog.blocks.push_back({"aux:" + a.name, a.dim});
  const int alpha_index = nb + static_cast<int>(f.aux_blocks.size());
  prog.blocks.push_back({"alpha", 1});

  const double sign = maximize ? -1.0 : 1.0;
  for (int b = 0; b < nb; ++b) prog.objective.emplace_back(b, sign * objective_blocks[static_cast<size_t>(b)]);

  for (const auto& r : f.rows) {
    LinearRow row;
    for (const auto& [b, C] : r.cand) row.terms.emplace_back(b, C);
    for (const auto& [k, A] : r.aux) row.terms.emplace_back(nb + k, A);
    if (r.alpha != 0.0) row.terms.emplace_back(alpha_index, r.alpha * CMat::Ones(1, 1));
    prog.equalities.push_back(std::move(row));
  }
  for (const auto& r : f.inequality_rows) {
    LinearRow row;
    for (const auto& [b, C] : r.cand) row.terms.emplace_back(b, C);
    for (const auto& [k, A] : r.aux) row.terms.emplace_back(nb + k, A);
    if (r.alpha != 0.0) row.terms.emplace_back(alpha_index, r.alpha * CMat::Ones(1, 1));
    prog.inequalities.push_back(std::move(row));
  }
  // Pin the scale: members have alpha = 1.
  LinearRow pin;
  pin.terms.emplace_back(alpha_index, CMat::Ones(1, 1));
  pin.rhs = 1.0;
  prog.equalities.push_back(std::move(pin));
  prog.provenance = std::string(maximize ? "max" : "min") + " over " + f.label;

  Solution s = solve(prog, opts);
  if (maximize) {
    s.primal_value = -s.primal_value;
    s.dual_value = -s.dual_value;
  }
  return s;
}

Witness extract_witness(const Solution& s, const RobustnessProgram& rp,
                        const ChoiCollection& candidate, const ConicFreeSet& f,
                        const SolverOptions& opts) {
  Witness w;
  w.blocks.reserve(static_cast<size_t>(rp.n_candidate));
  w.min_eig = 0.0;
  for (int b = 0; b < rp.n_candidate; ++b) {
    CMat Y = hermitian_part(s.dual_slack[static_cast<size_t>(b)]);
    w.min_eig = std::min(w.min_eig, min_eigenvalue(Y));
    w.blocks.push_back(std::move(Y));
  }
  w.value = 0.0;
  for (int b = 0; b < rp.n_candidate; ++b)
    w.value += (w.blocks[static_cast<size_t>(b)].adjoint() *
                candidate.block(b).m.mat()).trace().real();

  Solution aux = optimize_over_free_set(w.blocks, f, /*maximize=*/true, opts);
  w.max_over_free = aux.primal_value;
  w.reverify_gap = aux.gap;
  w.verified = aux.status == SolveStatus::Optimal && w.min_eig >= -1e-9 &&
               w.max_over_free <= 1.0 + 1e-6 &&
               std::abs(w.value - s.primal_value) <= 1e-6 * std::max(1.0, s.primal_value);
  return w;
}

RobustnessReport robustness(const ChoiCollection& candidate, const ConicFreeSet& f,
                            const SolverOptions& opts) {
  RobustnessReport rep;
  rep.flags = f.flags;
  rep.slater_checked = slater_check(f);
  if (!rep.slater_checked)
    rep.flags.push_back("slater condition not verified; strong duality not certified");

  RobustnessProgram rp = build_robustness_primal(candidate, f);
  rep.raw = solve(rp.program, opts);
  rep.status = rep.raw.status;
  rep.primal_value = rep.raw.primal_value;
  rep.dual_value = rep.raw.dual_value;
  rep.gap = rep.raw.gap;
  rep.robustness = std::max(0.0, rep.primal_value - 1.0);
  if (rep.status != SolveStatus::Optimal) {
    rep.flags.push_back("solver did not reach optimality: " + rep.raw.message);
    return rep;
  }

  rep.witness = extract_witness(rep.raw, rp, candidate, f, opts);

  const double t = rep.primal_value - 1.0;
  if (t > 1e-6) {
    double worst = 0.0;
    for (int b = 0; b < rp.n_candidate; ++b) {
      CMat noise = hermitian_part(rep.raw.primal[static_cast<size_t>(b)]) / t;
      worst = std::max(worst, std::max(0.0, -min_eigenvalue(noise)));
      rep.optimal_noise.push_back(std::move(noise));
    }
    // Noise blocks must form a valid object of the candidate's kind:
    // PSD (checked above) with unit trace per setting.
    std::map<int, double> setting_trace;
    for (int b = 0; b < rp.n_candidate; ++b)
      setting_trace[candidate.block(b).key.x] +=
          rep.optimal_noise[static_cast<size_t>(b)].trace().real();
    for (const auto& [x, tr] : setting_trace) worst = std::max(worst, std::abs(tr - 1.0));
    rep.noise_residual = worst;
  }
  return rep;
}

std::string MembershipCertificate::summary() const {
  std::ostringstream os;
  os << (is_member ? "member" : "not a member") << " (R = " << robustness << ")";
  if (!is_member)
    os << "; witness value " << witness_value << ", max over free set "
       << witness_max_over_free;
  return os.str();
}

MembershipCertificate membership(const ChoiCollection& candidate, const ConicFreeSet& f) {
  MembershipCertificate cert;
  RobustnessReport rep = robustness(candidate, f);
  if (rep.status != SolveStatus::Optimal)
    throw std::runtime_error("membership solve failed: " + rep.raw.message);
  cert.robustness = rep.robustness;
  cert.is_member = rep.robustness <= cert.tolerance;
  if (cert.is_member) {
    // The primal point at alpha ~ 1 certifies membership: aux blocks and
    // scale taken from the solver, candidate blocks from the object.
    FreeAssignment pt;
    for (const auto& b : candidate.blocks) pt.candidate.push_back(b.m.mat());
    const int n_aux = static_cast<int>(f.aux_blocks.size());
    const int nb = candidate.n_blocks();
    double alpha = rep.raw.primal.back()(0, 0).real();
    for (int k = 0; k < n_aux; ++k) {
      CMat a = hermitian_part(rep.raw.primal[static_cast<size_t>(nb + k)]);
      if (alpha > 0.5) a /= alpha;
      pt.aux.push_back(std::move(a));
    }
    pt.alpha = 1.0;
    cert.feasible_residual = f.row_residual(pt);
    cert.feasible_point = std::move(pt);
  } else {
    cert.witness = rep.witness.blocks;
    cert.witness_value = rep.witness.value;
    cert.witness_max_over_free = rep.witness.max_over_free;
  }
  return cert;
}

}  // namespace iogames
