#include "iogames/supermaps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <unsupported/Eigen/KroneckerProduct>

namespace iogames {

namespace {

// Factor slots of a process matrix.
enum : int { kI0 = 0, kI1 = 1, kO1 = 2, kI2 = 3, kO2 = 4, kO0 = 5 };

void require_process_factors(const ComplexMatrix& w) {
  if (w.num_factors() != 6 || w.labels() != ProcessMatrix::factor_labels())
    throw std::invalid_argument("expected factors labeled (I0,I1,O1,I2,O2,O0)");
}

ComplexMatrix tr_rep(const ComplexMatrix& m, std::vector<int> s) {
  return trace_and_replace(m, s);
}

// Applies 1 - (Q_small - Q_big) for nested factor sets small within big.
ComplexMatrix project_step(const ComplexMatrix& m, const std::vector<int>& small,
                           const std::vector<int>& big) {
  CMat out = m.mat() - tr_rep(m, small).mat() + tr_rep(m, big).mat();
  return ComplexMatrix(std::move(out), m.dims(), m.labels());
}

}  // namespace

ComplexMatrix validity_project(const ComplexMatrix& w) {
  require_process_factors(w);
  // Four commuting projector conditions; the composition of their
  // complements is the orthogonal projector onto the valid subspace.
  ComplexMatrix x = project_step(w, {kI1, kO1, kI2, kO2, kO0}, {kI0, kI1, kO1, kI2, kO2, kO0});
  x = project_step(x, {kI2, kO2, kO0}, {kO1, kI2, kO2, kO0});
  x = project_step(x, {kI1, kO1, kO0}, {kO2, kI1, kO1, kO0});
  // Last family: tr_O0 W invariant under (1 - (1-Q_O1)(1-Q_O2)).
  {
    CMat out = x.mat() - tr_rep(x, {kO0}).mat() + tr_rep(x, {kO1, kO0}).mat() +
               tr_rep(x, {kO2, kO0}).mat() - tr_rep(x, {kO1, kO2, kO0}).mat();
    x = ComplexMatrix(std::move(out), x.dims(), x.labels());
  }
  return x;
}

ComplexMatrix comb_project(const ComplexMatrix& w, CombOrder order) {
  require_process_factors(w);
  const int first_out = order == CombOrder::Slot1First ? kO1 : kO2;
  const int last_in = order == CombOrder::Slot1First ? kI2 : kI1;
  const int last_out = order == CombOrder::Slot1First ? kO2 : kO1;
  ComplexMatrix x = project_step(w, {kO0}, {last_out, kO0});
  x = project_step(x, {last_in, last_out, kO0}, {first_out, last_in, last_out, kO0});
  x = project_step(x, {kI1, kO1, kI2, kO2, kO0}, {kI0, kI1, kO1, kI2, kO2, kO0});
  return x;
}

namespace {

// Link product over the shared factors: tr_shared[A^{T_shared} B] with
// both operators embedded on the union space. Result lives on
// (A-only factors, B-only factors) in that order.
ComplexMatrix link(const ComplexMatrix& a, const ComplexMatrix& b,
                   const std::vector<std::string>& shared) {
  std::vector<int> a_shared, b_shared;
  for (const auto& s : shared) {
    a_shared.push_back(a.factor_index(s));
    b_shared.push_back(b.factor_index(s));
  }
  auto a_only = complement_factors(a.num_factors(), a_shared);
  auto b_only = complement_factors(b.num_factors(), b_shared);

  // Reorder: a -> (a_only..., shared...), b -> (shared..., b_only...).
  std::vector<int> perm_a = a_only;
  perm_a.insert(perm_a.end(), a_shared.begin(), a_shared.end());
  std::vector<int> perm_b = b_shared;
  perm_b.insert(perm_b.end(), b_only.begin(), b_only.end());
  ComplexMatrix ar = permute_factors(a, perm_a);
  ComplexMatrix br = permute_factors(b, perm_b);

  std::vector<int> full_dims = ar.dims();
  for (size_t i = 0; i < b_only.size(); ++i)
    full_dims.push_back(br.dims()[shared.size() + i]);
  std::vector<std::string> full_labels = ar.labels();
  for (size_t i = 0; i < b_only.size(); ++i)
    full_labels.push_back(br.labels()[shared.size() + i]);

  const int na = static_cast<int>(a_only.size());
  const int ns = static_cast<int>(shared.size());
  const int nb = static_cast<int>(b_only.size());

  std::vector<int> pos_a(static_cast<size_t>(na + ns));
  std::iota(pos_a.begin(), pos_a.end(), 0);
  std::vector<int> pos_b(static_cast<size_t>(ns + nb));
  std::iota(pos_b.begin(), pos_b.end(), na);

  ComplexMatrix a_emb(embed_at(ar.mat(), ar.dims(), pos_a, full_dims), full_dims, full_labels);
  ComplexMatrix b_emb(embed_at(br.mat(), br.dims(), pos_b, full_dims), full_dims, full_labels);
  for (int i = 0; i < ns; ++i) a_emb = partial_transpose(a_emb, na + i);

  ComplexMatrix prod(CMat(a_emb.mat() * b_emb.mat()), full_dims, full_labels);
  std::vector<int> keep;
  for (int i = 0; i < na; ++i) keep.push_back(i);
  for (int i = 0; i < nb; ++i) keep.push_back(na + ns + i);
  return partial_trace(prod, keep);
}

}  // namespace

ProcessMatrix process_of_circuit(const ChoiChannel& pre, const ChoiChannel& mid,
                                 const ChoiChannel& post, const CircuitDims& d,
                                 CombOrder order) {
  if (pre.d_in() != d.i0 || pre.d_out() != d.i1 * d.anc1 || mid.d_in() != d.o1 * d.anc1 ||
      mid.d_out() != d.i2 * d.anc2 || post.d_in() != d.o2 * d.anc2 || post.d_out() != d.o0)
    throw std::invalid_argument("dimension chain mismatch");

  // Unnormalized Choi operators with the composite factors split out.
  ComplexMatrix c_pre(CMat(pre.choi().mat() * pre.d_in()), {d.i0, d.i1, d.anc1},
                      {"I0", "I1", "anc1"});
  ComplexMatrix c_mid(CMat(mid.choi().mat() * mid.d_in()), {d.o1, d.anc1, d.i2, d.anc2},
                      {"O1", "anc1", "I2", "anc2"});
  ComplexMatrix c_post(CMat(post.choi().mat() * post.d_in()), {d.o2, d.anc2, d.o0},
                       {"O2", "anc2", "O0"});

  ComplexMatrix w = link(link(c_pre, c_mid, {"anc1"}), c_post, {"anc2"});
  // Factor order is now (I0, I1, O1, I2, O2, O0).
  w = ComplexMatrix(CMat(w.mat() / (d.i0 * d.o1 * d.o2)), w.dims(),
                    ProcessMatrix::factor_labels());
  if (order == CombOrder::Slot2First)
    w = permute_factors(w, {0, 3, 4, 1, 2, 5}).with_labels(ProcessMatrix::factor_labels());
  return ProcessMatrix(std::move(w));
}

double probability(const ProcessMatrix& w, const ComplexMatrix& slot1_block,
                   const ComplexMatrix& slot2_block, const CMat& effect, const CMat& rho) {
  const auto& dims = w.mat().dims();
  if (slot1_block.order() != dims[kI1] * dims[kO1] ||
      slot2_block.order() != dims[kI2] * dims[kO2] || effect.rows() != dims[kO0] ||
      rho.rows() != dims[kI0])
    throw std::invalid_argument("dimension mismatch");
  if (min_eigenvalue(slot1_block.mat()) < -1e-9 || min_eigenvalue(slot2_block.mat()) < -1e-9)
    throw std::invalid_argument("instrument blocks must be positive semidefinite");
  if (max_eigenvalue(effect) > 1.0 + 1e-9 || min_eigenvalue(effect) < -1e-9)
    throw std::invalid_argument("effect must satisfy 0 <= M <= 1");

  double D = 1.0;
  for (int f = 0; f < 5; ++f) D *= dims[static_cast<size_t>(f)];
  CMat op = Eigen::kroneckerProduct(rho.transpose().eval(),
                                    slot1_block.mat().transpose().eval())
                .eval();
  op = Eigen::kroneckerProduct(op, slot2_block.mat().transpose().eval()).eval();
  op = Eigen::kroneckerProduct(op, effect).eval();
  return D * (w.mat().mat() * op).trace().real();
}

// ---------------------------------------------------------------------
// Free sets over process space

namespace {

using Term = FreeSetBuilder::Term;
using Slot = FreeSetBuilder::Slot;

int total_order(const std::vector<int>& dims) {
  int n = 1;
  for (int d : dims) n *= d;
  return n;
}

CandidateBlockSpec process_block_spec(const BlockKey& key, const std::vector<int>& dims) {
  return {key, dims, ProcessMatrix::factor_labels(), total_order(dims)};
}

Term projector_residual_term(Slot slot, int index, const std::vector<int>& dims,
                             const std::function<ComplexMatrix(const ComplexMatrix&)>& proj,
                             double scale = 1.0) {
  auto labels = ProcessMatrix::factor_labels();
  return {slot, index, [=](const CMat& e) {
            ComplexMatrix em(e, dims, labels);
            return CMat(scale * (proj(em).mat() - e));
          }};
}

Term trace_functional_term(Slot slot, int index, int n, double scale = 1.0) {
  return {slot, index, [n, scale](const CMat& e) {
            return CMat(scale * e(0, 0).real() * CMat::Identity(n, n));
          }};
}

void check_process_dims(const std::vector<int>& dims) {
  if (dims.size() != 6) throw std::invalid_argument("process dims must list six factors");
  if (total_order(dims) > 64)
    throw std::invalid_argument("process order exceeds the dimension cap of 64");
}

}  // namespace

ConicFreeSet compile_valid_processes(const std::vector<int>& dims, int n_processes) {
  check_process_dims(dims);
  const int n = total_order(dims);
  ConicFreeSet set;
  set.label = "valid_processes";
  set.object_kind = ObjectKind::Processes;
  set.n_settings = n_processes;
  for (int x = 0; x < n_processes; ++x)
    set.candidate_blocks.push_back(process_block_spec({x, -1}, dims));

  FreeSetBuilder b(std::move(set));
  auto proj = [](const ComplexMatrix& m) { return validity_project(m); };
  for (int x = 0; x < n_processes; ++x) {
    b.add_operator_equality(n, {projector_residual_term(Slot::Candidate, x, dims, proj)});
    b.add_operator_equality(1, {trace_functional_term(Slot::Candidate, x, n)},
                            CMat(CMat::Ones(1, 1)));
  }
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  for (int x = 0; x < n_processes; ++x) sl.candidate.push_back(CMat::Identity(n, n) / n);
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_comb_cone_set(const std::vector<int>& dims, CombOrder order,
                                   int n_processes) {
  check_process_dims(dims);
  const int n = total_order(dims);
  ConicFreeSet set;
  set.label = order == CombOrder::Slot1First ? "comb_slot1_first" : "comb_slot2_first";
  set.object_kind = ObjectKind::Processes;
  set.n_settings = n_processes;
  for (int x = 0; x < n_processes; ++x)
    set.candidate_blocks.push_back(process_block_spec({x, -1}, dims));

  FreeSetBuilder b(std::move(set));
  auto proj = [order](const ComplexMatrix& m) { return comb_project(m, order); };
  for (int x = 0; x < n_processes; ++x) {
    b.add_operator_equality(n, {projector_residual_term(Slot::Candidate, x, dims, proj)});
    b.add_operator_equality(1, {trace_functional_term(Slot::Candidate, x, n)},
                            CMat(CMat::Ones(1, 1)));
  }
  ConicFreeSet out = std::move(b).take();
  FreeAssignment sl;
  for (int x = 0; x < n_processes; ++x) sl.candidate.push_back(CMat::Identity(n, n) / n);
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_causally_separable(const std::vector<int>& dims) {
  check_process_dims(dims);
  const int n = total_order(dims);
  ConicFreeSet set;
  set.label = "causally_separable";
  set.object_kind = ObjectKind::Processes;
  set.n_settings = 1;
  set.candidate_blocks.push_back(process_block_spec({0, -1}, dims));
  set.aux_blocks.push_back({"comb_1_before_2", n});
  set.aux_blocks.push_back({"comb_2_before_1", n});

  FreeSetBuilder b(std::move(set));
  // Candidate splits into one comb per causal order.
  b.add_operator_equality(n, {{Slot::Candidate, 0, [](const CMat& e) { return e; }},
                              {Slot::Aux, 0, [](const CMat& e) { return CMat(-e); }},
                              {Slot::Aux, 1, [](const CMat& e) { return CMat(-e); }}});
  auto proj1 = [](const ComplexMatrix& m) { return comb_project(m, CombOrder::Slot1First); };
  auto proj2 = [](const ComplexMatrix& m) { return comb_project(m, CombOrder::Slot2First); };
  b.add_operator_equality(n, {projector_residual_term(Slot::Aux, 0, dims, proj1)});
  b.add_operator_equality(n, {projector_residual_term(Slot::Aux, 1, dims, proj2)});
  b.add_operator_equality(1, {trace_functional_term(Slot::Candidate, 0, n)},
                          CMat(CMat::Ones(1, 1)));
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  sl.candidate.push_back(CMat::Identity(n, n) / n);
  sl.aux.push_back(CMat::Identity(n, n) / (2 * n));
  sl.aux.push_back(CMat::Identity(n, n) / (2 * n));
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_compatible_testers(const std::vector<int>& arities,
                                        const std::vector<int>& dims, CombOrder order) {
  if (arities.size() < 2)
    throw std::invalid_argument("tester compatibility needs at least two testers");
  check_process_dims(dims);
  const int n = total_order(dims);
  int n_lambda = 1;
  for (int a : arities) {
    n_lambda *= a;
    if (n_lambda > 256) throw std::invalid_argument("assignment-function count exceeds the 256 cap");
  }

  ConicFreeSet set;
  set.label = "compatible_testers";
  set.object_kind = ObjectKind::Testers;
  set.n_settings = static_cast<int>(arities.size());
  for (int x = 0; x < set.n_settings; ++x)
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a)
      set.candidate_blocks.push_back(process_block_spec({x, a}, dims));
  for (int l = 0; l < n_lambda; ++l)
    set.aux_blocks.push_back({"parent_" + std::to_string(l), n});

  // Enumerate deterministic assignments, last setting fastest.
  std::vector<std::vector<int>> lambdas;
  {
    std::vector<int> cur(arities.size(), 0);
    for (int i = 0; i < n_lambda; ++i) {
      lambdas.push_back(cur);
      for (int x = static_cast<int>(arities.size()) - 1; x >= 0; --x) {
        if (++cur[static_cast<size_t>(x)] < arities[static_cast<size_t>(x)]) break;
        cur[static_cast<size_t>(x)] = 0;
      }
    }
  }

  FreeSetBuilder b(std::move(set));
  int cand = 0;
  for (int x = 0; x < static_cast<int>(arities.size()); ++x) {
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a, ++cand) {
      std::vector<Term> terms{{Slot::Candidate, cand, [](const CMat& e) { return e; }}};
      for (int l = 0; l < n_lambda; ++l)
        if (lambdas[static_cast<size_t>(l)][static_cast<size_t>(x)] == a)
          terms.push_back({Slot::Aux, l, [](const CMat& e) { return CMat(-e); }});
      b.add_operator_equality(n, terms);
    }
  }
  auto proj = [order](const ComplexMatrix& m) { return comb_project(m, order); };
  {
    std::vector<Term> terms;
    for (int l = 0; l < n_lambda; ++l)
      terms.push_back(projector_residual_term(Slot::Aux, l, dims, proj));
    b.add_operator_equality(n, terms);
    std::vector<Term> tr_terms;
    for (int l = 0; l < n_lambda; ++l)
      tr_terms.push_back(trace_functional_term(Slot::Aux, l, n));
    b.add_operator_equality(1, tr_terms, CMat(CMat::Ones(1, 1)));
  }
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  for (int x = 0; x < static_cast<int>(arities.size()); ++x)
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a)
      sl.candidate.push_back(CMat::Identity(n, n) / (arities[static_cast<size_t>(x)] * n));
  for (int l = 0; l < n_lambda; ++l)
    sl.aux.push_back(CMat::Identity(n, n) / (n_lambda * n));
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_all_testers(const std::vector<int>& arities, const std::vector<int>& dims,
                                 CombOrder order) {
  if (arities.empty()) throw std::invalid_argument("need at least one tester");
  check_process_dims(dims);
  const int n = total_order(dims);
  ConicFreeSet set;
  set.label = "all_testers";
  set.object_kind = ObjectKind::Testers;
  set.n_settings = static_cast<int>(arities.size());
  for (int x = 0; x < set.n_settings; ++x)
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a)
      set.candidate_blocks.push_back(process_block_spec({x, a}, dims));

  FreeSetBuilder b(std::move(set));
  auto proj = [order](const ComplexMatrix& m) { return comb_project(m, order); };
  int cand = 0;
  for (int x = 0; x < static_cast<int>(arities.size()); ++x) {
    std::vector<Term> terms, tr_terms;
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a, ++cand) {
      terms.push_back(projector_residual_term(Slot::Candidate, cand, dims, proj));
      tr_terms.push_back(trace_functional_term(Slot::Candidate, cand, n));
    }
    b.add_operator_equality(n, terms);
    b.add_operator_equality(1, tr_terms, CMat(CMat::Ones(1, 1)));
  }
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  for (int x = 0; x < static_cast<int>(arities.size()); ++x)
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a)
      sl.candidate.push_back(CMat::Identity(n, n) / (arities[static_cast<size_t>(x)] * n));
  out.slater_point = std::move(sl);
  return out;
}

RobustnessReport supermap_robustness(const ChoiCollection& candidate, const ConicFreeSet& f,
                                     const SolverOptions& opts) {
  if (candidate.kind != ObjectKind::Processes && candidate.kind != ObjectKind::Testers)
    throw std::invalid_argument("supermap robustness expects processes or testers");
  return robustness(candidate, f, opts);
}

CollaborativeGame game_from_process_witness(const Witness& y,
                                            const ChoiCollection& candidate_shape) {
  if (candidate_shape.kind != ObjectKind::Processes &&
      candidate_shape.kind != ObjectKind::Testers)
    throw std::invalid_argument("expected a process or tester witness");
  return detail::game_from_witness_blocks(y.blocks, candidate_shape);
}

PayoffReport verify_theorem2(const ChoiCollection& candidate, const ConicFreeSet& f,
                             double tol) {
  if (candidate.kind != ObjectKind::Processes && candidate.kind != ObjectKind::Testers)
    throw std::invalid_argument("theorem-2 verification expects processes or testers");
  return verify_equality(candidate, f, tol);
}

// ---------------------------------------------------------------------
// Fixtures

ProcessMatrix make_ocb_process() {
  // Two parties with trivial global past and future; causally
  // nonseparable process from the causal-structure literature.
  CMat eye = CMat::Identity(2, 2);
  auto kron4 = [&](const CMat& a, const CMat& b, const CMat& c, const CMat& d) {
    return Eigen::kroneckerProduct(Eigen::kroneckerProduct(a, b).eval(),
                                   Eigen::kroneckerProduct(c, d).eval())
        .eval();
  };
  CMat core = kron4(eye, eye, eye, eye);
  core += (kron4(eye, pauli_z(), pauli_z(), eye) +
           kron4(pauli_z(), eye, pauli_x(), pauli_z())) /
          std::sqrt(2.0);
  core /= 16.0;  // unit trace
  return ProcessMatrix(
      ComplexMatrix(core, {1, 2, 2, 2, 2, 1}, ProcessMatrix::factor_labels()));
}

ProcessMatrix make_causally_ordered_fixture(unsigned seed) {
  // Prepare a maximally entangled pair (slot-1 input and a memory
  // qubit), scramble the slot-1 output with the memory, feed slot 2,
  // trace everything at the end.
  CMat prep(4, 1);
  prep << 1.0 / std::sqrt(2.0), 0, 0, 1.0 / std::sqrt(2.0);
  ChoiChannel pre = channel_to_choi({prep});
  ChoiChannel mid = channel_to_choi({random_unitary(4, seed)});
  std::vector<CMat> trace_kraus;
  for (int i = 0; i < 4; ++i) {
    CMat k = CMat::Zero(1, 4);
    k(0, i) = 1.0;
    trace_kraus.push_back(k);
  }
  ChoiChannel post = channel_to_choi(trace_kraus);
  CircuitDims dims;
  dims.i0 = 1;
  dims.o0 = 1;
  dims.anc1 = 2;
  dims.anc2 = 2;
  return process_of_circuit(pre, mid, post, dims);
}

ProcessMatrix make_maximally_mixed_process(const std::vector<int>& dims) {
  check_process_dims(dims);
  const int n = total_order(dims);
  return ProcessMatrix(ComplexMatrix(CMat(CMat::Identity(n, n) / n), dims,
                                     ProcessMatrix::factor_labels()));
}

}  // namespace iogames
