#include "iogames/freeset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "iogames/supermaps.hpp"

namespace iogames {

namespace {

using Term = FreeSetBuilder::Term;
using Slot = FreeSetBuilder::Slot;

CandidateBlockSpec channel_block_spec(const BlockKey& key, int d_in, int d_out) {
  return {key, {d_in, d_out}, {"in", "out"}, d_in * d_out};
}

// Deterministic outcome-assignment functions lambda: x -> a, enumerated
// with the last setting fastest.
std::vector<std::vector<int>> assignment_functions(const std::vector<int>& arities) {
  int total = 1;
  for (int n : arities) {
    if (n < 1) throw std::invalid_argument("arity must be positive");
    total *= n;
    if (total > 256) throw std::invalid_argument("assignment-function count exceeds the 256 cap");
  }
  std::vector<std::vector<int>> out;
  std::vector<int> cur(arities.size(), 0);
  for (int i = 0; i < total; ++i) {
    out.push_back(cur);
    for (int x = static_cast<int>(arities.size()) - 1; x >= 0; --x) {
      if (++cur[static_cast<size_t>(x)] < arities[static_cast<size_t>(x)]) break;
      cur[static_cast<size_t>(x)] = 0;
    }
  }
  return out;
}

Term identity_term(Slot slot, int index, double scale = 1.0) {
  return {slot, index, [scale](const CMat& e) { return CMat(scale * e); }};
}

// Adjoint of X -> partial_trace(X, keep): embed the target element with
// identities on the traced factors.
Term trace_term(Slot slot, int index, const std::vector<int>& full_dims,
                const std::vector<int>& keep, double scale = 1.0) {
  std::vector<int> kd;
  for (int k : keep) kd.push_back(full_dims[static_cast<size_t>(k)]);
  return {slot, index, [=](const CMat& e) {
            return CMat(scale * embed_at(e, kd, keep, full_dims));
          }};
}

}  // namespace

ConicFreeSet compile_all_channels(int n_channels, int d_in, int d_out) {
  if (n_channels < 1) throw std::invalid_argument("need at least one channel");
  ConicFreeSet set;
  set.label = "all_channels";
  set.object_kind = ObjectKind::Channels;
  set.n_settings = n_channels;
  for (int x = 0; x < n_channels; ++x)
    set.candidate_blocks.push_back(channel_block_spec({x, -1}, d_in, d_out));

  FreeSetBuilder b(std::move(set));
  CMat marg = CMat::Identity(d_in, d_in) / d_in;
  for (int x = 0; x < n_channels; ++x)
    b.add_operator_equality(d_in, {trace_term(Slot::Candidate, x, {d_in, d_out}, {0})}, marg);
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  for (int x = 0; x < n_channels; ++x)
    sl.candidate.push_back(CMat::Identity(d_in * d_out, d_in * d_out) / (d_in * d_out));
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_classical_channels(int d_in, int n_outcomes, const CMat& basis) {
  CMat u = basis;
  if (u.size() == 0) u = CMat::Identity(n_outcomes, n_outcomes);
  if (u.rows() != n_outcomes || u.cols() != n_outcomes)
    throw std::invalid_argument("basis must be square of the output dimension");
  if ((u.adjoint() * u - CMat::Identity(n_outcomes, n_outcomes)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("basis is not orthonormal");

  ConicFreeSet set;
  set.label = "classical_channels";
  set.object_kind = ObjectKind::Channels;
  set.n_settings = 1;
  set.candidate_blocks.push_back(channel_block_spec({0, -1}, d_in, n_outcomes));

  std::vector<CMat> pinchers;
  CMat eye_in = CMat::Identity(d_in, d_in);
  for (int a = 0; a < n_outcomes; ++a) {
    CMat proj = u.col(a) * u.col(a).adjoint();
    pinchers.push_back(Eigen::kroneckerProduct(eye_in, proj));
  }

  FreeSetBuilder b(std::move(set));
  const int n = d_in * n_outcomes;
  // Choi must be invariant under pinching in the output basis.
  Term pinch{Slot::Candidate, 0, [pinchers](const CMat& e) {
               CMat out = e;
               for (const auto& p : pinchers) out -= p * e * p;
               return out;
             }};
  b.add_operator_equality(n, {pinch});
  b.add_operator_equality(
      d_in, {trace_term(Slot::Candidate, 0, {d_in, n_outcomes}, {0})},
      CMat(CMat::Identity(d_in, d_in) / d_in));
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  sl.candidate.push_back(CMat::Identity(n, n) / n);
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_entanglement_breaking_ppt(int d_in, int d_out) {
  ConicFreeSet set;
  set.label = "entanglement_breaking_ppt";
  set.object_kind = ObjectKind::Channels;
  set.n_settings = 1;
  set.candidate_blocks.push_back(channel_block_spec({0, -1}, d_in, d_out));
  set.aux_blocks.push_back({"partial_transpose", d_in * d_out});
  set.flags.push_back("PPT surrogate for entanglement breaking; exact only for d_in*d_out <= 6");

  const int n = d_in * d_out;
  FreeSetBuilder b(std::move(set));
  b.add_operator_equality(d_in, {trace_term(Slot::Candidate, 0, {d_in, d_out}, {0})},
                          CMat(CMat::Identity(d_in, d_in) / d_in));
  // Aux block pinned to the output partial transpose of the candidate;
  // its PSD cone is the PPT condition.
  std::vector<int> dims{d_in, d_out};
  Term pt{Slot::Candidate, 0, [dims](const CMat& e) {
            ComplexMatrix m(e, dims);
            return CMat(-partial_transpose(m, 1).mat());
          }};
  b.add_operator_equality(n, {identity_term(Slot::Aux, 0), pt});
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  sl.candidate.push_back(CMat::Identity(n, n) / n);
  sl.aux.push_back(CMat::Identity(n, n) / n);
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_compatible_channels(int n_channels, int d_in, int d_out) {
  if (n_channels < 2) throw std::invalid_argument("compatibility needs at least two channels");
  double aux_order = d_in * std::pow(static_cast<double>(d_out), n_channels);
  if (aux_order > 1024)
    throw std::invalid_argument("broadcast block order exceeds the 1024 cap");

  ConicFreeSet set;
  set.label = "compatible_channels";
  set.object_kind = ObjectKind::Channels;
  set.n_settings = n_channels;
  for (int x = 0; x < n_channels; ++x)
    set.candidate_blocks.push_back(channel_block_spec({x, -1}, d_in, d_out));
  const int bcast = static_cast<int>(aux_order);
  set.aux_blocks.push_back({"broadcast", bcast});

  std::vector<int> bdims{d_in};
  for (int x = 0; x < n_channels; ++x) bdims.push_back(d_out);

  FreeSetBuilder b(std::move(set));
  b.add_operator_equality(d_in, {trace_term(Slot::Aux, 0, bdims, {0})},
                          CMat(CMat::Identity(d_in, d_in) / d_in));
  for (int x = 0; x < n_channels; ++x) {
    b.add_operator_equality(
        d_in * d_out,
        {identity_term(Slot::Candidate, x),
         trace_term(Slot::Aux, 0, bdims, {0, 1 + x}, -1.0)});
  }
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  for (int x = 0; x < n_channels; ++x)
    sl.candidate.push_back(CMat::Identity(d_in * d_out, d_in * d_out) / (d_in * d_out));
  sl.aux.push_back(CMat::Identity(bcast, bcast) / bcast);
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_jointly_measurable(const std::vector<int>& outcome_counts, int d) {
  if (outcome_counts.size() < 2)
    throw std::invalid_argument("joint measurability needs at least two POVMs");
  auto lambdas = assignment_functions(outcome_counts);
  const int nx = static_cast<int>(outcome_counts.size());

  ConicFreeSet set;
  set.label = "jointly_measurable";
  set.object_kind = ObjectKind::Channels;
  set.n_settings = nx;
  for (int x = 0; x < nx; ++x)
    set.candidate_blocks.push_back(
        channel_block_spec({x, -1}, d, outcome_counts[static_cast<size_t>(x)]));
  for (size_t l = 0; l < lambdas.size(); ++l)
    set.aux_blocks.push_back({"parent_" + std::to_string(l), d});

  FreeSetBuilder b(std::move(set));
  CMat eye_in = CMat::Identity(d, d);
  for (int x = 0; x < nx; ++x) {
    const int nout = outcome_counts[static_cast<size_t>(x)];
    std::vector<CMat> pinchers;
    for (int a = 0; a < nout; ++a) {
      CMat proj = CMat::Zero(nout, nout);
      proj(a, a) = 1.0;
      pinchers.push_back(Eigen::kroneckerProduct(eye_in, proj));
    }
    Term pinch{Slot::Candidate, x, [pinchers](const CMat& e) {
                 CMat out = e;
                 for (const auto& p : pinchers) out -= p * e * p;
                 return out;
               }};
    b.add_operator_equality(d * nout, {pinch});

    // d * (a-th diagonal block of J_x)^T = sum_{lambda(x)=a} G_lambda.
    for (int a = 0; a < nout; ++a) {
      std::vector<Term> terms;
      terms.push_back({Slot::Candidate, x, [d, a, nout](const CMat& e) {
                         CMat proj = CMat::Zero(nout, nout);
                         proj(a, a) = 1.0;
                         CMat et = e.transpose();
                         return CMat(static_cast<double>(d) *
                                     Eigen::kroneckerProduct(et, proj).eval());
                       }});
      for (size_t l = 0; l < lambdas.size(); ++l)
        if (lambdas[l][static_cast<size_t>(x)] == a)
          terms.push_back(identity_term(Slot::Aux, static_cast<int>(l), -1.0));
      b.add_operator_equality(d, terms);
    }
  }
  {
    std::vector<Term> terms;
    for (size_t l = 0; l < lambdas.size(); ++l)
      terms.push_back(identity_term(Slot::Aux, static_cast<int>(l)));
    b.add_operator_equality(d, terms, CMat(CMat::Identity(d, d)));
  }
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  for (int x = 0; x < nx; ++x) {
    int nout = outcome_counts[static_cast<size_t>(x)];
    sl.candidate.push_back(CMat::Identity(d * nout, d * nout) / (d * nout));
  }
  for (size_t l = 0; l < lambdas.size(); ++l)
    sl.aux.push_back(eye_in / static_cast<double>(lambdas.size()));
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_compatible_instruments(const std::vector<int>& arities, int d_in,
                                            int d_out) {
  if (arities.size() < 2)
    throw std::invalid_argument("instrument compatibility needs at least two instruments");
  auto lambdas = assignment_functions(arities);
  const int nx = static_cast<int>(arities.size());
  const int n = d_in * d_out;

  ConicFreeSet set;
  set.label = "compatible_instruments";
  set.object_kind = ObjectKind::Instruments;
  set.n_settings = nx;
  for (int x = 0; x < nx; ++x)
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a)
      set.candidate_blocks.push_back(channel_block_spec({x, a}, d_in, d_out));
  for (size_t l = 0; l < lambdas.size(); ++l)
    set.aux_blocks.push_back({"parent_" + std::to_string(l), n});

  FreeSetBuilder b(std::move(set));
  int cand = 0;
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a, ++cand) {
      std::vector<Term> terms{identity_term(Slot::Candidate, cand)};
      for (size_t l = 0; l < lambdas.size(); ++l)
        if (lambdas[l][static_cast<size_t>(x)] == a)
          terms.push_back(identity_term(Slot::Aux, static_cast<int>(l), -1.0));
      b.add_operator_equality(n, terms);
    }
  }
  {
    std::vector<Term> terms;
    for (size_t l = 0; l < lambdas.size(); ++l)
      terms.push_back(trace_term(Slot::Aux, static_cast<int>(l), {d_in, d_out}, {0}));
    b.add_operator_equality(d_in, terms, CMat(CMat::Identity(d_in, d_in) / d_in));
  }
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  for (int x = 0; x < nx; ++x)
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a)
      sl.candidate.push_back(CMat::Identity(n, n) /
                             (arities[static_cast<size_t>(x)] * n));
  for (size_t l = 0; l < lambdas.size(); ++l)
    sl.aux.push_back(CMat::Identity(n, n) / (static_cast<double>(lambdas.size()) * n));
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_g_covariant(int d, const std::vector<CMat>& group_unitaries) {
  if (group_unitaries.empty()) throw std::invalid_argument("empty group");
  for (const auto& u : group_unitaries) {
    if (u.rows() != d || u.cols() != d) throw std::invalid_argument("unitary dimension mismatch");
    if ((u.adjoint() * u - CMat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("group element is not unitary");
  }
  // Closure up to global phase.
  auto in_group = [&](const CMat& v) {
    for (const auto& u : group_unitaries)
      if (std::abs(std::abs((u.adjoint() * v).trace()) - d) < 1e-10 * d) return true;
    return false;
  };
  for (const auto& g : group_unitaries)
    for (const auto& h : group_unitaries)
      if (!in_group(g * h))
        throw std::invalid_argument("unitaries are not closed under multiplication");

  ConicFreeSet set;
  set.label = "g_covariant";
  set.object_kind = ObjectKind::Channels;
  set.n_settings = 1;
  set.candidate_blocks.push_back(channel_block_spec({0, -1}, d, d));

  FreeSetBuilder b(std::move(set));
  b.add_operator_equality(d, {trace_term(Slot::Candidate, 0, {d, d}, {0})},
                          CMat(CMat::Identity(d, d) / d));
  for (const auto& u : group_unitaries) {
    CMat v = Eigen::kroneckerProduct(u.conjugate().eval(), u);
    Term comm{Slot::Candidate, 0,
              [v](const CMat& e) { return CMat(v.adjoint() * e * v - e); }};
    b.add_operator_equality(d * d, {comm});
  }
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  sl.candidate.push_back(CMat::Identity(d * d, d * d) / (d * d));
  out.slater_point = std::move(sl);
  return out;
}

ConicFreeSet compile_all_instruments(const std::vector<int>& arities, int d_in, int d_out) {
  if (arities.empty()) throw std::invalid_argument("need at least one instrument");
  const int nx = static_cast<int>(arities.size());
  const int n = d_in * d_out;

  ConicFreeSet set;
  set.label = "all_instruments";
  set.object_kind = ObjectKind::Instruments;
  set.n_settings = nx;
  for (int x = 0; x < nx; ++x)
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a)
      set.candidate_blocks.push_back(channel_block_spec({x, a}, d_in, d_out));

  FreeSetBuilder b(std::move(set));
  int cand = 0;
  for (int x = 0; x < nx; ++x) {
    std::vector<Term> terms;
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a, ++cand)
      terms.push_back(trace_term(Slot::Candidate, cand, {d_in, d_out}, {0}));
    b.add_operator_equality(d_in, terms, CMat(CMat::Identity(d_in, d_in) / d_in));
  }
  ConicFreeSet out = std::move(b).take();

  FreeAssignment sl;
  for (int x = 0; x < nx; ++x)
    for (int a = 0; a < arities[static_cast<size_t>(x)]; ++a)
      sl.candidate.push_back(CMat::Identity(n, n) / (arities[static_cast<size_t>(x)] * n));
  out.slater_point = std::move(sl);
  return out;
}

namespace {

std::vector<int> arities_of(const ChoiCollection& shape) {
  std::map<int, int> count;
  for (const auto& b : shape.blocks) count[b.key.x]++;
  std::vector<int> arities;
  for (const auto& [x, c] : count) arities.push_back(c);
  return arities;
}

}  // namespace

ConicFreeSet compile_base_set(const ChoiCollection& shape) {
  const auto& dims = shape.block(0).m.dims();
  switch (shape.kind) {
    case ObjectKind::Channels:
      return compile_all_channels(shape.n_blocks(), dims[0], dims[1]);
    case ObjectKind::Instruments:
      return compile_all_instruments(arities_of(shape), dims[0], dims[1]);
    case ObjectKind::Processes:
      return compile_valid_processes(dims, shape.n_blocks());
    case ObjectKind::Testers:
      return compile_all_testers(arities_of(shape), dims);
  }
  throw std::logic_error("unknown object kind");
}

ConicFreeSet compile_free_set(const std::string& tag,
                              const std::map<std::string, double>& params,
                              const ChoiCollection& candidate) {
  const auto& dims = candidate.block(0).m.dims();
  auto get = [&](const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (tag == "classical_channels") return compile_classical_channels(dims[0], dims[1]);
  if (tag == "entanglement_breaking_ppt")
    return compile_entanglement_breaking_ppt(dims[0], dims[1]);
  if (tag == "jointly_measurable") {
    std::vector<int> counts;
    for (const auto& b : candidate.blocks) counts.push_back(b.m.dims()[1]);
    return compile_jointly_measurable(counts, dims[0]);
  }
  if (tag == "compatible_channels")
    return compile_compatible_channels(candidate.n_blocks(), dims[0], dims[1]);
  if (tag == "compatible_instruments")
    return compile_compatible_instruments(arities_of(candidate), dims[0], dims[1]);
  if (tag == "g_covariant_pauli") {
    CMat eye = CMat::Identity(2, 2);
    return compile_g_covariant(2, {eye, pauli_x(), pauli_y(), pauli_z()});
  }
  if (tag == "g_covariant_z") {
    CMat eye = CMat::Identity(2, 2);
    return compile_g_covariant(2, {eye, pauli_z()});
  }
  if (tag == "g_covariant_trivial")
    return compile_g_covariant(dims[0], {CMat::Identity(dims[0], dims[0])});
  if (tag == "causally_separable") return compile_causally_separable(dims);
  if (tag == "compatible_testers")
    return compile_compatible_testers(arities_of(candidate), dims);
  if (tag == "all_channels")
    return compile_all_channels(candidate.n_blocks(), dims[0], dims[1]);
  if (tag == "all_instruments")
    return compile_all_instruments(arities_of(candidate), dims[0], dims[1]);
  if (tag == "valid_processes") return compile_valid_processes(dims, candidate.n_blocks());
  if (tag == "all_testers") return compile_all_testers(arities_of(candidate), dims);
  (void)get;
  throw std::invalid_argument("unknown free-set tag: " + tag);
}

}  // namespace iogames
