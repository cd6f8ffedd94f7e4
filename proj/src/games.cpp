#include "iogames/games.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

namespace iogames {

double& BlockGame::reward(const std::vector<int>& idx) {
  size_t flat = 0;
  for (size_t g = 0; g < elements.size(); ++g)
    flat = flat * elements[g].size() + static_cast<size_t>(idx[g]);
  return rewards[flat];
}

double BlockGame::reward(const std::vector<int>& idx) const {
  return const_cast<BlockGame*>(this)->reward(idx);
}

namespace detail {

double pairing_prefactor(const ComplexMatrix& block) {
  // Product of all factor dims except the measurement group (the last
  // factor): d_in for channels, D for processes.
  double d = 1.0;
  for (int f = 0; f + 1 < block.num_factors(); ++f) d *= block.factor_dim(f);
  return d;
}

CMat pairing_operator(const ChoiCollection& shape, int block_index,
                      const std::vector<const CMat*>& group_elements) {
  auto groups = factor_groups(shape.kind);
  if (group_elements.size() != groups.size())
    throw std::invalid_argument("pairing needs one element per factor group");
  CMat op = CMat::Ones(1, 1);
  for (size_t g = 0; g < groups.size(); ++g) {
    CMat piece = *group_elements[g];
    // States and slot blocks enter the pairing transposed; effects do not.
    if (groups[g].role != GroupRole::Measurement) piece = piece.transpose().eval();
    op = Eigen::kroneckerProduct(op, piece).eval();
  }
  return pairing_prefactor(shape.block(block_index).m) * op;
}

}  // namespace detail

namespace {

// Recursive Hermitian Schmidt decomposition across an ordered list of
// contiguous factor groups.
struct ProductTerm {
  double weight = 1.0;
  std::vector<CMat> factors;
};

void recursive_schmidt(const ComplexMatrix& m, const std::vector<FactorGroup>& groups,
                       size_t group_index, double weight, std::vector<CMat>& prefix,
                       std::vector<ProductTerm>& out) {
  if (group_index + 1 == groups.size()) {
    ProductTerm t;
    t.weight = weight;
    t.factors = prefix;
    t.factors.push_back(m.mat());
    out.push_back(std::move(t));
    return;
  }
  int cut = static_cast<int>(groups[group_index].factors.size());
  for (const auto& term : operator_schmidt(m, cut)) {
    prefix.push_back(term.left.mat());
    recursive_schmidt(term.right, groups, group_index + 1, weight * term.weight, prefix, out);
    prefix.pop_back();
  }
}

int find_or_append(std::vector<CMat>& registry, const CMat& m) {
  for (size_t i = 0; i < registry.size(); ++i)
    if ((registry[i] - m).norm() <= 1e-12 * std::max(1.0, m.norm()))
      return static_cast<int>(i);
  registry.push_back(m);
  return static_cast<int>(registry.size()) - 1;
}

int arity_of(const ChoiCollection& shape, int x) {
  int n = 0;
  for (const auto& b : shape.blocks)
    if (b.key.x == x) ++n;
  return n;
}

}  // namespace

namespace detail {

InputOutputGame game_from_witness_blocks(const std::vector<CMat>& y_blocks,
                                         const ChoiCollection& shape) {
  if (static_cast<int>(y_blocks.size()) != shape.n_blocks())
    throw std::invalid_argument("witness block count does not match the candidate");
  const auto groups = factor_groups(shape.kind);
  const size_t ng = groups.size();

  InputOutputGame game;
  game.shape = shape;

  // Contribution of one signed product term, with element indices into
  // the per-scope registries.
  struct Contribution {
    int block;
    std::vector<int> element;  // per group
    double coeff;              // includes sign, Schmidt weight and state trace
  };
  std::vector<Contribution> contributions;

  // Ensemble states are shared across blocks of the same setting.
  std::map<int, std::vector<CMat>> states_by_x;
  // Slot and effect registries are per block.
  std::vector<std::vector<std::vector<CMat>>> block_elements(
      static_cast<size_t>(shape.n_blocks()), std::vector<std::vector<CMat>>(ng));

  for (int b = 0; b < shape.n_blocks(); ++b) {
    const auto& blk = shape.block(b);
    const CMat& y = y_blocks[static_cast<size_t>(b)];
    if (y.rows() != blk.m.order())
      throw std::invalid_argument("witness block dimension mismatch");
    if (min_eigenvalue(y) < -1e-9)
      throw std::invalid_argument("witness block is not positive semidefinite");

    ComplexMatrix z(hermitian_part(y) / pairing_prefactor(blk.m), blk.m.dims(),
                    blk.m.labels());
    if (z.mat().norm() < 1e-14) continue;  // empty ensemble for this block

    std::vector<ProductTerm> terms;
    std::vector<CMat> prefix;
    recursive_schmidt(z, groups, 0, 1.0, prefix, terms);

    for (const auto& term : terms) {
      // Split every Hermitian factor into its positive and negative
      // parts and expand the product over the sign choices.
      std::vector<std::vector<std::pair<double, CMat>>> parts(ng);
      for (size_t g = 0; g < ng; ++g) {
        auto split = positive_negative_split(term.factors[g]);
        if (split.pos.norm() > 1e-13) parts[g].emplace_back(+1.0, split.pos);
        if (split.neg.norm() > 1e-13) parts[g].emplace_back(-1.0, split.neg);
      }
      bool empty = false;
      for (const auto& p : parts) empty = empty || p.empty();
      if (empty) continue;

      std::vector<size_t> choice(ng, 0);
      while (true) {
        Contribution c;
        c.block = b;
        c.coeff = term.weight;
        c.element.resize(ng);
        for (size_t g = 0; g < ng; ++g) {
          const auto& [sign, part] = parts[g][choice[g]];
          c.coeff *= sign;
          if (groups[g].role == GroupRole::Ensemble) {
            double tr = part.trace().real();
            CMat state = part.transpose() / tr;
            c.coeff *= tr;
            c.element[g] = find_or_append(states_by_x[shape.block(b).key.x], state);
          } else if (groups[g].role == GroupRole::Slot) {
            c.element[g] =
                find_or_append(block_elements[static_cast<size_t>(b)][g], part.transpose());
          } else {
            c.element[g] = find_or_append(block_elements[static_cast<size_t>(b)][g], part);
          }
        }
        contributions.push_back(std::move(c));
        size_t g = 0;
        for (; g < ng; ++g) {
          if (++choice[g] < parts[g].size()) break;
          choice[g] = 0;
        }
        if (g == ng) break;
      }
    }
  }

  // Uniform joint distribution over appearing (state, setting) pairs.
  int n_pairs = 0;
  for (const auto& [x, reg] : states_by_x) n_pairs += static_cast<int>(reg.size());
  if (n_pairs == 0) n_pairs = 1;

  // Assemble per-block element lists with completions, then rewards.
  std::vector<double> slot_scale(static_cast<size_t>(shape.n_blocks()) * ng, 1.0);
  std::vector<double> effect_scale(static_cast<size_t>(shape.n_blocks()), 1.0);
  for (int b = 0; b < shape.n_blocks(); ++b) {
    const auto& blk = shape.block(b);
    BlockGame bg;
    bg.key = blk.key;
    bg.elements.resize(ng);
    const int ax = arity_of(shape, blk.key.x);

    for (size_t g = 0; g < ng; ++g) {
      if (groups[g].role == GroupRole::Ensemble) {
        bg.elements[g] = states_by_x[blk.key.x];
        for (size_t i = 0; i < bg.elements[g].size(); ++i)
          bg.p.push_back(1.0 / (n_pairs * ax));
      } else if (groups[g].role == GroupRole::Slot) {
        // Shrink the raw CP blocks under a reference channel Choi and
        // append the completing block.
        int dslot = 1;
        for (int fidx : groups[g].factors) dslot *= blk.m.factor_dim(fidx);
        CMat ref = CMat::Identity(dslot, dslot) / dslot;
        auto& raw = block_elements[static_cast<size_t>(b)][g];
        CMat sum = CMat::Zero(dslot, dslot);
        for (const auto& r : raw) sum += r;
        double lam = raw.empty() ? 0.0 : max_eigenvalue(sum);
        double s = lam > 0 ? 1.0 / (dslot * lam * (1.0 + 1e-12)) : 1.0;
        slot_scale[static_cast<size_t>(b) * ng + g] = s;
        CMat completion = ref;
        for (const auto& r : raw) {
          bg.elements[g].push_back(s * r);
          completion -= s * r;
        }
        bg.elements[g].push_back(hermitian_part(completion));
      } else {
        auto& raw = block_elements[static_cast<size_t>(b)][g];
        int dm = 1;
        for (int fidx : groups[g].factors) dm *= blk.m.factor_dim(fidx);
        CMat sum = CMat::Zero(dm, dm);
        for (const auto& r : raw) sum += r;
        double lam = raw.empty() ? 0.0 : max_eigenvalue(sum);
        double c = lam > 0 ? lam * (1.0 + 1e-12) : 1.0;
        effect_scale[static_cast<size_t>(b)] = c;
        CMat completion = CMat::Identity(dm, dm);
        for (const auto& r : raw) {
          bg.elements[g].push_back(r / c);
          completion -= r / c;
        }
        bg.elements[g].push_back(hermitian_part(completion));
      }
    }
    size_t total = 1;
    for (const auto& el : bg.elements) total *= el.size();
    bg.rewards.assign(total, 0.0);
    game.blocks.push_back(std::move(bg));
  }

  for (const auto& c : contributions) {
    BlockGame& bg = game.blocks[static_cast<size_t>(c.block)];
    double coeff = c.coeff;
    double p = bg.p.empty() ? 1.0 : bg.p[static_cast<size_t>(c.element[0])];
    for (size_t g = 0; g < ng; ++g) {
      if (groups[g].role == GroupRole::Slot)
        coeff /= slot_scale[static_cast<size_t>(c.block) * ng + g];
      else if (groups[g].role == GroupRole::Measurement)
        coeff *= effect_scale[static_cast<size_t>(c.block)];
    }
    bg.reward(c.element) += coeff / p;
  }

  // Exactness: the game operators must reproduce the witness.
  auto ops = game_operators(game);
  for (int b = 0; b < shape.n_blocks(); ++b) {
    double resid = (ops[static_cast<size_t>(b)] - y_blocks[static_cast<size_t>(b)]).norm();
    if (resid > 1e-8 * std::max(1.0, y_blocks[static_cast<size_t>(b)].norm()))
      throw std::runtime_error("witness decomposition residual " + std::to_string(resid));
  }
  return game;
}

}  // namespace detail

InputOutputGame game_from_witness(const Witness& y, const ChoiCollection& candidate_shape) {
  if (candidate_shape.kind != ObjectKind::Channels &&
      candidate_shape.kind != ObjectKind::Instruments)
    throw std::invalid_argument("game_from_witness expects channel or instrument witnesses");
  return detail::game_from_witness_blocks(y.blocks, candidate_shape);
}

std::vector<CMat> game_operators(const InputOutputGame& g) {
  const auto groups = factor_groups(g.kind());
  const size_t ng = groups.size();
  std::vector<CMat> ops;
  for (size_t b = 0; b < g.blocks.size(); ++b) {
    const auto& bg = g.blocks[b];
    const int n = g.shape.block(static_cast<int>(b)).m.order();
    CMat op = CMat::Zero(n, n);
    std::vector<int> idx(ng, 0);
    if (bg.rewards.empty()) {
      ops.push_back(op);
      continue;
    }
    while (true) {
      double w = bg.reward(idx);
      double p = bg.p.empty() ? 0.0 : bg.p[static_cast<size_t>(idx[0])];
      if (w != 0.0 && p != 0.0) {
        std::vector<const CMat*> els(ng);
        for (size_t gi = 0; gi < ng; ++gi)
          els[gi] = &bg.elements[gi][static_cast<size_t>(idx[gi])];
        op += p * w * detail::pairing_operator(g.shape, static_cast<int>(b), els);
      }
      size_t gi = 0;
      for (; gi < ng; ++gi) {
        if (++idx[gi] < static_cast<int>(bg.elements[gi].size())) break;
        idx[gi] = 0;
      }
      if (gi == ng) break;
    }
    ops.push_back(hermitian_part(op));
  }
  return ops;
}

double payoff(const InputOutputGame& g, const ChoiCollection& c) {
  if (c.kind != g.kind()) throw std::invalid_argument("object kind does not match the game");
  if (c.n_blocks() != static_cast<int>(g.blocks.size()))
    throw std::invalid_argument("block count does not match the game");
  auto ops = game_operators(g);
  double total = 0.0;
  for (int b = 0; b < c.n_blocks(); ++b) {
    if (!(c.block(b).key == g.blocks[static_cast<size_t>(b)].key))
      throw std::invalid_argument("block keys do not match the game");
    if (c.block(b).m.order() != ops[static_cast<size_t>(b)].rows())
      throw std::invalid_argument("block dimension does not match the game");
    total += (ops[static_cast<size_t>(b)].adjoint() * c.block(b).m.mat()).trace().real();
  }
  return total;
}

InputOutputGame canonicalize(const InputOutputGame& g) {
  auto ops = game_operators(g);
  ConicFreeSet base = compile_base_set(g.shape);
  Solution lo = optimize_over_free_set(ops, base, /*maximize=*/false);
  Solution hi = optimize_over_free_set(ops, base, /*maximize=*/true);
  if (lo.status != SolveStatus::Optimal || hi.status != SolveStatus::Optimal)
    throw std::runtime_error("canonicalization solve failed");
  const double m = lo.primal_value;
  const double M = hi.primal_value;
  if (M - m <= 1e-10) throw std::runtime_error("degenerate game: constant payoff");

  // Payoff shifts by kappa times a uniform reward shift, with kappa the
  // total ensemble weight discounted by each setting's outcome arity.
  double kappa = 0.0;
  std::set<int> seen;
  for (const auto& bg : g.blocks) {
    if (seen.count(bg.key.x)) continue;
    seen.insert(bg.key.x);
    for (double pi : bg.p) kappa += pi;
  }
  if (kappa <= 0.0) throw std::runtime_error("degenerate game: empty ensemble");

  InputOutputGame out = g;
  const double entry_shift = m / kappa;
  const double scale = M - m;
  for (auto& bg : out.blocks)
    for (auto& w : bg.rewards) w = (w - entry_shift) / scale;
  out.canonical = {m, scale, true};
  return out;
}

double free_max_payoff(const InputOutputGame& g, const ConicFreeSet& f) {
  if (!g.canonical.canonicalized)
    throw std::invalid_argument("free_max_payoff expects a canonical game");
  Solution s = optimize_over_free_set(game_operators(g), f, /*maximize=*/true);
  if (s.status != SolveStatus::Optimal)
    throw std::runtime_error("free-set payoff solve failed");
  return s.primal_value;
}

DiscriminationForm discrimination_form(const InputOutputGame& g, const ChoiCollection& c) {
  if (g.kind() != ObjectKind::Channels)
    throw std::invalid_argument("discrimination form applies to channel games");
  DiscriminationForm out;
  std::vector<std::vector<CMat>> sigma;
  for (size_t b = 0; b < g.blocks.size(); ++b) {
    const auto& bg = g.blocks[b];
    for (double w : bg.rewards)
      if (w < -1e-9) throw std::invalid_argument("negative rewards present");
    const auto& jblock = c.block(static_cast<int>(b)).m;
    const int n_states = static_cast<int>(bg.elements[0].size());
    const int n_eff = static_cast<int>(bg.elements[1].size());
    std::vector<CMat> sblock;
    for (int j = 0; j < n_eff; ++j) {
      CMat s = CMat::Zero(jblock.factor_dim(1), jblock.factor_dim(1));
      for (int i = 0; i < n_states; ++i) {
        double w = std::max(0.0, bg.reward({i, j}));
        if (w == 0.0) continue;
        s += bg.p[static_cast<size_t>(i)] * w *
             apply_choi_block(jblock, bg.elements[0][static_cast<size_t>(i)]);
      }
      sblock.push_back(std::move(s));
    }
    sigma.push_back(std::move(sblock));
  }
  double N = 0.0;
  for (const auto& sb : sigma)
    for (const auto& s : sb) N += s.trace().real();
  out.normalization = N;

  double reproduced = 0.0;
  for (size_t b = 0; b < sigma.size(); ++b) {
    std::vector<CMat> hats;
    std::vector<double> ps;
    for (size_t j = 0; j < sigma[b].size(); ++j) {
      double tr = sigma[b][j].trace().real();
      ps.push_back(N > 0 ? tr / N : 0.0);
      hats.push_back(tr > 1e-300 ? CMat(sigma[b][j] / tr)
                                 : CMat::Zero(sigma[b][j].rows(), sigma[b][j].cols()));
      if (tr > 1e-300)
        reproduced += N * ps.back() *
                      (hats.back().adjoint() * g.blocks[b].elements[1][j]).trace().real();
    }
    out.sigma_hat.push_back(std::move(hats));
    out.pjx.push_back(std::move(ps));
  }
  // Clamped negatives aside, the ensemble must reproduce the payoff.
  double direct = 0.0;
  {
    InputOutputGame clamped = g;
    for (auto& bg : clamped.blocks)
      for (auto& w : bg.rewards) w = std::max(0.0, w);
    direct = payoff(clamped, c);
  }
  out.payoff_value = reproduced;
  out.reconstruction_residual = std::abs(reproduced - direct);
  return out;
}

PayoffReport verify_equality(const ChoiCollection& candidate, const ConicFreeSet& f,
                             double tol, const SolverOptions& opts) {
  PayoffReport rep;
  if (!slater_check(f))
    throw std::invalid_argument("free set fails the interior-point check");

  RobustnessReport rob = robustness(candidate, f, opts);
  if (rob.status != SolveStatus::Optimal)
    throw std::runtime_error("robustness solve failed: " + rob.raw.message);
  rep.robustness_bound = rob.primal_value;
  rep.duality_gap = rob.gap;
  rep.witness_max_over_free = rob.witness.max_over_free;
  if (!rob.witness.verified) rep.notes.push_back("witness re-verification failed");

  InputOutputGame game = detail::game_from_witness_blocks(rob.witness.blocks, candidate);
  bool canonical = true;
  try {
    InputOutputGame c = canonicalize(game);
    // A member candidate can yield a near-constant witness game (for
    // example Y close to the identity); rescaling it would amplify
    // solver noise, and its raw payoff ratio already equals the
    // robustness bound. Resourceful candidates always have scale >= 1.
    if (rob.robustness <= 1e-6 && c.canonical.scale <= 1e-4) {
      canonical = false;
      rep.notes.push_back("near-degenerate witness game; raw payoff ratio reported");
    } else {
      game = std::move(c);
    }
  } catch (const std::runtime_error&) {
    if (rob.robustness > 1e-6) throw;
    canonical = false;
    rep.notes.push_back("degenerate witness game; raw payoff ratio reported");
  }

  rep.payoff = payoff(game, candidate);
  rep.free_max = canonical
                     ? free_max_payoff(game, f)
                     : optimize_over_free_set(game_operators(game), f, true).primal_value;

  ConicFreeSet base = compile_base_set(candidate);
  rep.global_max = optimize_over_free_set(game_operators(game), base, true).primal_value;
  rep.global_min = optimize_over_free_set(game_operators(game), base, false).primal_value;

  rep.ratio = rep.payoff / rep.free_max;
  rep.equality_residual = std::abs(rep.ratio - rep.robustness_bound);
  rep.pass = rep.equality_residual <= tol && rob.witness.verified;
  if (rep.ratio > rep.robustness_bound + 1e-6)
    rep.notes.push_back("payoff ratio exceeds the robustness bound");
  return rep;
}

PayoffReport verify_theorem1(const ChoiCollection& candidate, const ConicFreeSet& f,
                             double tol) {
  if (candidate.kind != ObjectKind::Channels && candidate.kind != ObjectKind::Instruments)
    throw std::invalid_argument("theorem-1 verification expects channels or instruments");
  return verify_equality(candidate, f, tol);
}

}  // namespace iogames
