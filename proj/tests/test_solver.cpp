#include <doctest.h>

#include "iogames/solver.hpp"

using namespace iogames;

namespace {

// min tr X s.t. X >= A, X >= 0: optimum sum_i max(lambda_i(A), 0),
// via the explicit slack X - S = A.
ConeProgram psd_floor_program(const CMat& a) {
  const int n = static_cast<int>(a.rows());
  ConeProgram p;
  p.blocks.push_back({"X", n});
  p.blocks.push_back({"S", n});
  p.objective.emplace_back(0, CMat(CMat::Identity(n, n)));
  for_each_hermitian_basis(n, [&](const CMat& e) {
    LinearRow row;
    row.terms.emplace_back(0, e);
    row.terms.emplace_back(1, CMat(-e));
    row.rhs = (e.adjoint() * a).trace().real();
    p.equalities.push_back(std::move(row));
  });
  return p;
}

}  // namespace

TEST_CASE("solver: psd floor matches eigenvalue oracle") {
  for (unsigned seed : {1u, 2u, 3u, 4u}) {
    CMat a = random_hermitian(4, seed);
    ConeProgram p = psd_floor_program(a);
    Solution s = solve(p);
    REQUIRE(s.status == SolveStatus::Optimal);

    Eigen::SelfAdjointEigenSolver<CMat> es(a);
    double expect = 0.0;
    for (int i = 0; i < 4; ++i) expect += std::max(0.0, es.eigenvalues()(i));
    CHECK(std::abs(s.primal_value - expect) < 1e-8 * std::max(1.0, expect));
    CHECK(s.gap <= 1e-7);
    CHECK(s.dual_value <= s.primal_value + 1e-9);
  }
}

TEST_CASE("solver: scalar linear program") {
  // min x + 2y s.t. x + y = 1, x,y >= 0 -> 1 at (1,0).
  ConeProgram p;
  p.blocks.push_back({"x", 1});
  p.blocks.push_back({"y", 1});
  p.objective.emplace_back(0, CMat(CMat::Ones(1, 1)));
  p.objective.emplace_back(1, CMat(2.0 * CMat::Ones(1, 1)));
  LinearRow row;
  row.terms.emplace_back(0, CMat::Ones(1, 1));
  row.terms.emplace_back(1, CMat::Ones(1, 1));
  row.rhs = 1.0;
  p.equalities.push_back(row);
  Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.primal_value == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.primal[0](0, 0).real() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("solver: minimum eigenvalue via trace-one SDP") {
  for (unsigned seed : {7u, 8u}) {
    CMat c = random_hermitian(5, seed);
    ConeProgram p;
    p.blocks.push_back({"X", 5});
    p.objective.emplace_back(0, c);
    LinearRow row;
    row.terms.emplace_back(0, CMat(CMat::Identity(5, 5)));
    row.rhs = 1.0;
    p.equalities.push_back(row);
    Solution s = solve(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(std::abs(s.primal_value - min_eigenvalue(c)) < 1e-8);
  }
}

TEST_CASE("solver: objective scaling is exact") {
  CMat a = random_hermitian(3, 17);
  ConeProgram p = psd_floor_program(a);
  Solution s1 = solve(p);
  for (auto& [k, c] : p.objective) c *= 4.0;
  Solution s4 = solve(p);
  REQUIRE(s1.status == SolveStatus::Optimal);
  REQUIRE(s4.status == SolveStatus::Optimal);
  CHECK(std::abs(s4.primal_value - 4.0 * s1.primal_value) < 1e-7);
  CHECK((s1.primal[0] - s4.primal[0]).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("solver: deterministic repeat") {
  CMat a = random_hermitian(4, 23);
  ConeProgram p = psd_floor_program(a);
  Solution s1 = solve(p);
  Solution s2 = solve(p);
  CHECK(s1.primal_value == s2.primal_value);
  CHECK(s1.dual_value == s2.dual_value);
  CHECK(s1.iterations == s2.iterations);
}

TEST_CASE("solver: scalar inequality to slack conversion") {
  // min x s.t. -x <= -3, x >= 0 -> 3.
  ConeProgram p;
  p.blocks.push_back({"x", 1});
  p.objective.emplace_back(0, CMat::Ones(1, 1));
  LinearRow row;
  row.terms.emplace_back(0, CMat(-CMat::Ones(1, 1)));
  row.rhs = -3.0;
  p.inequalities.push_back(row);
  Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(s.primal_value == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("solver: infeasible program is reported") {
  // x >= 0 with x = -1.
  ConeProgram p;
  p.blocks.push_back({"x", 1});
  p.objective.emplace_back(0, CMat::Ones(1, 1));
  LinearRow row;
  row.terms.emplace_back(0, CMat::Ones(1, 1));
  row.rhs = -1.0;
  p.equalities.push_back(row);
  Solution s = solve(p);
  CHECK(s.status != SolveStatus::Optimal);
}

TEST_CASE("solver: redundant consistent rows are tolerated") {
  CMat a = random_hermitian(3, 29);
  ConeProgram p = psd_floor_program(a);
  // Duplicate every equality row.
  auto rows = p.equalities;
  for (const auto& r : rows) p.equalities.push_back(r);
  Solution s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) expect += std::max(0.0, es.eigenvalues()(i));
  CHECK(std::abs(s.primal_value - expect) < 1e-7);
}
