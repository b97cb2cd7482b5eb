#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tailsampler/interval_set.hpp"
#include "tailsampler/mps.hpp"
#include "tailsampler/tensor.hpp"

using namespace tailsampler;

namespace {

DenseTensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  DenseTensor t(std::move(shape));
  for (auto& v : t.data()) v = {g(rng), g(rng)};
  return t;
}

double max_diff(const DenseTensor& a, const DenseTensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

MpsState ghz(std::size_t n) {
  std::vector<Complex> v(std::size_t{1} << n, 0.0);
  v.front() = v.back() = 1.0 / std::sqrt(2.0);
  return mps_from_statevector(v, 2);
}

}  // namespace

// ---------------------------------------------------------------- tensor-core

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(DenseTensor({2, 0}), DimensionError);
  EXPECT_THROW(DenseTensor({2, 2}, std::vector<Complex>(3)), DimensionError);
}

TEST(Tensor, IdentityContractionReturnsVector) {
  DenseTensor v({2}, {Complex(1, 2), Complex(-3, 0.5)});
  auto r = contract(DenseTensor::identity(2), v, {{1, 0}});
  EXPECT_LT(max_diff(r, v), 1e-15);
}

TEST(Tensor, MatrixProductMatchesTripleLoop) {
  auto a = random_tensor({2, 3}, 1), b = random_tensor({3, 4}, 2);
  auto c = contract(a, b, {{1, 0}});
  ASSERT_EQ(c.shape(), (Shape{2, 4}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      Complex s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a.at({i, k}) * b.at({k, j});
      EXPECT_LT(std::abs(c.at({i, j}) - s), 1e-13);
    }
}

TEST(Tensor, FullContractionWithConjugateIsSquaredNorm) {
  auto a = random_tensor({2, 3, 4}, 3);
  auto s = contract(a, a.conj(), {{0, 0}, {1, 1}, {2, 2}});
  EXPECT_EQ(s.rank(), 0u);
  const double f = a.frobenius_norm();
  EXPECT_NEAR(s[0].real(), f * f, 1e-12);
  EXPECT_NEAR(s[0].imag(), 0.0, 1e-12);
}

TEST(Tensor, ContractionAxisOrderAndErrors) {
  auto a = random_tensor({2, 3, 4}, 4), b = random_tensor({4, 5, 3}, 5);
  auto c = contract(a, b, {{1, 2}, {2, 0}});
  ASSERT_EQ(c.shape(), (Shape{2, 5}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      Complex s = 0.0;
      for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t y = 0; y < 4; ++y) s += a.at({i, x, y}) * b.at({y, j, x});
      EXPECT_LT(std::abs(c.at({i, j}) - s), 1e-12);
    }
  try {
    (void)contract(a, b, {{0, 0}});
    FAIL() << "mismatch not detected";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("axis 0"), std::string::npos);
  }
  EXPECT_THROW((void)contract(a, b, {{1, 2}, {1, 0}}), DimensionError);
}

TEST(Tensor, ContractionIsBilinear) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_tensor({3, 2, 2}, 100 + trial), b = random_tensor({2, 3}, 200 + trial);
    const Complex alpha(g(rng), g(rng));
    auto lhs = contract(a.scaled(alpha), b, {{0, 1}});
    auto rhs = contract(a, b, {{0, 1}}).scaled(alpha);
    EXPECT_LT(max_diff(lhs, rhs), 1e-12);
  }
}

TEST(Tensor, PermuteMovesAxes) {
  auto a = random_tensor({2, 3, 4}, 6);
  auto p = permute(a, {2, 0, 1});
  ASSERT_EQ(p.shape(), (Shape{4, 2, 3}));
  EXPECT_EQ(p.at({3, 1, 2}), a.at({1, 2, 3}));
  EXPECT_THROW((void)permute(a, {0, 0, 1}), DimensionError);
}

namespace {

void check_split(const DenseTensor& t, std::initializer_list<std::size_t> left) {
  auto [q, r] = isometric_split(t, left);
  const std::size_t nl = left.size();
  auto rec = contract(q, r, {{nl, 0}});
  // Reassemble in original axis order.
  std::vector<std::size_t> order(left);
  for (std::size_t a = 0; a < t.rank(); ++a)
    if (std::find(order.begin(), order.end(), a) == order.end()) order.push_back(a);
  std::vector<std::size_t> inverse(t.rank());
  for (std::size_t i = 0; i < order.size(); ++i) inverse[order[i]] = i;
  auto back = permute(rec, inverse);
  DenseTensor diff = t;
  for (std::size_t i = 0; i < t.size(); ++i) diff[i] -= back[i];
  EXPECT_LT(diff.frobenius_norm() / t.frobenius_norm(), 1e-12);

  std::vector<AxisPair> pairs;
  for (std::size_t i = 0; i < nl; ++i) pairs.emplace_back(i, i);
  auto qq = contract(q, q.conj(), pairs);
  const std::size_t k = q.extent(nl);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      EXPECT_LT(std::abs(qq.at({i, j}) - (i == j ? 1.0 : 0.0)), 1e-12);
  for (std::size_t i = 0; i < k; ++i) {
    EXPECT_GE(r[i * (r.size() / k) + i].real(), 0.0);
    EXPECT_EQ(r[i * (r.size() / k) + i].imag(), 0.0);
  }
}

}  // namespace

TEST(Tensor, SplitReconstructsRandomTensor) {
  check_split(random_tensor({2, 3, 4}, 7), {0, 1});
  check_split(random_tensor({2, 3, 4}, 8), {1, 2});
  check_split(random_tensor({4, 2, 3}, 9), {0});
  check_split(random_tensor({2, 3, 4}, 10), {2, 0});
}

TEST(Tensor, SplitOfRankDeficientTensor) {
  auto t = random_tensor({2, 2, 3}, 11);
  for (std::size_t j = 0; j < 3; ++j) t.at({0, 1, j}) = t.at({0, 0, j});
  for (std::size_t j = 0; j < 3; ++j) t.at({1, 1, j}) = t.at({1, 0, j});
  check_split(t, {0, 1});
  check_split(t, {2});
}

TEST(Tensor, SplitOfIsometryGivesTriangularR) {
  auto [q, r0] = isometric_split(random_tensor({3, 2, 2}, 12), {0, 1});
  auto [q2, r] = isometric_split(q, {0, 1});
  const std::size_t k = r.extent(0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (j < i) {
        EXPECT_LT(std::abs(r.at({i, j})), 1e-12);
      }
      if (i == j) {
        EXPECT_NEAR(r.at({i, j}).real(), 1.0, 1e-12);
      }
    }
  EXPECT_LT(max_diff(q2, q), 1e-12);
}

TEST(Tensor, SplitRejectsZeroTensorAndBadAxes) {
  EXPECT_THROW((void)isometric_split(DenseTensor({2, 2}), {0}), SingularInputError);
  auto t = random_tensor({2, 2}, 13);
  EXPECT_THROW((void)isometric_split(t, {0, 1}), DimensionError);
}

// ---------------------------------------------------------------- mps-state

TEST(Mps, ProductZeroStateIsTrivial) {
  std::vector<Complex> v(16, 0.0);
  v[0] = 1.0;
  auto m = mps_from_statevector(v, 2);
  EXPECT_EQ(m.max_bond(), 1u);
  EXPECT_EQ(m.iso_center(), std::optional<std::size_t>(0));
  Outcome zeros(4, 0);
  EXPECT_NEAR(std::abs(amplitude_of(m, zeros) - Complex(1.0)), 0.0, 1e-14);
}

TEST(Mps, BellStateHasBondTwo) {
  auto m = ghz(2);
  EXPECT_EQ(m.bond(0), 2u);
  for (std::uint64_t i = 0; i < 4; ++i) {
    const double expect = (i == 0 || i == 3) ? 1.0 / std::sqrt(2.0) : 0.0;
    EXPECT_NEAR(std::abs(amplitude_of(m, outcome_from_index(i, 2, 2))), expect, 1e-14);
  }
}

TEST(Mps, RandomStatesRoundTrip) {
  for (std::size_t d : {2u, 3u}) {
    for (std::size_t n = 1; n <= 5; ++n) {
      auto v = oracle::random_state(n, 40 + n, d);
      auto m = mps_from_statevector(v, d);
      EXPECT_NEAR(norm_squared(m), 1.0, 1e-12);
      for (std::size_t i = 1; i < n; ++i) EXPECT_LT(right_isometry_error(m.site(i)), 1e-12);
      auto back = to_statevector(m);
      for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_LT(std::abs(back[i] - v[i]), 1e-12);
        EXPECT_LT(std::abs(amplitude_of(m, outcome_from_index(i, n, d)) - v[i]), 1e-12);
      }
    }
  }
}

TEST(Mps, ConstructionErrors) {
  EXPECT_THROW(mps_from_statevector(std::vector<Complex>(6, 0.4), 2), ShapeError);
  try {
    (void)mps_from_statevector(std::vector<Complex>(4, 1.0), 2);
    FAIL();
  } catch (const NormalizationError& e) {
    EXPECT_NEAR(e.norm(), 2.0, 1e-12);
  }
  EXPECT_THROW(MpsState({DenseTensor({1, 2, 2})}, 0), ShapeError);
  EXPECT_THROW(MpsState({DenseTensor({1, 2, 2}), DenseTensor({3, 2, 1})}, 0), ShapeError);
}

TEST(Mps, MovingTheCenterPreservesAmplitudes) {
  auto g = ghz(3);
  auto moved = install_isometry_center(g, 2);
  EXPECT_EQ(moved.iso_center(), std::optional<std::size_t>(2));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LT(left_isometry_error(moved.site(i)), 1e-12);
  auto a = to_statevector(g), b = to_statevector(moved);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(a[i] - b[i]), 1e-12);

  auto v = oracle::random_state(5, 77);
  auto m = mps_from_statevector(v, 2);
  for (int k = 0; k < 100; ++k) m = install_isometry_center(std::move(m), k % 2 == 0 ? 4 : 0);
  auto w = to_statevector(m);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LT(std::abs(v[i] - w[i]), 1e-9);
}

TEST(Mps, LocalRdmMatchesPartialTrace) {
  const double h = 0.5;
  std::vector<Complex> plus{std::sqrt(h), std::sqrt(h)};
  auto rho = local_rdm(mps_from_statevector(plus, 2), 0);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(rho(i, j) - 0.5), 0.0, 1e-14);

  auto g = local_rdm(ghz(3), 0);
  EXPECT_NEAR(g(0, 0).real(), 0.5, 1e-14);
  EXPECT_NEAR(std::abs(g(0, 1)), 0.0, 1e-14);

  auto v = oracle::random_state(4, 5);
  auto m = mps_from_statevector(v, 2);
  for (std::size_t site = 0; site < 4; ++site) {
    m = install_isometry_center(std::move(m), site);
    auto r = local_rdm(m, site);
    auto ref = oracle::reduced_density(v, 4, site);
    EXPECT_LT((r - ref).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((r - r.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(r.trace().real(), 1.0, 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
  }
  EXPECT_THROW((void)local_rdm(m, 0), PreconditionError);
}

TEST(Mps, OutcomeProbabilitiesFromDiagonal) {
  MatrixXc rho = MatrixXc::Zero(2, 2);
  rho(0, 0) = 1.0;
  EXPECT_EQ(outcome_probabilities(rho), (std::vector<double>{1.0, 0.0}));
  rho(1, 1) = -1e-13;
  EXPECT_EQ(outcome_probabilities(rho)[1], 0.0);
  rho(1, 1) = -1e-6;
  EXPECT_THROW((void)outcome_probabilities(rho), PreconditionError);

  auto v = oracle::random_state(3, 21, 3);
  auto r = oracle::reduced_density(v, 3, 0, 3);
  auto p = outcome_probabilities(r);
  for (int m = 0; m < 3; ++m) {
    MatrixXc proj = MatrixXc::Zero(3, 3);
    proj(m, m) = 1.0;
    EXPECT_NEAR(p[static_cast<std::size_t>(m)], (r * proj).trace().real(), 1e-14);
  }
}

TEST(Mps, ProjectionChainReproducesBornRule) {
  auto g = ghz(3);
  auto after = project_and_advance(g, 0, 0);
  EXPECT_EQ(after.iso_center(), std::optional<std::size_t>(1));
  auto p = outcome_probabilities(local_rdm(after, 1));
  EXPECT_NEAR(p[0], 1.0, 1e-14);
  EXPECT_NEAR(p[1], 0.0, 1e-14);
  EXPECT_THROW((void)project_and_advance(after, 1, 1), ZeroBranchError);

  auto v = oracle::random_state(4, 33);
  auto m = mps_from_statevector(v, 2);
  for (std::uint64_t idx = 0; idx < 16; ++idx) {
    auto labels = outcome_from_index(idx, 4, 2);
    MpsState s = m;
    double prod = 1.0;
    for (std::size_t site = 0; site < 4; ++site) {
      prod *= outcome_probabilities(local_rdm(s, site))[labels[site]];
      s = project_and_advance(std::move(s), site, labels[site]);
    }
    EXPECT_NEAR(prod, std::norm(v[idx]), 1e-12);
  }
}

TEST(Mps, ProductStateConditionalsIgnorePrefix) {
  const double c = std::cos(0.3), s = std::sin(0.3);
  std::vector<Complex> v(8);
  for (std::size_t i = 0; i < 8; ++i) {
    double a = 1.0;
    for (int q = 0; q < 3; ++q) a *= ((i >> q) & 1) ? s : c;
    v[i] = a;
  }
  auto m = mps_from_statevector(v, 2);
  for (std::uint8_t first : {0, 1}) {
    auto after = project_and_advance(m, 0, first);
    auto p = outcome_probabilities(local_rdm(after, 1));
    EXPECT_NEAR(p[0], c * c, 1e-12);
  }
}

TEST(Mps, SweepCostGrowsLinearlyInLength) {
  // Fixed bond dimension 2 at every n: cost per site must be constant.
  std::vector<std::uint64_t> per_site;
  for (std::size_t n : {4u, 8u, 12u}) {
    auto m = ghz(n);
    flop_tally() = 0;
    MpsState s = m;
    for (std::size_t site = 0; site < n; ++site) {
      (void)local_rdm(s, site);
      s = project_and_advance(std::move(s), site, 0);
    }
    per_site.push_back(flop_tally() / n);
  }
  EXPECT_LE(per_site.back(), per_site.front() * 2);
}

TEST(Mps, BinaryFormatRoundTrip) {
  auto v = oracle::random_state(4, 8);
  auto m = mps_from_statevector(v, 2);
  std::stringstream ss;
  write_mps(ss, m);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "MPS1");
  auto back = read_mps(ss);
  auto w = to_statevector(back);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LT(std::abs(v[i] - w[i]), 1e-12);
  std::stringstream bad("MPS2xxxx");
  EXPECT_THROW((void)read_mps(bad), FormatError);
}

// ---------------------------------------------------------------- interval-domain

TEST(Intervals, RemoveSplitsAndDeletesParts) {
  IntervalSet s;
  s.remove({0.2, 0.5});
  ASSERT_EQ(s.part_count(), 2u);
  EXPECT_EQ(s.parts()[0], (Interval{0.0, 0.2}));
  EXPECT_EQ(s.parts()[1], (Interval{0.5, 1.0}));
  EXPECT_NEAR(residual_measure(s), 0.7, 1e-15);
  s.remove({0.0, 0.2});
  EXPECT_EQ(s.part_count(), 1u);
  EXPECT_THROW(s.remove({0.1, 0.3}), ContainmentError);
  EXPECT_THROW(s.remove({0.4, 0.6}), ContainmentError);
}

TEST(Intervals, ResidualTracksRemovedMass) {
  IntervalSet s;
  EXPECT_EQ(residual_measure(s), 1.0);
  s = remove_interval(s, {0.5, 0.75});
  EXPECT_NEAR(residual_measure(s), 0.75, 1e-15);
}

TEST(Intervals, RandomRemovalConservesMeasure) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Partition [0,1) into random cells, remove them in random order.
    std::vector<double> cuts{0.0, 1.0};
    for (int i = 0; i < 200; ++i) cuts.push_back(u(rng));
    std::sort(cuts.begin(), cuts.end());
    std::vector<Interval> cells;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) cells.push_back({cuts[i], cuts[i + 1]});
    std::shuffle(cells.begin(), cells.end(), rng);
    IntervalSet s;
    double removed = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      s.remove(cells[i]);
      removed += cells[i].width();
      EXPECT_NEAR(s.total_measure() + removed, 1.0, 1e-12);
      EXPECT_NEAR(s.total_measure(), s.recomputed_measure(), 1e-12);
      auto parts = s.parts();
      for (std::size_t j = 1; j < parts.size(); ++j) EXPECT_LT(parts[j - 1].hi, parts[j].lo);
    }
    EXPECT_TRUE(s.empty());
    EXPECT_EQ(residual_measure(s), 0.0);
  }
}

TEST(Intervals, SortedDrawsStayInside) {
  IntervalSet s;
  Rng rng(1);
  auto u = draw_sorted_uniform(s, 5, rng);
  ASSERT_EQ(u.size(), 5u);
  EXPECT_TRUE(std::is_sorted(u.begin(), u.end()));
  for (double x : u) EXPECT_TRUE(x >= 0.0 && x < 1.0);

  auto sliver = IntervalSet::from_parts({{0.3, 0.3 + 1e-12}});
  for (double x : draw_sorted_uniform(sliver, 100, rng)) EXPECT_TRUE(sliver.contains(x));

  IntervalSet empty;
  empty.remove({0.0, 1.0});
  EXPECT_THROW((void)draw_sorted_uniform(empty, 1, rng), ExhaustedDomain);
  EXPECT_THROW((void)draw_sorted_uniform(s, 0, rng), RangeError);
}

TEST(Intervals, TwoPartDrawsPassChiSquare) {
  auto s = IntervalSet::from_parts({{0.0, 0.1}, {0.9, 1.0}});
  Rng rng(2024);
  auto u = draw_sorted_uniform(s, 10000, rng);
  EXPECT_TRUE(std::is_sorted(u.begin(), u.end()));
  double left = 0;
  for (double x : u) {
    ASSERT_TRUE(s.contains(x));
    if (x < 0.5) ++left;
  }
  const double e = 5000.0;
  const double chi2 = 2.0 * (left - e) * (left - e) / e;
  EXPECT_LT(chi2, 10.83);  // one degree of freedom, significance 0.001
}

TEST(Intervals, RemovalRenormalizesHitRates) {
  // Three cells [0,.25), [.25,.35), [.35,1); drop the first.
  IntervalSet s;
  s.remove({0.0, 0.25});
  Rng rng(5);
  const std::size_t n = 60000;
  std::size_t hits = 0;
  for (std::size_t rep = 0; rep < n / 100; ++rep)
    for (double x : draw_sorted_uniform(s, 100, rng)) hits += (x >= 0.25 && x < 0.35);
  const double p = 0.1 / 0.75;
  const double sigma = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(static_cast<double>(hits) / n, p, 3 * sigma);
}

TEST(Intervals, HalfOpenMembership) {
  auto s = IntervalSet::from_parts({{0.2, 0.4}, {0.4 + 1e-16, 0.6}});
  EXPECT_EQ(s.part_count(), 1u);
  EXPECT_TRUE(s.contains(0.2));
  EXPECT_FALSE(s.contains(0.6));
  EXPECT_TRUE(s.intersects(0.5, 0.7));
  EXPECT_FALSE(s.intersects(0.6, 0.7));
  EXPECT_FALSE(s.intersects(0.0, 0.2));
}
