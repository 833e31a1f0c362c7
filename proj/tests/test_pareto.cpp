#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fairdg/errors.hpp"
#include "fairdg/pareto.hpp"
#include "oracles.hpp"

using namespace fairdg;
using namespace fairdg::pareto;

namespace {

std::vector<TradeoffPoint> cloud(std::mt19937_64& rng, std::size_t n, bool grid) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TradeoffPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    // Grid values create exact ties and duplicates.
    const double v = grid ? static_cast<double>(rng() % 6) / 5.0 : u(rng);
    const double w = grid ? static_cast<double>(rng() % 6) / 5.0 : u(rng);
    pts.push_back({v, w, static_cast<double>(i) / 100.0});
  }
  return pts;
}

std::vector<oracle::Pt> as_pts(const std::vector<TradeoffPoint>& p) {
  std::vector<oracle::Pt> out;
  for (const auto& q : p) out.push_back({q.v, q.u, q.lambda});
  return out;
}

}  // namespace

TEST(ParetoFront, IncomparableAndDominated) {
  auto f = pareto_front({{0.1, 0.9, 0.0}, {0.2, 0.8, 0.1}});
  EXPECT_EQ(f.size(), 1u);  // (0.1, 0.9) is better on both axes
  f = pareto_front({{0.1, 0.8, 0.0}, {0.2, 0.9, 0.1}});
  EXPECT_EQ(f.size(), 2u);
  f = pareto_front({{0.1, 0.9, 0.0}, {0.2, 0.85, 0.1}});
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].v, 0.1);
  EXPECT_THROW(pareto_front({}), ValidationError);
}

TEST(ParetoFront, TiesAndDuplicates) {
  const auto f = pareto_front({{0.3, 0.5, 0.4}, {0.3, 0.5, 0.2}, {0.3, 0.7, 0.9}, {0.5, 0.8, 0.1}});
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].u, 0.7);  // equal V keeps the higher U
  const auto d = pareto_front({{0.3, 0.5, 0.4}, {0.3, 0.5, 0.2}});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].lambda, 0.2);
}

TEST(ParetoFront, MatchesBruteForceAndIsIdempotent) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 300; ++t) {
    const auto pts = cloud(rng, 1 + t % 40, t % 2 == 0);
    const auto f = pareto_front(pts);
    const auto o = oracle::brute_front(as_pts(pts));
    ASSERT_EQ(f.size(), o.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      EXPECT_EQ(f[i].v, o[i].v);
      EXPECT_EQ(f[i].u, o[i].u);
      EXPECT_EQ(f[i].lambda, o[i].lambda);
      if (i > 0) {
        EXPECT_LT(f[i - 1].v, f[i].v);
        EXPECT_LT(f[i - 1].u, f[i].u);
      }
    }
    const auto ff = pareto_front(f);
    ASSERT_EQ(ff.size(), f.size());
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(ff[i].v, f[i].v);
  }
}

TEST(Normalize, AffineAndDegenerate) {
  const auto n = normalize_front({{2, 10, 0}, {4, 20, 0.5}});
  EXPECT_EQ(n[0].v, 0.0);
  EXPECT_EQ(n[0].u, 0.0);
  EXPECT_EQ(n[1].v, 1.0);
  EXPECT_EQ(n[1].u, 1.0);
  const auto one = normalize_front({{0.3, 0.7, 0}});
  EXPECT_EQ(one[0].v, 0.0);
  EXPECT_EQ(one[0].u, 0.0);
  const auto id = normalize_front({{0, 0, 0}, {0.4, 0.6, 0}, {1, 1, 0}});
  EXPECT_EQ(id[1].v, 0.4);
  EXPECT_EQ(id[1].u, 0.6);
  const auto fixed = normalize_front({{0.5, 0.5, 0}}, Bounds{0.0, 2.0, 0.0, 1.0});
  EXPECT_EQ(fixed[0].v, 0.25);
}

TEST(Hvi, SinglePointRectangles) {
  const Hypervolume a = hvi({{0, 1, 0}});
  EXPECT_NEAR(a.raw, 1.21, 1e-15);
  EXPECT_EQ(a.percent, 100.0);
  const Hypervolume b = hvi({{1, 0, 0}});
  EXPECT_NEAR(b.raw, 0.01, 1e-15);
  EXPECT_NEAR(b.percent, 100.0 / 121.0, 1e-12);
  EXPECT_THROW(hvi({{0.5, 0.5, 0}, {0.2, 0.8, 0}}), ContractError);
}

TEST(Hvi, MatchesMonteCarloArea) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto norm = normalize_front(pareto_front(cloud(rng, 3 + t % 20, false)));
    const Hypervolume h = hvi(norm);
    const auto mc = oracle::mc_area(as_pts(norm), 1.1, -0.1, 1'000'000, 1000 + t);
    EXPECT_LE(std::abs(h.raw - mc.area), 3.0 * mc.stderr_ + 1e-12) << "front " << t;
    EXPECT_GE(h.percent, 0.0);
    EXPECT_LE(h.percent, 100.0);
  }
}

TEST(Hvi, AddingNonDominatedPointNeverDecreases) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    auto pts = cloud(rng, 5, false);
    const Bounds b{0, 1, 0, 1};
    const double before = hvi(normalize_front(pareto_front(pts), b)).raw;
    pts.push_back({u(rng), u(rng), 0.99});
    EXPECT_GE(hvi(normalize_front(pareto_front(pts), b)).raw, before - 1e-15);
  }
}

TEST(GlobalCriterion, UtopiaAndTieBreak) {
  EXPECT_EQ(select_global_criterion({{0, 0.5, 0}, {0, 1, 0}, {1, 1, 0}}), 1u);
  EXPECT_EQ(select_global_criterion({{0, 0, 0}, {1, 1, 0}}), 0u);
  EXPECT_THROW(select_global_criterion({}), ValidationError);
}

TEST(GlobalCriterion, MatchesLinearScan) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto norm = normalize_front(pareto_front(cloud(rng, 2 + t % 30, t % 3 == 0)));
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t i = 0; i < norm.size(); ++i) {
      const double dist = std::hypot(norm[i].v, 1.0 - norm[i].u);
      if (dist < bd) {
        bd = dist;
        best = i;
      }
    }
    EXPECT_EQ(select_global_criterion(norm), best);
  }
}

TEST(Summarize, ShuffleInvariant) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    auto pts = cloud(rng, 25, t % 2 == 0);
    const FrontSummary a = summarize(pts);
    std::shuffle(pts.begin(), pts.end(), rng);
    const FrontSummary b = summarize(pts);
    ASSERT_EQ(a.front.size(), b.front.size());
    for (std::size_t i = 0; i < a.front.size(); ++i) {
      EXPECT_EQ(a.front[i].v, b.front[i].v);
      EXPECT_EQ(a.front[i].lambda, b.front[i].lambda);
    }
    EXPECT_EQ(a.hv.raw, b.hv.raw);
    EXPECT_EQ(a.selected, b.selected);
  }
}

TEST(Summarize, BoundsComeFromWholeSolutionSet) {
  // The dominated point sets the V maximum.
  const FrontSummary s = summarize({{0.1, 0.5, 0}, {0.2, 0.9, 0.1}, {0.5, 0.2, 0.2}});
  EXPECT_EQ(s.bounds.v_max, 0.5);
  EXPECT_EQ(s.bounds.u_min, 0.2);
  ASSERT_EQ(s.front.size(), 2u);
  EXPECT_NEAR(s.normalized[0].v, 0.0, 1e-15);
  EXPECT_NEAR(s.normalized[1].v, 0.25, 1e-15);
}
