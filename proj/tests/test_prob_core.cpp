#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "fairdg/errors.hpp"
#include "fairdg/prob_core.hpp"
#include "oracles.hpp"

using namespace fairdg;
using namespace fairdg::prob;

namespace {

ProbTable random_table(std::mt19937_64& rng, std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return ProbTable(shape, oracle::dirichlet(rng, n));
}

oracle::Matrix as_matrix(const ProbTable& t) {
  oracle::Matrix m(t.shape()[0], std::vector<double>(t.shape()[1]));
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t b = 0; b < m[a].size(); ++b) {
      const std::array<std::size_t, 2> i{a, b};
      m[a][b] = t.at(i);
    }
  return m;
}

FiniteJoint random_joint(std::mt19937_64& rng, std::size_t nx, std::size_t ny, std::size_t nd,
                         std::size_t ng) {
  FiniteJoint j;
  j.probs = random_table(rng, {nx, ny, nd, ng});
  for (std::size_t d = 0; d + 1 < nd; ++d) j.source_domains.push_back(d);
  j.target_domain = nd - 1;
  return j;
}

Channel random_channel(std::mt19937_64& rng, std::size_t nx, std::size_t ny) {
  Channel c;
  c.nx = nx;
  c.ny = ny;
  for (std::size_t x = 0; x < nx; ++x)
    for (double v : oracle::dirichlet(rng, ny)) c.cond.push_back(v);
  return c;
}

}  // namespace

TEST(TvDistance, HandValues) {
  const std::vector<double> h{0.5, 0.5}, a{1.0, 0.0}, b{0.0, 1.0};
  EXPECT_EQ(tv_distance(h, h), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance(a, b), 1.0);
  EXPECT_DOUBLE_EQ(tv_distance(h, a), 0.5);
}

TEST(TvDistance, RejectsBadInput) {
  const std::vector<double> p{0.5, 0.5}, q{0.2, 0.3, 0.5}, bad{0.7, 0.7};
  EXPECT_THROW(tv_distance(p, q), ValidationError);
  EXPECT_THROW(tv_distance(p, bad), ValidationError);
}

TEST(TvDistance, TriangleAndPinsker) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const std::size_t k = 2 + t % 5;
    const auto p = oracle::dirichlet(rng, k), q = oracle::dirichlet(rng, k), m = oracle::dirichlet(rng, k);
    EXPECT_LE(tv_distance(p, q), tv_distance(p, m) + tv_distance(m, q) + 1e-12);
    EXPECT_LE(tv_distance(p, q), std::sqrt(kl_divergence(p, q) / 2.0) + 1e-12);
    EXPECT_EQ(tv_distance(p, q), tv_distance(q, p));
  }
}

TEST(KlDivergence, ZeroReferenceMassRejected) {
  const std::vector<double> p{0.5, 0.5}, q{1.0, 0.0};
  EXPECT_THROW(kl_divergence(p, q), ValidationError);
  EXPECT_DOUBLE_EQ(kl_divergence(q, p), std::log(2.0));
}

TEST(Entropy, ClosedForms) {
  EXPECT_EQ(entropy(std::vector<double>{0.0, 1.0, 0.0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>{0.5, 0.5}), 0.693147180559945, 1e-15);
  for (std::size_t k = 2; k <= 9; ++k)
    EXPECT_NEAR(entropy(std::vector<double>(k, 1.0 / static_cast<double>(k))), std::log(static_cast<double>(k)), 1e-14);
  EXPECT_THROW(entropy(std::vector<double>{1.2, -0.2}), ValidationError);
}

TEST(ConditionalEntropy, IndependentAndFunctional) {
  // independent: p(a, c) = p(a) p(c)
  const std::vector<double> pa{0.2, 0.3, 0.5}, pc{0.6, 0.4};
  std::vector<double> v;
  for (double a : pa)
    for (double c : pc) v.push_back(a * c);
  EXPECT_NEAR(conditional_entropy(ProbTable({3, 2}, v)), entropy(pa), 1e-14);
  EXPECT_NEAR(conditional_entropy(ProbTable({2, 2}, {0.3, 0.0, 0.0, 0.7})), 0.0, 1e-15);
}

TEST(ConditionalEntropy, TwoByTwoByEnumeration) {
  const ProbTable t({2, 2}, {0.4, 0.1, 0.1, 0.4});
  // Both columns have mass 0.5 and conditional (0.8, 0.2).
  const double expected = -(0.8 * std::log(0.8) + 0.2 * std::log(0.2));
  EXPECT_NEAR(conditional_entropy(t), expected, 1e-15);
  EXPECT_NEAR(conditional_entropy(t), oracle::cond_entropy2(as_matrix(t)), 1e-15);
}

TEST(MutualInformation, ProductIdentityAndSymmetry) {
  EXPECT_NEAR(mutual_information(ProbTable({2, 3}, {0.06, 0.09, 0.15, 0.14, 0.21, 0.35})), 0.0, 1e-12);
  EXPECT_NEAR(mutual_information(ProbTable({2, 2}, {0.5, 0.0, 0.0, 0.5})), std::log(2.0), 1e-15);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const ProbTable p = random_table(rng, {2u + t % 4, 2u + t % 3});
    const double i = mutual_information(p);
    EXPECT_NEAR(i, mutual_information(p.marginal({1, 0})), 1e-12);
    EXPECT_NEAR(i, oracle::mi2(as_matrix(p)), 1e-12);
    EXPECT_GE(i, 0.0);
  }
}

TEST(ConditionalMutualInformation, ChainRuleOnRandomJoints) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const ProbTable p = random_table(rng, {2u + t % 3, 2u + t % 4, 2u + t % 2});
    // I(A; B, C) = I(A; C) + I(A; B | C)
    const double lhs = mutual_information(p.grouped({{0}, {1, 2}}));
    const double rhs = mutual_information(p.marginal({0, 2})) + conditional_mutual_information(p);
    EXPECT_NEAR(lhs, rhs, 1e-10);

    std::vector<oracle::Matrix> m(p.shape()[0], oracle::Matrix(p.shape()[1], std::vector<double>(p.shape()[2])));
    for (std::size_t a = 0; a < p.shape()[0]; ++a)
      for (std::size_t b = 0; b < p.shape()[1]; ++b)
        for (std::size_t c = 0; c < p.shape()[2]; ++c) {
          const std::array<std::size_t, 3> i{a, b, c};
          m[a][b][c] = p.at(i);
        }
    EXPECT_NEAR(conditional_mutual_information(p), oracle::cmi3(m), 1e-12);
  }
}

TEST(ConditionalMutualInformation, ConditionalIndependenceAndTrivialC) {
  // p(a, b, c) = p(c) p(a|c) p(b|c)
  const std::vector<double> pc{0.3, 0.7};
  const std::vector<std::vector<double>> pa{{0.2, 0.8}, {0.6, 0.4}}, pb{{0.1, 0.5, 0.4}, {0.3, 0.3, 0.4}};
  std::vector<double> v;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 2; ++c) v.push_back(pc[c] * pa[c][a] * pb[c][b]);
  EXPECT_NEAR(conditional_mutual_information(ProbTable({2, 3, 2}, v)), 0.0, 1e-12);

  std::mt19937_64 rng(3);
  const ProbTable ab = random_table(rng, {3, 4});
  std::vector<double> w(ab.values().begin(), ab.values().end());
  EXPECT_NEAR(conditional_mutual_information(ProbTable({3, 4, 1}, w)), mutual_information(ab), 1e-14);
}

TEST(PushChannel, IdentityConstantAndRandom) {
  std::mt19937_64 rng(21);
  const FiniteJoint j = random_joint(rng, 3, 3, 3, 2);
  const ProbTable id = push_channel(j, Channel::identity(3));
  // With the identity channel yhat equals x.
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t g = 0; g < 2; ++g) {
          const std::array<std::size_t, 4> i{x, y, d, g};
          EXPECT_DOUBLE_EQ(id.at(i), j.probs.at(i));
        }
  const ProbTable c = push_channel(j, Channel::constant(3, 3, 0));
  const ProbTable yhat = c.marginal({0});
  EXPECT_NEAR(yhat.values()[0], 1.0, 1e-12);
  EXPECT_EQ(yhat.values()[1], 0.0);

  for (int t = 0; t < 50; ++t) {
    const FiniteJoint r = random_joint(rng, 2 + t % 5, 2 + t % 3, 3, 2);
    const ProbTable out = push_channel(r, random_channel(rng, r.nx(), r.ny()));
    EXPECT_NEAR(out.total(), 1.0, 1e-12);
  }
  EXPECT_THROW(push_channel(j, Channel::identity(4)), ValidationError);
}

TEST(DataProcessing, ChannelCannotAddDomainInformation) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 300; ++t) {
    const FiniteJoint j = random_joint(rng, 2 + t % 5, 2 + t % 3, 3 + t % 2, 2);
    const ProbTable law = push_channel(j, random_channel(rng, j.nx(), j.ny()));
    const double i_yhat = mutual_information(law.marginal({2, 0}));
    const double i_x = mutual_information(j.probs.marginal({2, 0}));
    EXPECT_LE(i_yhat, i_x + 1e-10);
  }
}

TEST(FiniteJoint, ValidatesRolesAndMass) {
  std::mt19937_64 rng(2);
  FiniteJoint j = random_joint(rng, 2, 2, 3, 2);
  EXPECT_NO_THROW(j.validate());
  FiniteJoint one_source = j;
  one_source.source_domains = {0};
  EXPECT_THROW(one_source.validate(), ValidationError);
  FiniteJoint overlap = j;
  overlap.target_domain = 0;
  EXPECT_THROW(overlap.validate(), ValidationError);
  FiniteJoint heavy = j;
  heavy.probs.mutable_values()[0] += 1e-9;
  EXPECT_THROW(heavy.validate(), ValidationError);
}

TEST(Channel, DeterministicRowsMustBeOneHot) {
  Channel c{2, 2, {0.5, 0.5, 1.0, 0.0}, true};
  EXPECT_THROW(c.validate(), ValidationError);
  c.deterministic = false;
  EXPECT_NO_THROW(c.validate());
}

TEST(ProbTable, MarginalsAreDistributions) {
  std::mt19937_64 rng(9);
  const ProbTable t = random_table(rng, {3, 2, 4, 2});
  for (const auto& keep : std::vector<std::vector<std::size_t>>{{0}, {1, 3}, {3, 0, 2}, {2}}) {
    const ProbTable m = t.marginal(std::span<const std::size_t>(keep));
    EXPECT_NO_THROW(m.validate_distribution(1e-12));
    EXPECT_EQ(m.rank(), keep.size());
  }
}

TEST(ProbTable, ConditionalAndRestrict) {
  const ProbTable t({2, 2}, {0.1, 0.3, 0.2, 0.4});
  const std::array<std::pair<std::size_t, std::size_t>, 1> fix{{{1, 1}}};
  const auto c = conditional(t, 0, fix);
  EXPECT_NEAR(c[0], 0.3 / 0.7, 1e-15);
  EXPECT_NEAR(c[1], 0.4 / 0.7, 1e-15);
  const std::array<std::size_t, 1> keep{0};
  const ProbTable r = restrict_axis(t, 1, keep);
  EXPECT_NEAR(r.values()[0], 1.0 / 3.0, 1e-15);
  const ProbTable z({2, 2}, {0.5, 0.0, 0.5, 0.0});
  EXPECT_THROW(restrict_axis(z, 1, std::array<std::size_t, 1>{1}), DegenerateError);
}

TEST(ProbTable, RelabelingPreservesInformation) {
  std::mt19937_64 rng(4);
  const ProbTable t = random_table(rng, {3, 4});
  const std::array<std::size_t, 3> perm{2, 0, 1};
  EXPECT_NEAR(mutual_information(t.relabeled(0, perm)), mutual_information(t), 1e-14);
}
