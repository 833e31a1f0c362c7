#pragma once

// Exact verification of the risk and fairness bounds on finite instances.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fairdg/prob_core.hpp"

namespace fairdg::bounds {

inline constexpr double kSlackTolerance = 1e-9;
inline constexpr double kIdentityTolerance = 1e-10;

struct BoundReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  double slack = 0.0;
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, double>> extras;
  std::map<std::string, std::string> meta;

  double term_sum() const;
};

enum class LossKind { kBoundedCrossEntropy, kZeroOne };

struct BoundedLoss {
  double cap = 1.0;
  LossKind kind = LossKind::kBoundedCrossEntropy;
};

// How the prediction variable is read off the channel.
//   kSampled: yhat drawn from the channel row (axis size |Y|).
//   kSoft:    the row itself, i.e. the class of inputs sharing a row.
enum class PredictionConvention { kSampled, kSoft };

// Joint law of (prediction, y, d, g) plus the predicted distribution
// attached to each prediction value.
struct PredictionLaw {
  prob::ProbTable table;
  std::vector<std::vector<double>> rows;
};

PredictionLaw prediction_law(const prob::FiniteJoint& joint, const prob::Channel& ch,
                             PredictionConvention convention);

// Cap actually used for a loss over `num_classes` labels: the requested cap,
// raised to ln(2|Y|) for cross-entropy when the floor construction needs it.
double effective_cap(const BoundedLoss& loss, std::size_t num_classes);

// Loss of predicting `row` when the label is y.
double loss_value(const BoundedLoss& loss, std::span<const double> row, std::size_t y);

// E[L] under the law conditioned on D in `domains`.
double expected_risk(const PredictionLaw& law, const BoundedLoss& loss,
                     std::span<const std::size_t> domains);
// Sampled-label convenience: joint4 axis 0 holds label predictions.
double expected_risk(const prob::ProbTable& joint4, const BoundedLoss& loss,
                     std::span<const std::size_t> domains);

struct EodResult {
  double value = 0.0;
  std::size_t pairs_used = 0;
  std::vector<std::array<std::size_t, 3>> skipped;  // (y, g, g')
};

EodResult eod_violation_exact(const prob::ProbTable& joint4,
                              std::span<const std::size_t> domains);

BoundReport verify_theorem1(const prob::FiniteJoint& joint, const prob::Channel& ch,
                            const BoundedLoss& loss,
                            PredictionConvention convention = PredictionConvention::kSoft);
BoundReport verify_theorem2(const prob::FiniteJoint& joint, const prob::Channel& ch);
BoundReport verify_theorem3(const prob::FiniteJoint& joint, const prob::Channel& ch,
                            const BoundedLoss& loss = {});
std::vector<BoundReport> verify_theorem4(const prob::FiniteJoint& joint,
                                         const prob::Channel& ch);

struct Lemma1Instance {
  std::vector<double> f;  // function values on a common support
  double cap = 1.0;
  std::vector<double> p;
  std::vector<double> q;
};
struct Lemma3Instance {
  std::vector<double> pj, pj_prime, pi, pi_prime;
};
// L2 takes a 2-way joint (X, Y); L4 a 4-way joint (X, Y, D, G).
using LemmaInstance = std::variant<Lemma1Instance, prob::ProbTable, Lemma3Instance>;

BoundReport verify_lemma(int k, const LemmaInstance& instance);

// Lemma instances induced by a bound-verification instance, in the form the
// proofs use them.
std::vector<BoundReport> verify_lemmas(const prob::FiniteJoint& joint, const prob::Channel& ch,
                                       const BoundedLoss& loss);

struct RandomInstance {
  prob::FiniteJoint joint;
  prob::Channel channel;
  BoundedLoss loss;
  std::uint64_t seed = 0;
};

struct InstanceLimits {
  std::size_t max_x = 6, max_y = 4, max_d = 4, max_g = 3;
};

RandomInstance random_instance(std::uint64_t seed, const InstanceLimits& limits = {});

// Every check on one instance: T1, T2, T3, T4a-c, L1-L4.
std::vector<BoundReport> verify_all(const prob::FiniteJoint& joint, const prob::Channel& ch,
                                    const BoundedLoss& loss);

// Runs `count` random instances with seeds derived from `seed`. Results keep
// instance order regardless of `threads`.
std::vector<BoundReport> run_harness(std::size_t count, std::uint64_t seed,
                                     std::size_t threads = 1,
                                     const InstanceLimits& limits = {});

}  // namespace fairdg::bounds
