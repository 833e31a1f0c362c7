#pragma once

// Group-fairness metrics (EOD, EO) and accuracy on hard predictions.

#include <cstddef>
#include <optional>
#include <vector>

#include "fairdg/prob_core.hpp"

namespace fairdg::fairness {

struct EvalBatch {
  std::vector<std::size_t> y_true;
  std::vector<std::size_t> y_pred;
  std::vector<std::size_t> g;
  std::optional<std::vector<std::size_t>> d;
  // Declared cardinalities; 0 means infer as max id + 1.
  std::size_t num_labels = 0;
  std::size_t num_groups = 0;

  std::size_t size() const { return y_true.size(); }
  std::size_t labels() const;
  std::size_t groups() const;
  void validate() const;
};

// p_hat(yhat | y, g): row (y * |G| + g) holds |Y| frequencies.
struct PredDists {
  std::size_t num_labels = 0;
  std::size_t num_groups = 0;
  std::vector<double> probs;
  std::vector<std::size_t> counts;  // per (y, g)
  std::vector<bool> populated;      // counts > 0

  const double* row(std::size_t y, std::size_t g) const {
    return probs.data() + (y * num_groups + g) * num_labels;
  }
  bool has(std::size_t y, std::size_t g) const { return populated[y * num_groups + g]; }
};

struct GroupGap {
  double value = 0.0;
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;
};

PredDists conditional_pred_dists(const EvalBatch& batch);
GroupGap eod(const EvalBatch& batch);
GroupGap eo(const EvalBatch& batch);
double accuracy(const EvalBatch& batch);

// Empirical law of (yhat, y, d, g); without domain ids d has one value.
prob::ProbTable empirical_joint(const EvalBatch& batch);

}  // namespace fairdg::fairness
