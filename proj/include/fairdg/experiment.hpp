#pragma once

// Experiment configuration documents and the full sweep protocol: stage 1,
// one sweep per gamma candidate, gamma chosen on validation HVI, and a
// gamma = 0 baseline for comparison.

#include <cstdint>
#include <optional>

#include "fairdg/trainer.hpp"
#include "json.hpp"

namespace fairdg::trainer {

struct ExperimentConfig {
  SynthConfig synth;
  TrainConfig train;
  // Single-run settings for `train`.
  double lambda = 0.0;
  double gamma = 0.0;
  // Baseline gamma and HVI reference settings for `sweep`.
  double baseline_gamma = 0.0;
  pareto::FrontConfig front;
};

// Unknown keys and wrong types throw ConfigError. Missing keys keep defaults.
ExperimentConfig experiment_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json experiment_to_json(const ExperimentConfig& cfg);

// Seeds both the data generator and training.
void apply_seed(ExperimentConfig& cfg, std::uint64_t seed);

struct ExperimentResult {
  Stage1Result stage1;
  std::vector<SweepResult> candidates;  // gamma_grid order
  SweepResult baseline;
  GammaSelection selection;
  std::size_t selected_index = 0;
  double spearman_lambda_eod = 0.0;    // selected sweep, target domain
  double spearman_lambda_penalty = 0.0;  // selected sweep, validation penalty
  double hvi_tuned = 0.0;     // target HVI under bounds shared with the baseline
  double hvi_baseline = 0.0;

  const SweepResult& selected() const { return candidates[selected_index]; }
};

ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& cfg);

}  // namespace fairdg::trainer
