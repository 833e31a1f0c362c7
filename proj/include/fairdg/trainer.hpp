#pragma once

// Synthetic multi-domain data, two-stage training, lambda sweeps and
// target-domain evaluation.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fairdg/nn.hpp"
#include "fairdg/pareto.hpp"

namespace fairdg::trainer {

struct SynthConfig {
  std::size_t n_per_domain = 3000;
  std::size_t feature_dim = 4;   // label-relevant block
  std::size_t spurious_dim = 4;  // label x domain dependent block
  std::size_t domain_dim = 4;    // domain identity block
  std::size_t num_labels = 3;
  std::size_t num_groups = 3;
  std::size_t num_sources = 3;
  double domain_shift_strength = 1.5;
  double group_bias_strength = 0.6;
  double class_separation = 1.5;
  std::uint64_t seed = 0;

  std::size_t total_dim() const { return feature_dim + spurious_dim + num_groups + domain_dim; }
  void validate() const;
};

// Domains are ordered sources 0..S-1, then validation, then target. Every
// batch carries its own domain id in `d`.
struct Dataset {
  std::vector<nn::SampleBatch> domains;
  std::size_t num_sources = 0;
  std::size_t num_labels = 0;
  std::size_t num_groups = 0;

  const nn::SampleBatch& validation() const { return domains[num_sources]; }
  const nn::SampleBatch& target() const { return domains[num_sources + 1]; }
  nn::SampleBatch sources() const;
};

Dataset generate_synthetic(const SynthConfig& cfg);

enum class SweepMode { kPerLambda, kLossConditional };

struct TrainConfig {
  std::size_t stage1_epochs = 40;
  std::size_t stage2_epochs = 30;
  std::size_t batch_size = 256;
  double learning_rate = 0.05;
  double weight_decay = 0.0;  // decoupled L2 on E and C weights in stage 2
  double stage1_learning_rate = 0.2;
  double stage1_weight_decay = 1e-2;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::vector<double> gamma_grid = {1, 2, 4, 7, 10};
  SweepMode mode = SweepMode::kLossConditional;
  double cap = 1.0;
  double smoothing_eps = 1e-12;
  bool best_epoch = false;  // keep the best validation-accuracy epoch instead of the last
  bool log_epochs = true;
  std::size_t penalty_rows = 600;  // validation rows used for the dCor penalty readout
  nn::StackDims dims;      // input/labels/domains/groups are filled from the data
  std::uint64_t seed = 0;

  static std::vector<double> default_lambda_grid(std::size_t n = 100);
  void validate() const;
};

struct Stage1Result {
  nn::EncoderStack stack;  // D and G trained and frozen, heads dropped
  double domain_accuracy = 0.0;
  double group_accuracy = 0.0;
  std::size_t domain_epochs = 0;  // first epoch at 99% training accuracy, 0 if never
  std::size_t group_epochs = 0;
  bool converged = false;  // both heads reached 99% training accuracy
};

Stage1Result stage1_train(const Dataset& data, const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  double objective = 0.0;  // mean minibatch objective
  double val_accuracy = 0.0;
  double val_eod = 0.0;
};

struct Stage2Result {
  nn::EncoderStack stack;
  std::vector<EpochLog> curve;
  std::size_t skipped_batches = 0;
};

// Seed for the run keyed by lambda (for per-lambda runs) or by gamma.
std::uint64_t run_seed(std::uint64_t seed, double key);

// The full objective with fixed lambda, gamma, on source data only. E and C are
// initialised from run_seed(cfg.seed, lambda).
Stage2Result stage2_train(const Dataset& data, const Stage1Result& stage1, const TrainConfig& cfg,
                          double lambda, double gamma);

// One lambda-conditioned model: lambda is appended to the encoder input and
// drawn uniformly from the grid for every minibatch.
Stage2Result train_loss_conditional(const Dataset& data, const Stage1Result& stage1,
                                    const TrainConfig& cfg, double gamma);

// Plain bounded-CE training of E and C without the stage-1 networks.
Stage2Result train_erm(const Dataset& data, const TrainConfig& cfg);

struct Evaluation {
  double accuracy = 0.0;
  double eod = 0.0;
  double eo = 0.0;
};

Evaluation evaluate_target(const nn::EncoderStack& model, const nn::SampleBatch& batch,
                           double lambda = 0.0);

struct SweepPoint {
  double lambda = 0.0;
  Evaluation target;
  Evaluation validation;
  double val_fairness_penalty = 0.0;  // dCor(Z_G, Z_E | y, d) on the validation domain
};

struct SweepResult {
  double gamma = 0.0;
  std::vector<SweepPoint> points;
  std::vector<Stage2Result> runs;  // one per lambda, or a single conditional model
};

SweepResult sweep(const Dataset& data, const Stage1Result& stage1, const TrainConfig& cfg,
                  double gamma);

// (V = target EOD, U = target accuracy, lambda); validation variant likewise.
std::vector<pareto::TradeoffPoint> target_points(const SweepResult& s);
std::vector<pareto::TradeoffPoint> validation_points(const SweepResult& s);

struct GammaSelection {
  double gamma = 0.0;
  std::vector<double> val_hvi;  // HVI percent per gamma_grid entry, common bounds
};

// Best validation HVI, normalised with bounds over every candidate's points.
GammaSelection select_gamma(const std::vector<SweepResult>& candidates);

// Spearman rank correlation with average ranks for ties; 0 if either side
// is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// HVI percent of two fronts under bounds taken from their union.
std::pair<double, double> compare_hvi(const std::vector<pareto::TradeoffPoint>& a,
                                      const std::vector<pareto::TradeoffPoint>& b,
                                      const pareto::FrontConfig& cfg = {});

// Threads used for independent runs: hardware concurrency, capped by
// FAIRDG_THREADS.
std::size_t thread_budget();

}  // namespace fairdg::trainer
