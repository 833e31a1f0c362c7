#pragma once

// Small MLP stack with hand-written backprop for the four networks
// (encoder E, classifier C, domain encoder D, group encoder G) and the
// training objective
//   (1 - lambda) mean CE_bounded + lambda dCor(Z_G, Z_E | y, d)
//                                + gamma dCor(Z_D, Z_E | y).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fairdg::nn {

enum class Activation { kTanh, kRelu };

struct MLPParams {
  std::vector<std::size_t> dims;
  std::vector<Eigen::MatrixXd> weights;  // layer l: dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;
  Activation activation = Activation::kTanh;

  std::size_t layers() const { return weights.size(); }
  std::size_t input_dim() const { return dims.front(); }
  std::size_t output_dim() const { return dims.back(); }
  std::size_t num_params() const;
  std::vector<double> flat() const;
  void set_flat(const std::vector<double>& v);
  void validate() const;
};

// Uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MLPParams make_mlp(const std::vector<std::size_t>& dims, Activation act, std::uint64_t seed);

struct Trace {
  std::vector<Eigen::MatrixXd> inputs;  // input of each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
};

// Rows are samples. Activation on hidden layers only; the last layer is affine.
Eigen::MatrixXd forward_mlp(const MLPParams& p, const Eigen::MatrixXd& x, Trace* trace = nullptr);

struct MLPGrad {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MLPGrad zeros_like(const MLPParams& p);
  std::vector<double> flat() const;
  void add_scaled(const MLPGrad& other, double s);
};

// Parameter gradient given d loss / d output; optionally d loss / d input.
MLPGrad backward_mlp(const MLPParams& p, const Trace& trace, const Eigen::MatrixXd& d_out,
                     Eigen::MatrixXd* d_input = nullptr);

void sgd_step(MLPParams& p, const MLPGrad& g, double lr);

// softmax, then the floor transform. Throws ConfigError if the cap is too
// small for the number of classes.
std::vector<double> bounded_softmax(const std::vector<double>& logits, double cap);
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

struct SampleBatch {
  Eigen::MatrixXd x;
  std::vector<std::size_t> y, d, g;

  std::size_t size() const { return y.size(); }
  void validate() const;
  SampleBatch rows(const std::vector<std::size_t>& idx) const;
};

struct EncoderStack {
  MLPParams encoder;     // E: x (+ lambda) -> Z_E
  MLPParams classifier;  // C: Z_E -> logits
  MLPParams domain;      // D: x -> Z_D
  MLPParams group;       // G: x -> Z_G
  std::optional<MLPParams> domain_head;  // stage 1 only
  std::optional<MLPParams> group_head;
  bool domain_frozen = false;
  bool group_frozen = false;
  bool lambda_input = false;
  // The appended coordinate is lambda_scale * (lambda - 0.5).
  double lambda_scale = 1.0;

  std::size_t num_labels() const { return classifier.output_dim(); }
};

struct StackDims {
  std::size_t input = 0;
  std::size_t labels = 0;
  std::size_t domains = 0;
  std::size_t groups = 0;
  std::size_t hidden = 32;
  std::size_t z_e = 16;
  std::size_t z_d = 8;
  std::size_t z_g = 8;
  bool lambda_input = false;
  double lambda_scale = 10.0;
  Activation activation = Activation::kRelu;
};

EncoderStack make_stack(const StackDims& dims, std::uint64_t seed);

struct ObjectiveConfig {
  double lambda = 0.0;
  double gamma = 0.0;
  double cap = 1.0;
  double smoothing_eps = 1e-12;

  void validate() const;
};

// Frozen representations, reusable across steps once stage 1 is done.
struct FrozenReps {
  Eigen::MatrixXd z_d;
  Eigen::MatrixXd z_g;
};
FrozenReps frozen_reps(const EncoderStack& stack, const Eigen::MatrixXd& x);

struct ObjectiveTerms {
  double total = 0.0;
  double ce = 0.0;            // unweighted mean bounded CE
  double fairness = 0.0;      // unweighted dCor(Z_G, Z_E | y, d); 0 when lambda = 0
  double domain = 0.0;        // unweighted dCor(Z_D, Z_E | y); 0 when gamma = 0
  double cap_effective = 1.0;
  bool cap_raised = false;

  double weighted_ce = 0.0, weighted_fairness = 0.0, weighted_domain = 0.0;
};

struct StackGrad {
  MLPGrad encoder, classifier, domain, group;
};

// Encoder input: x, plus a lambda column when the stack is lambda-conditioned.
Eigen::MatrixXd encoder_input(const EncoderStack& stack, const Eigen::MatrixXd& x, double lambda);

ObjectiveTerms objective_value(const EncoderStack& stack, const SampleBatch& batch,
                               const ObjectiveConfig& cfg, const FrozenReps* frozen = nullptr);

// Exact gradient of the smoothed objective for trainable networks; frozen
// networks get exact zeros.
ObjectiveTerms backward(const EncoderStack& stack, const SampleBatch& batch,
                        const ObjectiveConfig& cfg, StackGrad& grad,
                        const FrozenReps* frozen = nullptr);

inline constexpr std::size_t kGradCheckMaxParams = 10'000;
// Relative error |a - f| / max(|a|, |f|, floor) uses this floor.
inline constexpr double kGradCheckFloor = 1e-6;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t params_checked = 0;
};

// Compares backward() with fourth-order central differences of step h on
// every trainable parameter.
GradCheckResult grad_check(const EncoderStack& stack, const SampleBatch& batch,
                           const ObjectiveConfig& cfg, double h = 1e-4);

// Predicted labels (argmax, lowest id on ties).
std::vector<std::size_t> predict(const EncoderStack& stack, const Eigen::MatrixXd& x,
                                 double lambda = 0.0);

std::string stack_to_json(const EncoderStack& stack);
EncoderStack stack_from_json(const std::string& text);

}  // namespace fairdg::nn
