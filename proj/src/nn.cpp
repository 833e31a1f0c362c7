#include "fairdg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fairdg/bounded_ce.hpp"
#include "fairdg/dependence.hpp"
#include "fairdg/errors.hpp"
#include "fairdg/rng.hpp"
#include "json.hpp"

namespace fairdg::nn {
namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::kTanh) return z.array().tanh().matrix();
  return z.cwiseMax(0.0);
}

Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::kTanh) return (1.0 - z.array().tanh().square()).matrix();
  return (z.array() > 0.0).cast<double>().matrix();
}

}  // namespace

std::size_t MLPParams::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  return n;
}

std::vector<double> MLPParams::flat() const {
  std::vector<double> v;
  v.reserve(num_params());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) v.push_back(weights[l](i, j));
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) v.push_back(biases[l](i));
  }
  return v;
}

void MLPParams::set_flat(const std::vector<double>& v) {
  if (v.size() != num_params()) throw ValidationError("parameter vector has wrong length");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) weights[l](i, j) = v[k++];
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l](i) = v[k++];
  }
}

void MLPParams::validate() const {
  if (dims.size() < 2 || weights.size() != dims.size() - 1 || biases.size() != weights.size())
    throw ValidationError("MLP layer structure inconsistent");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != static_cast<Eigen::Index>(dims[l + 1]) ||
        weights[l].cols() != static_cast<Eigen::Index>(dims[l]) ||
        biases[l].size() != static_cast<Eigen::Index>(dims[l + 1]))
      throw ValidationError("MLP layer " + std::to_string(l) + " has incompatible shape");
    if (!weights[l].allFinite() || !biases[l].allFinite())
      throw ValidationError("MLP has non-finite parameters");
  }
}

MLPParams make_mlp(const std::vector<std::size_t>& dims, Activation act, std::uint64_t seed) {
  if (dims.size() < 2) throw ValidationError("an MLP needs at least input and output sizes");
  for (auto d : dims)
    if (d == 0) throw ValidationError("MLP layer size must be positive");
  MLPParams p;
  p.dims = dims;
  p.activation = act;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        w(i, j) = (2.0 * u - 1.0) * bound;
      }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[l + 1])));
  }
  return p;
}

Eigen::MatrixXd forward_mlp(const MLPParams& p, const Eigen::MatrixXd& x, Trace* trace) {
  if (x.cols() != static_cast<Eigen::Index>(p.input_dim()))
    throw ValidationError("input has " + std::to_string(x.cols()) + " columns, network expects " +
                          std::to_string(p.input_dim()));
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    Eigen::MatrixXd z = h * p.weights[l].transpose();
    z.rowwise() += p.biases[l].transpose();
    if (trace) {
      trace->inputs.push_back(h);
      trace->pre.push_back(z);
    }
    h = l + 1 < p.layers() ? activate(z, p.activation) : std::move(z);
  }
  return h;
}

MLPGrad MLPGrad::zeros_like(const MLPParams& p) {
  MLPGrad g;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
  }
  return g;
}

std::vector<double> MLPGrad::flat() const {
  std::vector<double> v;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) v.push_back(weights[l](i, j));
    for (Eigen::Index i = 0; i < biases[l].size(); ++i) v.push_back(biases[l](i));
  }
  return v;
}

void MLPGrad::add_scaled(const MLPGrad& other, double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += s * other.weights[l];
    biases[l] += s * other.biases[l];
  }
}

MLPGrad backward_mlp(const MLPParams& p, const Trace& trace, const Eigen::MatrixXd& d_out,
                     Eigen::MatrixXd* d_input) {
  MLPGrad g = MLPGrad::zeros_like(p);
  Eigen::MatrixXd delta = d_out;  // d loss / d pre-activation of the current layer
  for (std::size_t l = p.layers(); l-- > 0;) {
    g.weights[l] = delta.transpose() * trace.inputs[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0 && !d_input) break;
    Eigen::MatrixXd d_h = delta * p.weights[l];
    if (l == 0) {
      *d_input = std::move(d_h);
      break;
    }
    delta = d_h.cwiseProduct(activation_grad(trace.pre[l - 1], p.activation));
  }
  return g;
}

void sgd_step(MLPParams& p, const MLPGrad& g, double lr) {
  for (std::size_t l = 0; l < p.layers(); ++l) {
    p.weights[l] -= lr * g.weights[l];
    p.biases[l] -= lr * g.biases[l];
  }
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    p.row(i).array() -= p.row(i).maxCoeff();
    p.row(i) = p.row(i).array().exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

std::vector<double> bounded_softmax(const std::vector<double>& logits, double cap) {
  if (logits.empty()) throw ValidationError("bounded_softmax: empty logits");
  for (double z : logits)
    if (!std::isfinite(z)) throw ValidationError("bounded_softmax: non-finite logit");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] = std::exp(logits[i] - m));
  for (auto& v : p) v /= sum;
  floor_distribution(p, cap);
  return p;
}

void SampleBatch::validate() const {
  const auto n = static_cast<std::size_t>(x.rows());
  if (y.size() != n || d.size() != n || g.size() != n)
    throw ValidationError("batch columns differ in length");
  if (n == 0) throw ValidationError("empty batch");
  if (!x.allFinite()) throw ValidationError("batch has non-finite features");
}

SampleBatch SampleBatch::rows(const std::vector<std::size_t>& idx) const {
  SampleBatch b;
  b.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    b.x.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
    b.y.push_back(y[idx[r]]);
    b.d.push_back(d[idx[r]]);
    b.g.push_back(g[idx[r]]);
  }
  return b;
}

EncoderStack make_stack(const StackDims& s, std::uint64_t seed) {
  if (!s.input || !s.labels || !s.domains || !s.groups)
    throw ValidationError("stack dimensions must be positive");
  EncoderStack st;
  const std::size_t e_in = s.input + (s.lambda_input ? 1 : 0);
  st.encoder = make_mlp({e_in, s.hidden, s.z_e}, s.activation, derive_seed(seed, 1));
  st.classifier = make_mlp({s.z_e, s.hidden, s.labels}, s.activation, derive_seed(seed, 2));
  st.domain = make_mlp({s.input, s.hidden, s.z_d}, s.activation, derive_seed(seed, 3));
  st.group = make_mlp({s.input, s.hidden, s.z_g}, s.activation, derive_seed(seed, 4));
  st.domain_head = make_mlp({s.z_d, s.domains}, s.activation, derive_seed(seed, 5));
  st.group_head = make_mlp({s.z_g, s.groups}, s.activation, derive_seed(seed, 6));
  st.lambda_input = s.lambda_input;
  st.lambda_scale = s.lambda_scale;
  return st;
}

void ObjectiveConfig::validate() const {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in [0, 1)");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be non-negative");
  if (!(cap > 0.0)) throw ConfigError("loss cap must be positive");
  if (!(smoothing_eps >= 0.0)) throw ConfigError("smoothing epsilon must be non-negative");
}

FrozenReps frozen_reps(const EncoderStack& stack, const Eigen::MatrixXd& x) {
  return {forward_mlp(stack.domain, x), forward_mlp(stack.group, x)};
}

Eigen::MatrixXd encoder_input(const EncoderStack& stack, const Eigen::MatrixXd& x, double lambda) {
  if (!stack.lambda_input) return x;
  Eigen::MatrixXd in(x.rows(), x.cols() + 1);
  in.leftCols(x.cols()) = x;
  in.col(x.cols()).setConstant(stack.lambda_scale * (lambda - 0.5));
  return in;
}

namespace {

struct RegTerm {
  double value = 0.0;
  Eigen::MatrixXd grad_rep;  // d value / d (Z_D or Z_G)
  Eigen::MatrixXd grad_ze;
};

RegTerm dcor_term(const Eigen::MatrixXd& z, const Eigen::MatrixXd& ze,
                  const std::vector<std::vector<std::size_t>>& cells, double eps, bool need_grad) {
  RegTerm t;
  if (need_grad) {
    auto r = dependence::smoothed_dcor_with_grad(z, ze, cells, eps);
    if (r.sums.cells_used == 0)
      throw DegenerateError("batch has no partition cell with two or more samples");
    t.value = r.value;
    t.grad_rep = std::move(r.grad_a);
    t.grad_ze = std::move(r.grad_b);
  } else {
    const auto s = dependence::partition_sums(z, ze, cells, eps);
    if (s.cells_used == 0)
      throw DegenerateError("batch has no partition cell with two or more samples");
    t.value = s.correlation();
  }
  return t;
}

ObjectiveTerms evaluate(const EncoderStack& stack, const SampleBatch& batch,
                        const ObjectiveConfig& cfg, StackGrad* grad, const FrozenReps* frozen) {
  cfg.validate();
  batch.validate();
  const auto n = static_cast<double>(batch.size());
  const std::size_t k = stack.num_labels();
  for (auto y : batch.y)
    if (y >= k) throw ValidationError("label id exceeds classifier outputs");

  Trace te, tc;
  const Eigen::MatrixXd ze = forward_mlp(stack.encoder, encoder_input(stack, batch.x, cfg.lambda),
                                         grad ? &te : nullptr);
  const Eigen::MatrixXd logits = forward_mlp(stack.classifier, ze, grad ? &tc : nullptr);

  ObjectiveTerms out;
  const auto cap = resolve_cap(cfg.cap, k);
  out.cap_effective = cap.cap;
  out.cap_raised = cap.raised;
  const double floor = std::exp(-cap.cap);
  const double scale = 1.0 - static_cast<double>(k) * floor;

  const Eigen::MatrixXd p = softmax_rows(logits);
  Eigen::MatrixXd d_logits;
  if (grad) d_logits = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  double ce = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const auto y = static_cast<Eigen::Index>(batch.y[static_cast<std::size_t>(i)]);
    const double ph = p(i, y) * scale + floor;
    ce += -std::log(ph);
    if (grad) {
      const double coef = -(1.0 - cfg.lambda) / n * scale * p(i, y) / ph;
      d_logits.row(i) = -coef * p.row(i);
      d_logits(i, y) += coef;
    }
  }
  out.ce = ce / n;
  out.weighted_ce = (1.0 - cfg.lambda) * out.ce;

  Eigen::MatrixXd d_ze;
  if (grad) d_ze = Eigen::MatrixXd::Zero(ze.rows(), ze.cols());

  // Regularizers are skipped entirely at zero weight so that the
  // lambda = gamma = 0 objective is plain ERM bit for bit.
  auto regularize = [&](double weight, const MLPParams& net, bool is_frozen,
                        const Eigen::MatrixXd* cached, const std::vector<std::size_t>* dom,
                        MLPGrad* net_grad, double& term, double& weighted) {
    if (weight == 0.0) return;
    Trace tn;
    const bool train_net = grad && !is_frozen;
    Eigen::MatrixXd z;
    if (cached && is_frozen)
      z = *cached;
    else
      z = forward_mlp(net, batch.x, train_net ? &tn : nullptr);
    const auto cells = dependence::partition_cells(batch.y, dom);
    const RegTerm r = dcor_term(z, ze, cells, cfg.smoothing_eps, grad != nullptr);
    term = r.value;
    weighted = weight * r.value;
    if (!grad) return;
    d_ze += weight * r.grad_ze;
    if (train_net) *net_grad = backward_mlp(net, tn, weight * r.grad_rep);
  };

  if (grad) {
    grad->domain = MLPGrad::zeros_like(stack.domain);
    grad->group = MLPGrad::zeros_like(stack.group);
  }
  regularize(cfg.lambda, stack.group, stack.group_frozen, frozen ? &frozen->z_g : nullptr,
             &batch.d, grad ? &grad->group : nullptr, out.fairness, out.weighted_fairness);
  regularize(cfg.gamma, stack.domain, stack.domain_frozen, frozen ? &frozen->z_d : nullptr,
             nullptr, grad ? &grad->domain : nullptr, out.domain, out.weighted_domain);
  out.total = out.weighted_ce + out.weighted_fairness + out.weighted_domain;

  if (grad) {
    Eigen::MatrixXd d_ze_c;
    grad->classifier = backward_mlp(stack.classifier, tc, d_logits, &d_ze_c);
    if (cfg.lambda != 0.0 || cfg.gamma != 0.0) d_ze_c += d_ze;
    grad->encoder = backward_mlp(stack.encoder, te, d_ze_c);
  }
  return out;
}

}  // namespace

ObjectiveTerms objective_value(const EncoderStack& stack, const SampleBatch& batch,
                               const ObjectiveConfig& cfg, const FrozenReps* frozen) {
  return evaluate(stack, batch, cfg, nullptr, frozen);
}

ObjectiveTerms backward(const EncoderStack& stack, const SampleBatch& batch,
                        const ObjectiveConfig& cfg, StackGrad& grad, const FrozenReps* frozen) {
  return evaluate(stack, batch, cfg, &grad, frozen);
}

GradCheckResult grad_check(const EncoderStack& stack, const SampleBatch& batch,
                           const ObjectiveConfig& cfg, double h) {
  std::size_t trainable = stack.encoder.num_params() + stack.classifier.num_params();
  if (!stack.domain_frozen) trainable += stack.domain.num_params();
  if (!stack.group_frozen) trainable += stack.group.num_params();
  if (trainable > kGradCheckMaxParams)
    throw ContractError("grad_check is limited to networks with at most 1e4 parameters");

  StackGrad g;
  backward(stack, batch, cfg, g);
  GradCheckResult res;
  EncoderStack probe = stack;
  auto check = [&](MLPParams EncoderStack::*member, const MLPGrad& analytic) {
    const std::vector<double> base = (stack.*member).flat();
    const std::vector<double> a = analytic.flat();
    std::vector<double> v = base;
    auto at = [&](std::size_t i, double step) {
      v[i] = base[i] + step;
      (probe.*member).set_flat(v);
      v[i] = base[i];
      return objective_value(probe, batch, cfg).total;
    };
    for (std::size_t i = 0; i < v.size(); ++i) {
      // Fourth-order central stencil.
      const double fd = (8.0 * (at(i, h) - at(i, -h)) - (at(i, 2.0 * h) - at(i, -2.0 * h))) / (12.0 * h);
      const double denom = std::max({std::abs(a[i]), std::abs(fd), kGradCheckFloor});
      res.max_rel_error = std::max(res.max_rel_error, std::abs(a[i] - fd) / denom);
      ++res.params_checked;
    }
    (probe.*member).set_flat(base);
  };
  check(&EncoderStack::encoder, g.encoder);
  check(&EncoderStack::classifier, g.classifier);
  if (!stack.domain_frozen) check(&EncoderStack::domain, g.domain);
  if (!stack.group_frozen) check(&EncoderStack::group, g.group);
  return res;
}

std::vector<std::size_t> predict(const EncoderStack& stack, const Eigen::MatrixXd& x,
                                 double lambda) {
  const Eigen::MatrixXd logits =
      forward_mlp(stack.classifier, forward_mlp(stack.encoder, encoder_input(stack, x, lambda)));
  std::vector<std::size_t> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

namespace {

using nlohmann::ordered_json;
constexpr int kCheckpointVersion = 1;

ordered_json mlp_json(const MLPParams& p) {
  ordered_json j;
  j["dims"] = p.dims;
  j["activation"] = p.activation == Activation::kTanh ? "tanh" : "relu";
  ordered_json w = ordered_json::array(), b = ordered_json::array();
  for (std::size_t l = 0; l < p.layers(); ++l) {
    std::vector<double> wl, bl;
    for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) wl.push_back(p.weights[l](r, c));
    for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) bl.push_back(p.biases[l](r));
    w.push_back(wl);
    b.push_back(bl);
  }
  j["weights"] = w;
  j["biases"] = b;
  return j;
}

MLPParams mlp_from_json(const ordered_json& j) {
  MLPParams p;
  p.dims = j.at("dims").get<std::vector<std::size_t>>();
  const auto act = j.at("activation").get<std::string>();
  if (act != "tanh" && act != "relu") throw ValidationError("unknown activation " + act);
  p.activation = act == "tanh" ? Activation::kTanh : Activation::kRelu;
  if (p.dims.size() < 2) throw ValidationError("checkpoint MLP needs two or more dims");
  const auto& w = j.at("weights");
  const auto& b = j.at("biases");
  if (w.size() != p.dims.size() - 1 || b.size() != w.size())
    throw ValidationError("checkpoint layer count mismatch");
  for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
    const auto wl = w[l].get<std::vector<double>>();
    const auto bl = b[l].get<std::vector<double>>();
    if (wl.size() != p.dims[l] * p.dims[l + 1] || bl.size() != p.dims[l + 1])
      throw ValidationError("checkpoint layer " + std::to_string(l) + " has wrong size");
    Eigen::MatrixXd W(p.dims[l + 1], p.dims[l]);
    for (std::size_t r = 0; r < p.dims[l + 1]; ++r)
      for (std::size_t c = 0; c < p.dims[l]; ++c)
        W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = wl[r * p.dims[l] + c];
    p.weights.push_back(std::move(W));
    p.biases.push_back(Eigen::Map<const Eigen::VectorXd>(bl.data(), static_cast<Eigen::Index>(bl.size())));
  }
  p.validate();
  return p;
}

}  // namespace

std::string stack_to_json(const EncoderStack& s) {
  ordered_json j;
  j["format"] = "fairdg-stack";
  j["version"] = kCheckpointVersion;
  j["lambda_input"] = s.lambda_input;
  j["lambda_scale"] = s.lambda_scale;
  j["domain_frozen"] = s.domain_frozen;
  j["group_frozen"] = s.group_frozen;
  j["encoder"] = mlp_json(s.encoder);
  j["classifier"] = mlp_json(s.classifier);
  j["domain"] = mlp_json(s.domain);
  j["group"] = mlp_json(s.group);
  if (s.domain_head) j["domain_head"] = mlp_json(*s.domain_head);
  if (s.group_head) j["group_head"] = mlp_json(*s.group_head);
  return j.dump(1);
}

EncoderStack stack_from_json(const std::string& text) {
  try {
    const auto j = ordered_json::parse(text);
    if (j.value("format", "") != "fairdg-stack") throw ValidationError("not a stack checkpoint");
    if (j.value("version", 0) != kCheckpointVersion)
      throw ValidationError("unsupported checkpoint version");
    EncoderStack s;
    s.lambda_input = j.at("lambda_input").get<bool>();
    s.lambda_scale = j.at("lambda_scale").get<double>();
    s.domain_frozen = j.at("domain_frozen").get<bool>();
    s.group_frozen = j.at("group_frozen").get<bool>();
    s.encoder = mlp_from_json(j.at("encoder"));
    s.classifier = mlp_from_json(j.at("classifier"));
    s.domain = mlp_from_json(j.at("domain"));
    s.group = mlp_from_json(j.at("group"));
    if (j.contains("domain_head")) s.domain_head = mlp_from_json(j["domain_head"]);
    if (j.contains("group_head")) s.group_head = mlp_from_json(j["group_head"]);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace fairdg::nn
