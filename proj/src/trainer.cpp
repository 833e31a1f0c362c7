#include "fairdg/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "fairdg/dependence.hpp"
#include "fairdg/errors.hpp"
#include "fairdg/fairness.hpp"
#include "fairdg/rng.hpp"

namespace fairdg::trainer {
namespace {

Eigen::VectorXd unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n01;
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = n01(rng);
  } while (v.norm() < 1e-8);
  return v / v.norm();
}

Eigen::VectorXd basis(std::size_t dim, std::size_t k) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  v(static_cast<Eigen::Index>(k % dim)) = 1.0;
  return v;
}

// Runs f(i) for i in [0, n) on up to `threads` workers; rethrows the first error.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F f) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n && !failed;) {
        try {
          f(i);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// Minibatches that keep every (y, d) cell represented in proportion.
std::vector<std::vector<std::size_t>> stratified_batches(const nn::SampleBatch& data,
                                                         std::size_t batch_size,
                                                         std::mt19937_64& rng) {
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < data.size(); ++i) cells[{data.y[i], data.d[i]}].push_back(i);
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(data.size());
  for (auto& [cell, rows] : cells) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t r = 0; r < rows.size(); ++r)
      keyed.emplace_back((static_cast<double>(r) + 0.5) / static_cast<double>(rows.size()), rows[r]);
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < keyed.size(); start += batch_size) {
    const std::size_t end = std::min(keyed.size(), start + batch_size);
    std::vector<std::size_t> b;
    for (std::size_t i = start; i < end; ++i) b.push_back(keyed[i].second);
    if (!batches.empty() && b.size() * 2 < batch_size)
      batches.back().insert(batches.back().end(), b.begin(), b.end());
    else
      batches.push_back(std::move(b));
  }
  return batches;
}

nn::FrozenReps slice(const nn::FrozenReps& f, const std::vector<std::size_t>& idx) {
  nn::FrozenReps out;
  out.z_d.resize(static_cast<Eigen::Index>(idx.size()), f.z_d.cols());
  out.z_g.resize(static_cast<Eigen::Index>(idx.size()), f.z_g.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.z_d.row(static_cast<Eigen::Index>(r)) = f.z_d.row(static_cast<Eigen::Index>(idx[r]));
    out.z_g.row(static_cast<Eigen::Index>(r)) = f.z_g.row(static_cast<Eigen::Index>(idx[r]));
  }
  return out;
}

nn::StackDims dims_for(const Dataset& data, const TrainConfig& cfg, bool lambda_input) {
  nn::StackDims d = cfg.dims;
  d.input = static_cast<std::size_t>(data.domains.at(0).x.cols());
  d.labels = data.num_labels;
  d.domains = data.num_sources;
  d.groups = data.num_groups;
  d.lambda_input = lambda_input;
  return d;
}

double head_accuracy(const nn::MLPParams& enc, const nn::MLPParams& head, const nn::SampleBatch& b,
                     const std::vector<std::size_t>& labels) {
  const Eigen::MatrixXd logits = nn::forward_mlp(head, nn::forward_mlp(enc, b.x));
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    hits += static_cast<std::size_t>(best) == labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

// Softmax cross-entropy training of encoder + head with L2 decay over the
// full epoch budget. Returns the first epoch reaching 99% training accuracy,
// or 0 if it never does.
std::size_t train_head(nn::MLPParams& enc, nn::MLPParams& head, const nn::SampleBatch& data,
                       const std::vector<std::size_t>& labels, const TrainConfig& cfg,
                       std::uint64_t seed, double& acc) {
  std::mt19937_64 rng(seed);
  std::size_t reached = 0;
  const double lr = cfg.stage1_learning_rate;
  auto decay = [&](nn::MLPParams& p) {
    for (auto& w : p.weights) w *= 1.0 - lr * cfg.stage1_weight_decay;
  };
  for (std::size_t epoch = 0; epoch < cfg.stage1_epochs; ++epoch) {
    for (const auto& idx : stratified_batches(data, cfg.batch_size, rng)) {
      const nn::SampleBatch b = data.rows(idx);
      nn::Trace te, th;
      const Eigen::MatrixXd z = nn::forward_mlp(enc, b.x, &te);
      const Eigen::MatrixXd logits = nn::forward_mlp(head, z, &th);
      Eigen::MatrixXd delta = nn::softmax_rows(logits);
      for (std::size_t i = 0; i < idx.size(); ++i)
        delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[idx[i]])) -= 1.0;
      delta /= static_cast<double>(idx.size());
      Eigen::MatrixXd dz;
      const nn::MLPGrad gh = nn::backward_mlp(head, th, delta, &dz);
      const nn::MLPGrad ge = nn::backward_mlp(enc, te, dz);
      decay(head);
      decay(enc);
      nn::sgd_step(head, gh, lr);
      nn::sgd_step(enc, ge, lr);
    }
    acc = head_accuracy(enc, head, data, labels);
    if (!reached && acc >= 0.99) reached = epoch + 1;
  }
  if (cfg.stage1_epochs == 0) acc = head_accuracy(enc, head, data, labels);
  return reached;
}

struct RunSpec {
  bool conditional = false;
  double lambda = 0.0;
  double gamma = 0.0;
  bool use_frozen = true;
  std::uint64_t seed = 0;
};

Stage2Result run_stage2(const Dataset& data, nn::EncoderStack stack, const TrainConfig& cfg,
                        const RunSpec& spec) {
  cfg.validate();
  const nn::SampleBatch src = data.sources();
  nn::FrozenReps all;
  if (spec.use_frozen) all = nn::frozen_reps(stack, src.x);
  std::mt19937_64 rng(derive_seed(spec.seed, 0x5eed));
  Stage2Result res;
  nn::EncoderStack best = stack;
  double best_acc = -1.0;
  for (std::size_t epoch = 0; epoch < cfg.stage2_epochs; ++epoch) {
    double obj_sum = 0.0;
    std::size_t used = 0;
    for (const auto& idx : stratified_batches(src, cfg.batch_size, rng)) {
      nn::ObjectiveConfig oc;
      oc.lambda = spec.conditional ? cfg.lambda_grid[rng() % cfg.lambda_grid.size()] : spec.lambda;
      oc.gamma = spec.gamma;
      oc.cap = cfg.cap;
      oc.smoothing_eps = cfg.smoothing_eps;
      const nn::SampleBatch b = src.rows(idx);
      nn::FrozenReps f;
      if (spec.use_frozen) f = slice(all, idx);
      nn::StackGrad g;
      try {
        obj_sum += nn::backward(stack, b, oc, g, spec.use_frozen ? &f : nullptr).total;
      } catch (const DegenerateError&) {
        ++res.skipped_batches;
        continue;
      }
      ++used;
      if (cfg.weight_decay > 0.0) {
        for (auto& w : stack.encoder.weights) w *= 1.0 - cfg.learning_rate * cfg.weight_decay;
        for (auto& w : stack.classifier.weights) w *= 1.0 - cfg.learning_rate * cfg.weight_decay;
      }
      nn::sgd_step(stack.encoder, g.encoder, cfg.learning_rate);
      nn::sgd_step(stack.classifier, g.classifier, cfg.learning_rate);
    }
    if (cfg.log_epochs || cfg.best_epoch) {
      const double eval_lambda = spec.conditional ? 0.0 : spec.lambda;
      const Evaluation v = evaluate_target(stack, data.validation(), eval_lambda);
      res.curve.push_back({epoch + 1, used ? obj_sum / static_cast<double>(used) : 0.0,
                           v.accuracy, v.eod});
      if (cfg.best_epoch && v.accuracy > best_acc) {
        best_acc = v.accuracy;
        best = stack;
      }
    }
  }
  res.stack = cfg.best_epoch ? std::move(best) : std::move(stack);
  return res;
}

nn::EncoderStack with_fresh_classifier(const Stage1Result& s1, const nn::StackDims& dims,
                                       std::uint64_t seed) {
  nn::EncoderStack stack = s1.stack;
  const nn::EncoderStack fresh = nn::make_stack(dims, seed);
  stack.encoder = fresh.encoder;
  stack.classifier = fresh.classifier;
  stack.lambda_input = dims.lambda_input;
  stack.lambda_scale = dims.lambda_scale;
  return stack;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_sources < 2) throw ValidationError("need at least two source domains");
  if (num_labels < 2) throw ValidationError("need at least two labels");
  if (num_groups < 2) throw ValidationError("need at least two groups");
  if (n_per_domain < 2) throw ValidationError("n_per_domain must be at least 2");
  if (feature_dim == 0 || spurious_dim == 0 || domain_dim == 0)
    throw ValidationError("feature blocks must be non-empty");
  if (!(group_bias_strength >= 0.0 && group_bias_strength <= 1.0))
    throw ValidationError("group_bias_strength must lie in [0, 1]");
  if (!(domain_shift_strength >= 0.0)) throw ValidationError("domain shift must be non-negative");
}

nn::SampleBatch Dataset::sources() const {
  nn::SampleBatch out;
  Eigen::Index rows = 0;
  for (std::size_t s = 0; s < num_sources; ++s) rows += domains[s].x.rows();
  out.x.resize(rows, domains.at(0).x.cols());
  Eigen::Index r = 0;
  for (std::size_t s = 0; s < num_sources; ++s) {
    const auto& b = domains[s];
    out.x.middleRows(r, b.x.rows()) = b.x;
    r += b.x.rows();
    out.y.insert(out.y.end(), b.y.begin(), b.y.end());
    out.d.insert(out.d.end(), b.d.begin(), b.d.end());
    out.g.insert(out.g.end(), b.g.begin(), b.g.end());
  }
  return out;
}

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n01;
  const std::size_t ny = cfg.num_labels, ng = cfg.num_groups, nd = cfg.num_sources + 2;
  const double shift = cfg.domain_shift_strength;

  std::vector<Eigen::VectorXd> stable;
  for (std::size_t y = 0; y < ny; ++y) stable.push_back(cfg.class_separation * basis(cfg.feature_dim, y));
  // Spurious block: mean shift * a_d * e_y. The label correlation a_d grows
  // across sources and is reversed in held-out domains, so within a label the
  // block reveals the domain.
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> strength(nd);
  for (std::size_t d = 0; d < nd; ++d)
    strength[d] = d < cfg.num_sources
                      ? 0.5 + 1.5 * static_cast<double>(d) / static_cast<double>(cfg.num_sources - 1)
                      : -unif(rng);
  std::vector<std::vector<Eigen::VectorXd>> spurious(nd, std::vector<Eigen::VectorXd>(ny));
  for (std::size_t d = 0; d < nd; ++d)
    for (std::size_t y = 0; y < ny; ++y) spurious[d][y] = strength[d] * basis(cfg.spurious_dim, y);
  std::vector<Eigen::VectorXd> domain_code;
  for (std::size_t d = 0; d < nd; ++d) {
    if (d < cfg.num_sources) {
      domain_code.push_back(cfg.domain_dim >= cfg.num_sources ? basis(cfg.domain_dim, d)
                                                              : unit_vector(rng, cfg.domain_dim));
    } else {
      // Held-out codes lie between the source codes.
      Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.domain_dim));
      for (std::size_t s = 0; s < cfg.num_sources; ++s) c += -std::log(1.0 - unif(rng)) * domain_code[s];
      domain_code.push_back(c / c.norm());
    }
  }

  Dataset data;
  data.num_sources = cfg.num_sources;
  data.num_labels = ny;
  data.num_groups = ng;
  const std::size_t dim = cfg.total_dim();
  for (std::size_t d = 0; d < nd; ++d) {
    nn::SampleBatch b;
    b.x.resize(static_cast<Eigen::Index>(cfg.n_per_domain), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < cfg.n_per_domain; ++i) {
      const std::size_t g = static_cast<std::size_t>(rng() % ng);
      // Group g over-represents label g mod |Y|.
      std::size_t y = static_cast<std::size_t>(rng() % ny);
      if (unif(rng) < cfg.group_bias_strength) y = g % ny;
      Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
      Eigen::Index k = 0;
      for (std::size_t j = 0; j < cfg.feature_dim; ++j) x(k++) = stable[y](static_cast<Eigen::Index>(j)) + n01(rng);
      for (std::size_t j = 0; j < cfg.spurious_dim; ++j)
        x(k++) = shift * spurious[d][y](static_cast<Eigen::Index>(j)) + n01(rng);
      for (std::size_t j = 0; j < ng; ++j) x(k++) = (j == g ? 2.0 : 0.0) + 0.5 * n01(rng);
      for (std::size_t j = 0; j < cfg.domain_dim; ++j)
        x(k++) = shift * domain_code[d](static_cast<Eigen::Index>(j)) + 0.3 * n01(rng);
      b.x.row(static_cast<Eigen::Index>(i)) = x.transpose();
      b.y.push_back(y);
      b.d.push_back(d);
      b.g.push_back(g);
    }
    data.domains.push_back(std::move(b));
  }
  return data;
}

std::vector<double> TrainConfig::default_lambda_grid(std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i) / static_cast<double>(n);
  return g;
}

void TrainConfig::validate() const {
  if (lambda_grid.size() < 2) throw ConfigError("lambda grid needs at least two values");
  for (double l : lambda_grid)
    if (!(l >= 0.0 && l < 1.0)) throw ConfigError("lambda values must lie in [0, 1)");
  for (double g : gamma_grid)
    if (!(g >= 0.0)) throw ConfigError("gamma values must be non-negative");
  if (batch_size < 4) throw ConfigError("batch size must be at least 4");
  if (!(learning_rate > 0.0) || !(stage1_learning_rate > 0.0))
    throw ConfigError("learning rates must be positive");
}

std::uint64_t run_seed(std::uint64_t seed, double key) {
  std::uint64_t bits;
  std::memcpy(&bits, &key, sizeof bits);
  return derive_seed(seed, bits);
}

Stage1Result stage1_train(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const nn::SampleBatch src = data.sources();
  Stage1Result r;
  r.stack = nn::make_stack(dims_for(data, cfg, false), cfg.seed);
  r.domain_epochs = train_head(r.stack.domain, *r.stack.domain_head, src, src.d, cfg,
                               derive_seed(cfg.seed, 11), r.domain_accuracy);
  r.group_epochs = train_head(r.stack.group, *r.stack.group_head, src, src.g, cfg,
                              derive_seed(cfg.seed, 12), r.group_accuracy);
  r.converged = r.domain_accuracy >= 0.99 && r.group_accuracy >= 0.99;
  r.stack.domain_head.reset();
  r.stack.group_head.reset();
  r.stack.domain_frozen = true;
  r.stack.group_frozen = true;
  return r;
}

Stage2Result stage2_train(const Dataset& data, const Stage1Result& stage1, const TrainConfig& cfg,
                          double lambda, double gamma) {
  const std::uint64_t seed = run_seed(cfg.seed, lambda);
  nn::EncoderStack stack = with_fresh_classifier(stage1, dims_for(data, cfg, false), seed);
  return run_stage2(data, std::move(stack), cfg, {false, lambda, gamma, true, seed});
}

Stage2Result train_loss_conditional(const Dataset& data, const Stage1Result& stage1,
                                    const TrainConfig& cfg, double gamma) {
  const std::uint64_t seed = run_seed(cfg.seed, gamma);
  nn::EncoderStack stack = with_fresh_classifier(stage1, dims_for(data, cfg, true), seed);
  return run_stage2(data, std::move(stack), cfg, {true, 0.0, gamma, true, seed});
}

Stage2Result train_erm(const Dataset& data, const TrainConfig& cfg) {
  const std::uint64_t seed = run_seed(cfg.seed, 0.0);
  nn::EncoderStack stack = nn::make_stack(dims_for(data, cfg, false), seed);
  return run_stage2(data, std::move(stack), cfg, {false, 0.0, 0.0, false, seed});
}

Evaluation evaluate_target(const nn::EncoderStack& model, const nn::SampleBatch& batch,
                           double lambda) {
  batch.validate();
  fairness::EvalBatch e;
  e.y_true = batch.y;
  e.y_pred = nn::predict(model, batch.x, lambda);
  e.g = batch.g;
  e.num_labels = model.num_labels();
  std::size_t ng = 0;
  for (auto g : batch.g) ng = std::max(ng, g + 1);
  e.num_groups = ng;
  Evaluation out;
  out.accuracy = fairness::accuracy(e);
  out.eod = fairness::eod(e).value;
  out.eo = fairness::eo(e).value;
  return out;
}

SweepResult sweep(const Dataset& data, const Stage1Result& stage1, const TrainConfig& cfg,
                  double gamma) {
  cfg.validate();
  SweepResult res;
  res.gamma = gamma;
  const auto& grid = cfg.lambda_grid;
  const auto& val = data.validation();
  std::vector<std::size_t> head(std::min(cfg.penalty_rows, val.size()));
  std::iota(head.begin(), head.end(), 0);
  const nn::SampleBatch pen = val.rows(head);
  dependence::PartitionLabels pen_labels{pen.y, pen.d};
  const Eigen::MatrixXd zg_pen = nn::forward_mlp(stage1.stack.group, pen.x);
  res.points.resize(grid.size());

  auto fill = [&](std::size_t i, const nn::EncoderStack& model) {
    SweepPoint& p = res.points[i];
    p.lambda = grid[i];
    p.target = evaluate_target(model, data.target(), grid[i]);
    p.validation = evaluate_target(model, val, grid[i]);
    const Eigen::MatrixXd ze =
        nn::forward_mlp(model.encoder, nn::encoder_input(model, pen.x, grid[i]));
    p.val_fairness_penalty = dependence::dcor_given_y_d(zg_pen, ze, pen_labels).value;
  };

  if (cfg.mode == SweepMode::kPerLambda) {
    res.runs.resize(grid.size());
    parallel_for(grid.size(), thread_budget(), [&](std::size_t i) {
      res.runs[i] = stage2_train(data, stage1, cfg, grid[i], gamma);
      fill(i, res.runs[i].stack);
    });
  } else {
    res.runs.push_back(train_loss_conditional(data, stage1, cfg, gamma));
    for (std::size_t i = 0; i < grid.size(); ++i) fill(i, res.runs[0].stack);
  }
  return res;
}

std::vector<pareto::TradeoffPoint> target_points(const SweepResult& s) {
  std::vector<pareto::TradeoffPoint> out;
  for (const auto& p : s.points) out.push_back({p.target.eod, p.target.accuracy, p.lambda});
  return out;
}

std::vector<pareto::TradeoffPoint> validation_points(const SweepResult& s) {
  std::vector<pareto::TradeoffPoint> out;
  for (const auto& p : s.points) out.push_back({p.validation.eod, p.validation.accuracy, p.lambda});
  return out;
}

GammaSelection select_gamma(const std::vector<SweepResult>& candidates) {
  if (candidates.empty()) throw ValidationError("no gamma candidates");
  std::vector<pareto::TradeoffPoint> all;
  for (const auto& c : candidates)
    for (const auto& p : validation_points(c)) all.push_back(p);
  const pareto::Bounds b = pareto::bounds_of(all);
  GammaSelection sel;
  double best = -1.0;
  for (const auto& c : candidates) {
    const double h = pareto::summarize(validation_points(c), {}, b).hv.percent;
    sel.val_hvi.push_back(h);
    if (h > best) {
      best = h;
      sel.gamma = c.gamma;
    }
  }
  return sel;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman needs paired samples");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto i, auto j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t s = 0; s < idx.size();) {
      std::size_t e = s;
      while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[s]]) ++e;
      const double avg = 0.5 * static_cast<double>(s + e) + 1.0;
      for (std::size_t k = s; k <= e; ++k) r[idx[k]] = avg;
      s = e + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::pair<double, double> compare_hvi(const std::vector<pareto::TradeoffPoint>& a,
                                      const std::vector<pareto::TradeoffPoint>& b,
                                      const pareto::FrontConfig& cfg) {
  std::vector<pareto::TradeoffPoint> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const pareto::Bounds bounds = pareto::bounds_of(all);
  return {pareto::summarize(a, cfg, bounds).hv.percent, pareto::summarize(b, cfg, bounds).hv.percent};
}

std::size_t thread_budget() {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("FAIRDG_THREADS");
  if (!env || !*env) return hw;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) return hw;
  return std::min(hw, static_cast<std::size_t>(v));
}

}  // namespace fairdg::trainer
