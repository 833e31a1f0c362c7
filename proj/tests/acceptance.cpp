// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "fairdg/bounds.hpp"
#include "fairdg/dependence.hpp"
#include "fairdg/experiment.hpp"
#include "fairdg/fairness.hpp"
#include "fairdg/nn.hpp"
#include "fairdg/pareto.hpp"
#include "fairdg/trainer.hpp"
#include "oracles.hpp"

using namespace fairdg;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) m(i, j) = z(rng);
  return m;
}

oracle::Matrix rows_of(const Eigen::MatrixXd& m) {
  oracle::Matrix out(m.rows(), std::vector<double>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

std::vector<std::size_t> labels(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> v(n);
  for (auto& x : v) x = rng() % k;
  return v;
}

void bound_harness() {
  const auto t0 = Clock::now();
  const auto reps = bounds::run_harness(1000, 2024, trainer::thread_budget());
  const double secs = seconds_since(t0);
  double min_slack = 1e300, max_resid = 0.0;
  for (const auto& r : reps) {
    min_slack = std::min(min_slack, r.slack);
    for (const auto& [k, v] : r.extras)
      if (k.rfind("chain_", 0) == 0) max_resid = std::max(max_resid, v);
  }
  const bool ok = reps.size() == 10000 && min_slack >= -1e-9 && max_resid <= 1e-10 && secs < 60.0;
  report(1, "bound harness", ok,
         fmt("%zu reports from 1000 instances, min slack %.3g, max chain residual %.3g, %.2f s", reps.size(),
             min_slack, max_resid, secs));
}

void estimator_oracle() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 24 + rng() % 177;
    const std::size_t ka = 1 + rng() % 8, kb = 1 + rng() % 8;
    const auto a = gaussian(rng, n, ka);
    Eigen::MatrixXd b = gaussian(rng, n, kb);
    b.col(0) += a.col(0);
    const dependence::PartitionLabels lab{labels(rng, n, 1 + rng() % 4), labels(rng, n, 1 + rng() % 3)};
    std::vector<std::size_t> yd(n);
    for (std::size_t i = 0; i < n; ++i) yd[i] = lab.y[i] * 16 + (*lab.d)[i];
    const auto ra = rows_of(a), rb = rows_of(b);
    worst = std::max(worst, std::abs(dependence::dcor_given_y(a, b, {lab.y, std::nullopt}).value -
                                     oracle::conditional_dcor(ra, rb, lab.y)));
    worst = std::max(worst, std::abs(dependence::dcor_given_y_d(a, b, lab).value -
                                     oracle::conditional_dcor(ra, rb, yd)));
  }
  report(2, "conditional dCor oracle", worst <= 1e-12, fmt("100 batches, max |diff| %.3g", worst));
}

void statistical_sanity() {
  double sum = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 rng(100 + s);
    const auto a = gaussian(rng, 2000, 1), b = gaussian(rng, 2000, 1);
    sum += dependence::dcor(a, b);
  }
  const double mean = sum / 20.0;
  std::mt19937_64 rng(7);
  double self_err = 0.0;
  bool constant_zero = true;
  for (int t = 0; t < 20; ++t) {
    const auto a = gaussian(rng, 50 + t * 10, 1 + t % 5);
    self_err = std::max(self_err, std::abs(dependence::dcor(a, a) - 1.0));
    const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(a.rows(), 2, 3.5);
    constant_zero = constant_zero && dependence::dcor(c, a) == 0.0 && dependence::dcor(a, c) == 0.0;
  }
  report(3, "dCor sanity", mean < 0.05 && self_err <= 1e-12 && constant_zero,
         fmt("independent mean %.4f, max |dcor(a,a)-1| %.3g, constant input exactly 0: %s", mean, self_err,
             constant_zero ? "yes" : "no"));
}

void gradient_check() {
  nn::StackDims d;
  d.input = 3;
  d.labels = 3;
  d.domains = 2;
  d.groups = 2;
  d.hidden = 4;
  d.z_e = 3;
  d.z_d = 2;
  d.z_g = 2;
  d.activation = nn::Activation::kTanh;
  double full = 0.0, ce = 0.0;
  std::size_t params = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    nn::EncoderStack s = nn::make_stack(d, seed);
    s.domain_head.reset();
    s.group_head.reset();
    s.domain_frozen = s.group_frozen = true;
    params = std::max(params, s.encoder.num_params() + s.classifier.num_params());
    std::mt19937_64 rng(seed);
    nn::SampleBatch b;
    b.x = gaussian(rng, 16, 3);
    for (std::size_t i = 0; i < 16; ++i) {
      b.y.push_back(i % 3);
      b.d.push_back((i / 3) % 2);
      b.g.push_back(i % 2);
    }
    full = std::max(full, nn::grad_check(s, b, {0.4, 2.0, 1.0, 1e-12}).max_rel_error);
    ce = std::max(ce, nn::grad_check(s, b, {}).max_rel_error);
  }
  report(4, "gradient check", params <= 200 && full < 1e-4 && ce < 1e-6,
         fmt("%zu trainable params, n = 16, full objective %.3g, CE only %.3g", params, full, ce));
}

void hvi_check() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int within = 0;
  double worst_z = 0.0;
  for (int t = 0; t < 50; ++t) {
    std::vector<pareto::TradeoffPoint> pts;
    for (int i = 0; i < 3 + t % 20; ++i) pts.push_back({u(rng), u(rng), i / 100.0});
    const auto norm = pareto::normalize_front(pareto::pareto_front(pts));
    std::vector<oracle::Pt> op;
    for (const auto& p : norm) op.push_back({p.v, p.u, p.lambda});
    const auto mc = oracle::mc_area(op, 1.1, -0.1, 1'000'000, 1000 + t);
    const double z = std::abs(pareto::hvi(norm).raw - mc.area) / mc.stderr_;
    worst_z = std::max(worst_z, z);
    within += z <= 3.0;
  }
  const double single = pareto::hvi({{0.0, 1.0, 0.0}}).percent;
  report(5, "HVI", within == 50 && single == 100.0,
         fmt("%d/50 fronts within 3 SE (max %.2f SE), single point (0,1) = %.17g%%", within, worst_z, single));
}

void fairness_consistency() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    fairness::EvalBatch b;
    b.num_labels = 2 + t % 3;
    b.num_groups = 2 + t % 2;
    std::vector<std::size_t> dom;
    for (int i = 0; i < 40 + t; ++i) {
      const std::size_t y = rng() % b.num_labels, g = rng() % b.num_groups;
      b.y_true.push_back(y);
      b.g.push_back(g);
      b.y_pred.push_back(u(rng) < 0.5 + 0.6 * static_cast<double>(g) / b.num_groups ? y : rng() % b.num_labels);
      dom.push_back(rng() % 2);
    }
    b.d = dom;
    const auto j = fairness::empirical_joint(b);
    std::vector<std::size_t> doms(j.shape()[2]);
    for (std::size_t k = 0; k < doms.size(); ++k) doms[k] = k;
    worst = std::max(worst, std::abs(fairness::eod(b).value - bounds::eod_violation_exact(j, doms).value));
  }
  fairness::EvalBatch sym;
  for (std::size_t g = 0; g < 3; ++g)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t k = 0; k < 4; ++k) {
        sym.y_true.push_back(y);
        sym.y_pred.push_back((y + k) % 3);
        sym.g.push_back(g);
      }
  const double sym_eod = fairness::eod(sym).value;
  report(6, "fairness consistency", worst <= 1e-12 && sym_eod == 0.0,
         fmt("100 batches, max |empirical - exact| %.3g, symmetric EOD %.3g", worst, sym_eod));
}

void end_to_end() {
  const auto t0 = Clock::now();
  int negative = 0, wins = 0, trend = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    trainer::ExperimentConfig cfg;
    cfg.train.log_epochs = false;
    trainer::apply_seed(cfg, seed);
    const auto data = trainer::generate_synthetic(cfg.synth);
    const auto r = trainer::run_experiment(data, cfg);
    const auto& pts = r.selected().points;
    negative += r.spearman_lambda_eod < 0.0;
    wins += r.hvi_tuned > r.hvi_baseline;
    trend += pts.back().target.eod < pts.front().target.eod;
    std::printf("  seed %llu: gamma %g, spearman %.3f, HVI %.2f%% vs %.2f%% (gamma = 0), EOD %.3f -> %.3f\n",
                static_cast<unsigned long long>(seed), r.selection.gamma, r.spearman_lambda_eod, r.hvi_tuned,
                r.hvi_baseline, pts.front().target.eod, pts.back().target.eod);
    std::fflush(stdout);
  }
  const double secs = seconds_since(t0);
  report(7, "end-to-end trend", negative >= 8 && wins >= 8 && secs < 600.0,
         fmt("spearman < 0 in %d/10, HVI above gamma = 0 in %d/10, largest-lambda EOD below lambda = 0 in %d/10, "
             "%.1f s",
             negative, wins, trend, secs));
}

bool all_zero(const nn::MLPGrad& g) {
  for (const auto& w : g.weights)
    if (w.size() && w.cwiseAbs().maxCoeff() != 0.0) return false;
  for (const auto& b : g.biases)
    if (b.size() && b.cwiseAbs().maxCoeff() != 0.0) return false;
  return true;
}

void two_stage_contract() {
  trainer::ExperimentConfig cfg;
  cfg.train.log_epochs = false;
  cfg.train.mode = trainer::SweepMode::kPerLambda;
  cfg.train.lambda_grid = {0.0, 0.5};
  trainer::apply_seed(cfg, 3);
  const auto data = trainer::generate_synthetic(cfg.synth);
  const auto s1 = trainer::stage1_train(data, cfg.train);

  nn::StackGrad g;
  const auto batch = data.sources().rows({0, 1, 2, 3, 4, 5, 6, 7, 3000, 3001, 3002, 3003, 6000, 6001, 6002, 6003});
  nn::backward(s1.stack, batch, {0.5, 4.0, 1.0, 1e-12}, g);
  const bool zero_grads = all_zero(g.domain) && all_zero(g.group);

  const auto run = trainer::stage2_train(data, s1, cfg.train, 0.5, 4.0);
  const bool untouched =
      run.stack.domain.flat() == s1.stack.domain.flat() && run.stack.group.flat() == s1.stack.group.flat();

  const auto sw = trainer::sweep(data, s1, cfg.train, 0.0);
  const auto erm = trainer::train_erm(data, cfg.train);
  const auto e = trainer::evaluate_target(erm.stack, data.target());
  const bool bitwise = sw.runs[0].stack.encoder.flat() == erm.stack.encoder.flat() &&
                       sw.runs[0].stack.classifier.flat() == erm.stack.classifier.flat() &&
                       sw.points[0].target.accuracy == e.accuracy && sw.points[0].target.eod == e.eod &&
                       sw.points[0].target.eo == e.eo;
  report(8, "two-stage contract", zero_grads && untouched && bitwise,
         fmt("frozen gradients zero: %s, D/G unchanged by stage 2: %s, lambda = gamma = 0 point equals ERM: %s",
             zero_grads ? "yes" : "no", untouched ? "yes" : "no", bitwise ? "yes" : "no"));
}

}  // namespace

int main() {
  bound_harness();
  estimator_oracle();
  statistical_sanity();
  gradient_check();
  hvi_check();
  fairness_consistency();
  end_to_end();
  two_stage_contract();
  std::printf("%d failed\n", failures);
  return failures;
}
