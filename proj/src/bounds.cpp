#include "fairdg/bounds.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include "fairdg/bounded_ce.hpp"
#include "fairdg/errors.hpp"
#include "fairdg/rng.hpp"

namespace fairdg::bounds {

using prob::Axis;
using prob::ProbTable;

namespace {

void finish(BoundReport& r) {
  r.rhs = r.term_sum();
  r.slack = r.rhs - r.lhs;
}

std::vector<std::size_t> single(std::size_t d) { return {d}; }

void check_label_channel(const prob::FiniteJoint& joint, const prob::Channel& ch) {
  joint.validate();
  ch.validate();
  if (ch.nx != joint.nx()) throw ValidationError("channel input size does not match |X|");
  if (ch.ny != joint.ny()) throw ValidationError("channel output size does not match |Y|");
}

// p(axis0 | fixed) as a vector, or empty when the event has zero mass.
std::vector<double> conditional_or_empty(
    const ProbTable& t, std::size_t axis,
    std::initializer_list<std::pair<std::size_t, std::size_t>> fixed) {
  std::vector<std::pair<std::size_t, std::size_t>> f(fixed);
  try {
    return prob::conditional(t, axis, f);
  } catch (const DegenerateError&) {
    return {};
  }
}

// 1 / (|Y| |G| min p(y,g)) under the given (., y, ., g) law.
double min_cell_mass(const ProbTable& law4) {
  const ProbTable yg = law4.marginal({1, 3});
  double m = std::numeric_limits<double>::infinity();
  for (double v : yg.values()) m = std::min(m, v);
  return m;
}

// Sum over a of p(a) tv(P(B|a), P(B)) for a 2-way table.
double average_tv_to_marginal(const ProbTable& ab) {
  const ProbTable b = ab.marginal({1});
  const std::size_t na = ab.shape()[0], nb = ab.shape()[1];
  double total = 0.0;
  for (std::size_t a = 0; a < na; ++a) {
    double pa = 0.0;
    for (std::size_t j = 0; j < nb; ++j) pa += ab.values()[a * nb + j];
    if (!(pa > 0.0)) continue;
    std::vector<double> row(nb);
    for (std::size_t j = 0; j < nb; ++j) row[j] = ab.values()[a * nb + j] / pa;
    total += pa * prob::tv_distance(row, b.values());
  }
  return total;
}

}  // namespace

double BoundReport::term_sum() const {
  double s = 0.0;
  for (const auto& [name, v] : terms) s += v;
  return s;
}

PredictionLaw prediction_law(const prob::FiniteJoint& joint, const prob::Channel& ch,
                             PredictionConvention convention) {
  if (convention == PredictionConvention::kSoft) {
    auto soft = prob::push_soft(joint, ch);
    return {std::move(soft.table), std::move(soft.rows)};
  }
  PredictionLaw law{prob::push_channel(joint, ch), {}};
  for (std::size_t k = 0; k < ch.ny; ++k) {
    std::vector<double> row(ch.ny, 0.0);
    row[k] = 1.0;
    law.rows.push_back(std::move(row));
  }
  return law;
}

double effective_cap(const BoundedLoss& loss, std::size_t num_classes) {
  if (loss.kind == LossKind::kZeroOne) {
    if (!(loss.cap >= 1.0)) throw ConfigError("zero-one loss needs cap >= 1");
    return loss.cap;
  }
  return resolve_cap(loss.cap, num_classes).cap;
}

double loss_value(const BoundedLoss& loss, std::span<const double> row, std::size_t y) {
  if (y >= row.size()) throw ValidationError("label outside prediction row");
  if (loss.kind == LossKind::kZeroOne) return 1.0 - row[y];
  const double cap = effective_cap(loss, row.size());
  const double floor = std::exp(-cap);
  const double p = row[y] * (1.0 - static_cast<double>(row.size()) * floor) + floor;
  return -std::log(p);
}

double expected_risk(const PredictionLaw& law, const BoundedLoss& loss,
                     std::span<const std::size_t> domains) {
  const ProbTable t = prob::restrict_axis(law.table, Axis::kD, domains);
  const auto& s = t.shape();
  if (s[0] != law.rows.size()) throw ValidationError("prediction rows do not match table");
  // Loss per (prediction, label) cell, then weighted by the (k, y) marginal.
  const ProbTable ky = t.marginal({0, 1});
  double risk = 0.0;
  for (std::size_t k = 0; k < s[0]; ++k)
    for (std::size_t y = 0; y < s[1]; ++y) {
      const double w = ky.values()[k * s[1] + y];
      if (w > 0.0) risk += w * loss_value(loss, law.rows[k], y);
    }
  return risk;
}

double expected_risk(const ProbTable& joint4, const BoundedLoss& loss,
                     std::span<const std::size_t> domains) {
  if (joint4.rank() != 4) throw ValidationError("expected a (yhat, y, d, g) table");
  PredictionLaw law{joint4, {}};
  for (std::size_t k = 0; k < joint4.shape()[0]; ++k) {
    std::vector<double> row(joint4.shape()[1], 0.0);
    if (k < row.size()) row[k] = 1.0;
    law.rows.push_back(std::move(row));
  }
  if (joint4.shape()[0] != joint4.shape()[1])
    throw ValidationError("sampled predictions must range over the label set");
  return expected_risk(law, loss, domains);
}

EodResult eod_violation_exact(const ProbTable& joint4, std::span<const std::size_t> domains) {
  if (joint4.rank() != 4) throw ValidationError("expected a (yhat, y, d, g) table");
  const ProbTable t = prob::restrict_axis(joint4, Axis::kD, domains);
  const std::size_t ny = t.shape()[1], ng = t.shape()[3];
  if (ng < 2) throw ValidationError("EOD needs at least two groups");
  const ProbTable kyg = t.marginal({0, 1, 3});
  std::vector<std::vector<double>> cond(ny * ng);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t g = 0; g < ng; ++g) cond[y * ng + g] = conditional_or_empty(kyg, 0, {{1, y}, {2, g}});
  EodResult out;
  double sum = 0.0;
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t g = 0; g < ng; ++g)
      for (std::size_t h = g + 1; h < ng; ++h) {
        const auto& a = cond[y * ng + g];
        const auto& b = cond[y * ng + h];
        if (a.empty() || b.empty()) {
          out.skipped.push_back({y, g, h});
          continue;
        }
        sum += prob::tv_distance(a, b);
        ++out.pairs_used;
      }
  if (out.pairs_used == 0) throw DegenerateError("EOD: no (y, g, g') pair with mass on both sides");
  out.value = 2.0 * sum / static_cast<double>(ny * ng * (ng - 1));
  return out;
}

BoundReport verify_theorem1(const prob::FiniteJoint& joint, const prob::Channel& ch,
                            const BoundedLoss& loss, PredictionConvention convention) {
  check_label_channel(joint, ch);
  const PredictionLaw law = prediction_law(joint, ch, convention);
  const double cap = effective_cap(loss, joint.ny());
  const auto& src = joint.source_domains;
  const auto tgt = single(joint.target_domain);

  BoundReport r;
  r.name = "theorem1";
  r.lhs = expected_risk(law, loss, tgt);
  const double source_risk = expected_risk(law, loss, src);

  const ProbTable pt = prob::restrict_axis(joint.probs, Axis::kD, tgt).marginal({0, 1});
  const ProbTable ps = prob::restrict_axis(joint.probs, Axis::kD, src).marginal({0, 1});
  const double tv = prob::tv_distance(pt.values(), ps.values());

  const ProbTable s_law = prob::restrict_axis(law.table, Axis::kD, src);
  const double mi = prob::mutual_information(s_law.grouped({{2}, {0, 1}}));

  r.terms = {{"source_risk", source_risk},
             {"domain_shift", cap * tv},
             {"information", std::sqrt(2.0) * cap / 2.0 * std::sqrt(mi)}};
  r.extras = {{"cap", cap}, {"tv_xy", tv}, {"mi_d_fy", mi}};
  r.meta["prediction"] = convention == PredictionConvention::kSoft ? "soft_output" : "sampled_label";
  r.meta["loss"] = loss.kind == LossKind::kZeroOne ? "zero_one" : "bounded_cross_entropy";
  finish(r);
  return r;
}

BoundReport verify_theorem2(const prob::FiniteJoint& joint, const prob::Channel& ch) {
  check_label_channel(joint, ch);
  const std::size_t ny = joint.ny(), ng = joint.ng();
  if (ng < 2) throw ValidationError("theorem 2 needs at least two groups");
  const ProbTable law = prob::push_channel(joint, ch);
  const auto& src = joint.source_domains;
  const auto tgt = single(joint.target_domain);

  BoundReport r;
  r.name = "theorem2";
  r.lhs = eod_violation_exact(law, tgt).value;

  const ProbTable s_law = prob::restrict_axis(law, Axis::kD, src);
  const double pmin = min_cell_mass(s_law);
  if (!(pmin > 0.0)) throw DegenerateError("theorem 2: a (y, g) cell has zero source mass");
  const double denom = static_cast<double>(ny * ng) * pmin;

  // axes of s_law: (yhat, y, d, g)
  const double i_g = prob::conditional_mutual_information(s_law.grouped({{3}, {0}, {1, 2}}));
  const double i_d = prob::conditional_mutual_information(s_law.grouped({{2}, {0}, {1, 3}}));

  // Input shift between target and the source mixture, per (y, g).
  const ProbTable xs = prob::restrict_axis(joint.probs, Axis::kD, src);
  const ProbTable xt = prob::restrict_axis(joint.probs, Axis::kD, tgt);
  const ProbTable xs_yg = xs.marginal({0, 1, 3});
  const ProbTable d_marg = xs.marginal({2});
  double tv_proof = 0.0, tv_statement = 0.0;
  bool statement_defined = true;
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t g = 0; g < ng; ++g) {
      const auto target = conditional_or_empty(xt, 0, {{1, y}, {3, g}});
      if (target.empty()) continue;
      const auto mixture = conditional_or_empty(xs_yg, 0, {{1, y}, {2, g}});
      tv_proof += prob::tv_distance(target, mixture);
      std::vector<double> flat(joint.nx(), 0.0);
      for (std::size_t d = 0; d < src.size(); ++d) {
        const auto comp = conditional_or_empty(xs, 0, {{1, y}, {2, d}, {3, g}});
        if (comp.empty()) {
          statement_defined = false;
          continue;
        }
        for (std::size_t x = 0; x < flat.size(); ++x) flat[x] += d_marg.values()[d] * comp[x];
      }
      if (statement_defined) tv_statement += prob::tv_distance(target, flat);
    }
  const double scale = 2.0 / static_cast<double>(ny * ng);

  r.terms = {{"group_information", std::sqrt(2.0 * i_g) / denom},
             {"domain_shift", scale * tv_proof},
             {"domain_information", std::sqrt(2.0 * i_d) / denom}};
  r.extras = {{"min_p_yg", pmin}, {"cmi_g", i_g}, {"cmi_d", i_d}};
  if (statement_defined) {
    r.extras.emplace_back("domain_shift_marginal_weights", scale * tv_statement);
    r.extras.emplace_back("rhs_marginal_weights",
                          r.term_sum() - scale * tv_proof + scale * tv_statement);
  }
  r.meta["prediction"] = "sampled_label";
  r.meta["mixture_weights"] = "p(d|y,g)";
  r.meta["min_p_law"] = "source_mixture";
  finish(r);
  return r;
}

BoundReport verify_theorem3(const prob::FiniteJoint& joint, const prob::Channel& ch,
                            const BoundedLoss& loss) {
  if (loss.kind != LossKind::kBoundedCrossEntropy)
    throw ContractError("theorem 3 is stated for the bounded cross-entropy loss");
  check_label_channel(joint, ch);
  const PredictionLaw law = prediction_law(joint, ch, PredictionConvention::kSoft);
  const auto& src = joint.source_domains;

  const ProbTable s_law = prob::restrict_axis(law.table, Axis::kD, src);
  const double h = prob::conditional_entropy(s_law.marginal({1, 2}));
  const double mi = prob::conditional_mutual_information(s_law.grouped({{0}, {1}, {2}}));
  const double risk = expected_risk(law, loss, src);

  BoundReport r;
  r.name = "theorem3";
  r.lhs = h;
  r.terms = {{"conditional_information", mi}, {"source_risk", risk}};
  r.extras = {{"cap", effective_cap(loss, joint.ny())}};
  r.meta["prediction"] = "soft_output";
  finish(r);
  return r;
}

std::vector<BoundReport> verify_theorem4(const prob::FiniteJoint& joint,
                                         const prob::Channel& ch) {
  check_label_channel(joint, ch);
  const ProbTable law = prob::push_channel(joint, ch);
  const ProbTable s = prob::restrict_axis(law, Axis::kD, joint.source_domains);
  // s axes: 0 yhat, 1 y, 2 d, 3 g
  using prob::conditional_mutual_information;
  using prob::mutual_information;
  const double d_y = conditional_mutual_information(s.grouped({{2}, {0}, {1}}));
  const double g_yd = conditional_mutual_information(s.grouped({{3}, {0}, {1, 2}}));
  const double d_yg = conditional_mutual_information(s.grouped({{2}, {0}, {1, 3}}));
  const double g_y = conditional_mutual_information(s.grouped({{3}, {0}, {1}}));
  const double yh_y = mutual_information(s.grouped({{0}, {1}}));
  const double yh_y_d = conditional_mutual_information(s.grouped({{0}, {1}, {2}}));
  const double yh_d = mutual_information(s.grouped({{0}, {2}}));
  const double yh_dg_y = conditional_mutual_information(s.grouped({{0}, {2, 3}, {1}}));
  const double yh_yd = mutual_information(s.grouped({{0}, {1, 2}}));

  const std::vector<std::pair<std::string, double>> residuals = {
      {"chain_dg_via_d", std::abs(yh_dg_y - (d_y + g_yd))},
      {"chain_dg_via_g", std::abs(yh_dg_y - (g_y + d_yg))},
      {"chain_yd_via_d", std::abs(yh_yd - (yh_d + yh_y_d))},
      {"chain_yd_via_y", std::abs(yh_yd - (yh_y + d_y))},
      {"chain_interaction", std::abs(yh_y - yh_y_d + d_y - yh_d)},
  };

  auto make = [&](const char* name, double lhs,
                  std::vector<std::pair<std::string, double>> terms) {
    BoundReport r;
    r.name = name;
    r.lhs = lhs;
    r.terms = std::move(terms);
    r.extras = residuals;
    r.meta["prediction"] = "sampled_label";
    finish(r);
    return r;
  };
  return {
      make("theorem4a", d_yg, {{"domain_given_label", d_y}, {"group_given_label_domain", g_yd}}),
      make("theorem4b", yh_y_d, {{"label_information", yh_y}, {"domain_given_label", d_y}}),
      make("theorem4c", g_y, {{"domain_given_label", d_y}, {"group_given_label_domain", g_yd}}),
  };
}

namespace {

BoundReport lemma1(const Lemma1Instance& in) {
  if (in.f.size() != in.p.size() || in.p.size() != in.q.size() || in.f.empty())
    throw ValidationError("lemma 1: f, p, q must share one support");
  for (double v : in.f)
    if (!(v >= 0.0 && v <= in.cap)) throw ValidationError("lemma 1: f outside [0, C]");
  double ep = 0.0, eq = 0.0;
  for (std::size_t i = 0; i < in.f.size(); ++i) {
    ep += in.p[i] * in.f[i];
    eq += in.q[i] * in.f[i];
  }
  BoundReport r;
  r.name = "lemma1";
  r.lhs = ep - eq;
  r.terms = {{"cap_times_tv", in.cap * prob::tv_distance(in.p, in.q)}};
  finish(r);
  return r;
}

BoundReport lemma2(const ProbTable& t) {
  if (t.rank() != 2) throw ValidationError("lemma 2 expects a 2-way joint");
  t.validate_distribution();
  BoundReport r;
  r.name = "lemma2";
  r.lhs = average_tv_to_marginal(t);
  r.terms = {{"pinsker", std::sqrt(prob::mutual_information(t) / 2.0)}};
  finish(r);
  return r;
}

BoundReport lemma3(const Lemma3Instance& in) {
  BoundReport r;
  r.name = "lemma3";
  r.lhs = prob::tv_distance(in.pj, in.pj_prime) - prob::tv_distance(in.pi, in.pi_prime);
  r.terms = {{"shift", prob::tv_distance(in.pj, in.pi)},
             {"shift_prime", prob::tv_distance(in.pj_prime, in.pi_prime)}};
  finish(r);
  return r;
}

BoundReport lemma4(const ProbTable& t) {
  if (t.rank() != 4) throw ValidationError("lemma 4 expects a 4-way joint");
  t.validate_distribution();
  const auto& s = t.shape();
  const std::size_t nx = s[0], ny = s[1], nd = s[2], ng = s[3];
  const ProbTable ydg = t.marginal({1, 2, 3});
  double lhs = 0.0;
  for (std::size_t d = 0; d < nd; ++d)
    for (std::size_t g = 0; g < ng; ++g) {
      const auto base = conditional_or_empty(ydg, 0, {{1, d}, {2, g}});
      if (base.empty()) continue;
      for (std::size_t x = 0; x < nx; ++x) {
        std::vector<double> row(ny);
        double mass = 0.0;
        for (std::size_t y = 0; y < ny; ++y) {
          const std::array<std::size_t, 4> idx{x, y, d, g};
          row[y] = t.at(idx);
          mass += row[y];
        }
        if (!(mass > 0.0)) continue;
        for (auto& v : row) v /= mass;
        lhs += mass * prob::tv_distance(row, base);
      }
    }
  const double cmi = prob::conditional_mutual_information(t.grouped({{0}, {1}, {2, 3}}));
  BoundReport r;
  r.name = "lemma4";
  r.lhs = lhs;
  r.terms = {{"pinsker", std::sqrt(cmi / 2.0)}};
  finish(r);
  return r;
}

}  // namespace

BoundReport verify_lemma(int k, const LemmaInstance& instance) {
  switch (k) {
    case 1:
      if (auto* p = std::get_if<Lemma1Instance>(&instance)) return lemma1(*p);
      break;
    case 2:
      if (auto* p = std::get_if<ProbTable>(&instance)) return lemma2(*p);
      break;
    case 3:
      if (auto* p = std::get_if<Lemma3Instance>(&instance)) return lemma3(*p);
      break;
    case 4:
      if (auto* p = std::get_if<ProbTable>(&instance)) return lemma4(*p);
      break;
    default:
      throw ValidationError("lemma index must be 1..4");
  }
  throw ValidationError("instance shape does not match lemma " + std::to_string(k));
}

std::vector<BoundReport> verify_lemmas(const prob::FiniteJoint& joint, const prob::Channel& ch,
                                       const BoundedLoss& loss) {
  check_label_channel(joint, ch);
  const auto& src = joint.source_domains;
  const auto tgt = single(joint.target_domain);
  std::vector<BoundReport> out;

  // L1: loss of the soft output over (x, y), target vs source mixture.
  {
    const auto soft = prob::push_soft(joint, ch);
    Lemma1Instance in;
    in.cap = effective_cap(loss, joint.ny());
    const ProbTable pt = prob::restrict_axis(joint.probs, Axis::kD, tgt).marginal({0, 1});
    const ProbTable ps = prob::restrict_axis(joint.probs, Axis::kD, src).marginal({0, 1});
    in.p.assign(pt.values().begin(), pt.values().end());
    in.q.assign(ps.values().begin(), ps.values().end());
    for (std::size_t x = 0; x < joint.nx(); ++x)
      for (std::size_t y = 0; y < joint.ny(); ++y)
        in.f.push_back(loss_value(loss, soft.rows[soft.class_of_x[x]], y));
    out.push_back(lemma1(in));
  }

  const ProbTable law = prob::push_channel(joint, ch);
  const ProbTable s = prob::restrict_axis(law, Axis::kD, src);

  // L2: (D_S, (Yhat, Y)).
  out.push_back(lemma2(s.grouped({{2}, {0, 1}})));

  // L3: tightest (y, g, g') instance of group-conditional prediction laws.
  {
    const ProbTable t = prob::restrict_axis(law, Axis::kD, tgt);
    std::optional<BoundReport> best;
    for (std::size_t y = 0; y < joint.ny(); ++y)
      for (std::size_t g = 0; g < joint.ng(); ++g)
        for (std::size_t h = 0; h < joint.ng(); ++h) {
          if (g == h) continue;
          Lemma3Instance in{conditional_or_empty(t.marginal({0, 1, 3}), 0, {{1, y}, {2, g}}),
                            conditional_or_empty(t.marginal({0, 1, 3}), 0, {{1, y}, {2, h}}),
                            conditional_or_empty(s.marginal({0, 1, 3}), 0, {{1, y}, {2, g}}),
                            conditional_or_empty(s.marginal({0, 1, 3}), 0, {{1, y}, {2, h}})};
          if (in.pj.empty() || in.pj_prime.empty() || in.pi.empty() || in.pi_prime.empty())
            continue;
          auto r = lemma3(in);
          if (!best || r.slack < best->slack) best = std::move(r);
        }
    if (!best) throw DegenerateError("lemma 3: no populated (y, g, g') triple");
    out.push_back(std::move(*best));
  }

  // L4: X := G, Y := Yhat, conditioning on (Y, D_S).
  out.push_back(lemma4(s.grouped({{3}, {0}, {1}, {2}})));
  return out;
}

std::vector<BoundReport> verify_all(const prob::FiniteJoint& joint, const prob::Channel& ch,
                                    const BoundedLoss& loss) {
  std::vector<BoundReport> out;
  out.push_back(verify_theorem1(joint, ch, loss));
  out.push_back(verify_theorem2(joint, ch));
  BoundedLoss ce = loss;
  ce.kind = LossKind::kBoundedCrossEntropy;
  out.push_back(verify_theorem3(joint, ch, ce));
  for (auto& r : verify_theorem4(joint, ch)) out.push_back(std::move(r));
  for (auto& r : verify_lemmas(joint, ch, loss)) out.push_back(std::move(r));
  return out;
}

namespace {

double unit_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

void dirichlet_ones(std::mt19937_64& rng, std::span<double> out) {
  double sum = 0.0;
  for (auto& v : out) {
    v = -std::log(unit_open(rng));
    sum += v;
  }
  for (auto& v : out) v /= sum;
}

}  // namespace

RandomInstance random_instance(std::uint64_t seed, const InstanceLimits& limits) {
  if (limits.max_x < 2 || limits.max_y < 2 || limits.max_d < 3 || limits.max_g < 2)
    throw ValidationError("instance limits too small");
  std::mt19937_64 rng(seed);
  const std::size_t nx = uniform_index(rng, 2, limits.max_x);
  const std::size_t ny = uniform_index(rng, 2, limits.max_y);
  const std::size_t nd = uniform_index(rng, 3, limits.max_d);
  const std::size_t ng = uniform_index(rng, 2, limits.max_g);

  RandomInstance inst;
  inst.seed = seed;
  std::vector<double> probs(nx * ny * nd * ng);
  dirichlet_ones(rng, probs);
  inst.joint.probs = ProbTable({nx, ny, nd, ng}, std::move(probs));
  inst.joint.target_domain = uniform_index(rng, 0, nd - 1);
  for (std::size_t d = 0; d < nd; ++d)
    if (d != inst.joint.target_domain) inst.joint.source_domains.push_back(d);

  inst.channel.nx = nx;
  inst.channel.ny = ny;
  inst.channel.cond.assign(nx * ny, 0.0);
  inst.channel.deterministic = unit_open(rng) < 0.2;
  for (std::size_t x = 0; x < nx; ++x) {
    std::span<double> row(inst.channel.cond.data() + x * ny, ny);
    if (inst.channel.deterministic)
      row[uniform_index(rng, 0, ny - 1)] = 1.0;
    else
      dirichlet_ones(rng, row);
  }
  inst.loss.kind = unit_open(rng) < 0.5 ? LossKind::kBoundedCrossEntropy : LossKind::kZeroOne;
  inst.loss.cap = 1.0 + 2.0 * unit_open(rng);
  return inst;
}

std::vector<BoundReport> run_harness(std::size_t count, std::uint64_t seed, std::size_t threads,
                                     const InstanceLimits& limits) {
  std::vector<std::vector<BoundReport>> slots(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count && !failed;) {
      try {
        const auto inst = random_instance(derive_seed(seed, i), limits);
        slots[i] = verify_all(inst.joint, inst.channel, inst.loss);
        for (auto& r : slots[i]) r.seed = inst.seed;
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<BoundReport> out;
  out.reserve(count * 10);
  for (auto& s : slots)
    for (auto& r : s) out.push_back(std::move(r));
  return out;
}

}  // namespace fairdg::bounds
