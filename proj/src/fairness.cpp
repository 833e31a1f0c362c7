#include "fairdg/fairness.hpp"

#include <algorithm>
#include <cmath>

#include "fairdg/errors.hpp"

namespace fairdg::fairness {
namespace {

std::size_t infer(const std::vector<std::size_t>& a, const std::vector<std::size_t>* b) {
  std::size_t m = 0;
  for (auto v : a) m = std::max(m, v + 1);
  if (b)
    for (auto v : *b) m = std::max(m, v + 1);
  return m;
}

template <class Gap>
GroupGap pair_sum(const PredDists& p, Gap gap) {
  GroupGap out;
  double sum = 0.0;
  for (std::size_t y = 0; y < p.num_labels; ++y)
    for (std::size_t g = 0; g < p.num_groups; ++g)
      for (std::size_t h = g + 1; h < p.num_groups; ++h) {
        if (!p.has(y, g) || !p.has(y, h)) {
          ++out.pairs_skipped;
          continue;
        }
        sum += gap(y, p.row(y, g), p.row(y, h));
        ++out.pairs_used;
      }
  if (out.pairs_used == 0)
    throw DegenerateError("no label has two populated groups to compare");
  const double ny = static_cast<double>(p.num_labels), ng = static_cast<double>(p.num_groups);
  out.value = 2.0 * sum / (ny * ng * (ng - 1.0));
  return out;
}

}  // namespace

std::size_t EvalBatch::labels() const {
  return num_labels ? num_labels : infer(y_true, &y_pred);
}
std::size_t EvalBatch::groups() const { return num_groups ? num_groups : infer(g, nullptr); }

void EvalBatch::validate() const {
  const std::size_t n = y_true.size();
  if (y_pred.size() != n || g.size() != n || (d && d->size() != n))
    throw ValidationError("evaluation columns differ in length");
  if (n == 0) throw ValidationError("empty evaluation batch");
  const std::size_t ny = labels(), ng = groups();
  for (std::size_t i = 0; i < n; ++i)
    if (y_true[i] >= ny || y_pred[i] >= ny || g[i] >= ng)
      throw ValidationError("label or group id out of range at row " + std::to_string(i));
}

PredDists conditional_pred_dists(const EvalBatch& batch) {
  batch.validate();
  PredDists p;
  p.num_labels = batch.labels();
  p.num_groups = batch.groups();
  const std::size_t cells = p.num_labels * p.num_groups;
  p.probs.assign(cells * p.num_labels, 0.0);
  p.counts.assign(cells, 0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::size_t c = batch.y_true[i] * p.num_groups + batch.g[i];
    p.probs[c * p.num_labels + batch.y_pred[i]] += 1.0;
    ++p.counts[c];
  }
  p.populated.assign(cells, false);
  for (std::size_t c = 0; c < cells; ++c) {
    if (p.counts[c] == 0) continue;
    p.populated[c] = true;
    for (std::size_t k = 0; k < p.num_labels; ++k)
      p.probs[c * p.num_labels + k] /= static_cast<double>(p.counts[c]);
  }
  return p;
}

GroupGap eod(const EvalBatch& batch) {
  const PredDists p = conditional_pred_dists(batch);
  if (p.num_groups < 2) throw DegenerateError("EOD needs at least two groups");
  return pair_sum(p, [&](std::size_t, const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.num_labels; ++k) s += std::abs(a[k] - b[k]);
    return 0.5 * s;
  });
}

GroupGap eo(const EvalBatch& batch) {
  const PredDists p = conditional_pred_dists(batch);
  if (p.num_groups < 2) throw DegenerateError("EO needs at least two groups");
  return pair_sum(p, [](std::size_t y, const double* a, const double* b) {
    return std::abs(a[y] - b[y]);
  });
}

double accuracy(const EvalBatch& batch) {
  batch.validate();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) hits += batch.y_pred[i] == batch.y_true[i];
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

prob::ProbTable empirical_joint(const EvalBatch& batch) {
  batch.validate();
  const std::size_t ny = batch.labels(), ng = batch.groups();
  const std::size_t nd = batch.d ? infer(*batch.d, nullptr) : 1;
  auto t = prob::ProbTable::zeros({ny, ny, nd, ng});
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const std::array<std::size_t, 4> idx{batch.y_pred[i], batch.y_true[i],
                                         batch.d ? (*batch.d)[i] : 0, batch.g[i]};
    t.at(idx) += w;
  }
  return t;
}

}  // namespace fairdg::fairness
