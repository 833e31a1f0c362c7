#include "fairdg/prob_core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "fairdg/errors.hpp"

namespace fairdg::prob {
namespace {

std::vector<std::size_t> strides_for(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

// Advances a row-major multi-index; returns false after the last cell.
bool next_index(std::vector<std::size_t>& idx, const std::vector<std::size_t>& shape) {
  for (std::size_t i = idx.size(); i-- > 0;) {
    if (++idx[i] < shape[i]) return true;
    idx[i] = 0;
  }
  return false;
}

void check_distribution(std::span<const double> p, const char* what) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError(std::string(what) + ": negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormTolerance)
    throw ValidationError(std::string(what) + ": entries sum to " + std::to_string(sum));
}

double xlogx_ratio(double p, double q) { return p > 0.0 ? p * std::log(p / q) : 0.0; }

}  // namespace

ProbTable::ProbTable(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), strides_(strides_for(shape_)), values_(std::move(values)) {
  for (auto s : shape_)
    if (s == 0) throw ValidationError("ProbTable: zero-length axis");
  if (product(shape_) != values_.size())
    throw ValidationError("ProbTable: shape does not match value count");
  if (values_.size() > kMaxCells) throw ValidationError("ProbTable: more than 1e6 cells");
}

ProbTable ProbTable::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = product(shape);
  return ProbTable(std::move(shape), std::vector<double>(n, 0.0));
}

std::size_t ProbTable::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw ValidationError("ProbTable: index rank mismatch");
  std::size_t off = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[i]) throw ValidationError("ProbTable: index out of range");
    off += index[i] * strides_[i];
  }
  return off;
}

double& ProbTable::at(std::span<const std::size_t> index) { return values_[offset(index)]; }
double ProbTable::at(std::span<const std::size_t> index) const { return values_[offset(index)]; }

double ProbTable::total() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

ProbTable ProbTable::marginal(std::span<const std::size_t> keep) const {
  std::vector<std::vector<std::size_t>> groups;
  for (auto a : keep) groups.push_back({a});
  return grouped(groups);
}

ProbTable ProbTable::grouped(const std::vector<std::vector<std::size_t>>& groups) const {
  std::vector<int> seen(rank(), 0);
  std::vector<std::size_t> out_shape;
  for (const auto& g : groups) {
    if (g.empty()) throw ValidationError("ProbTable::grouped: empty group");
    std::size_t n = 1;
    for (auto a : g) {
      if (a >= rank() || seen[a]++) throw ValidationError("ProbTable::grouped: bad axis list");
      n *= shape_[a];
    }
    out_shape.push_back(n);
  }
  ProbTable out = zeros(out_shape);
  std::vector<std::size_t> idx(rank(), 0);
  std::size_t flat = 0;
  do {
    std::size_t dst = 0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      std::size_t coord = 0;
      for (auto a : groups[gi]) coord = coord * shape_[a] + idx[a];
      dst += coord * out.strides_[gi];
    }
    out.values_[dst] += values_[flat++];
  } while (next_index(idx, shape_));
  return out;
}

ProbTable ProbTable::relabeled(std::size_t axis, std::span<const std::size_t> perm) const {
  if (axis >= rank() || perm.size() != shape_[axis])
    throw ValidationError("ProbTable::relabeled: permutation size mismatch");
  std::vector<int> hit(perm.size(), 0);
  for (auto p : perm)
    if (p >= perm.size() || hit[p]++) throw ValidationError("ProbTable::relabeled: not a permutation");
  ProbTable out = zeros(shape_);
  std::vector<std::size_t> idx(rank(), 0);
  std::size_t flat = 0;
  do {
    auto dst = idx;
    dst[axis] = perm[idx[axis]];
    out.at(dst) = values_[flat++];
  } while (next_index(idx, shape_));
  return out;
}

void ProbTable::validate_distribution(double tol) const {
  double sum = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("table has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol)
    throw ValidationError("table entries sum to " + std::to_string(sum) + ", not 1");
}

void FiniteJoint::validate() const {
  if (probs.rank() != 4) throw ValidationError("FiniteJoint: table must have 4 axes (x, y, d, g)");
  probs.validate_distribution(kJointTolerance);
  if (source_domains.size() < 2) throw ValidationError("FiniteJoint: need at least 2 source domains");
  if (target_domain >= nd()) throw ValidationError("FiniteJoint: target domain out of range");
  std::vector<int> seen(nd(), 0);
  for (auto d : source_domains) {
    if (d >= nd() || seen[d]++) throw ValidationError("FiniteJoint: bad source domain list");
    if (d == target_domain) throw ValidationError("FiniteJoint: target domain listed as a source");
  }
}

void Channel::validate() const {
  if (nx == 0 || ny == 0 || cond.size() != nx * ny) throw ValidationError("Channel: shape mismatch");
  for (std::size_t x = 0; x < nx; ++x) {
    auto r = row(x);
    double sum = 0.0;
    for (double v : r) {
      if (!std::isfinite(v) || v < 0.0) throw ValidationError("Channel: negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kJointTolerance) throw ValidationError("Channel: row does not sum to 1");
    if (deterministic && std::count(r.begin(), r.end(), 1.0) != 1)
      throw ValidationError("Channel: deterministic row is not one-hot");
  }
}

Channel Channel::identity(std::size_t n) {
  Channel ch{n, n, std::vector<double>(n * n, 0.0), true};
  for (std::size_t i = 0; i < n; ++i) ch.cond[i * n + i] = 1.0;
  return ch;
}

Channel Channel::constant(std::size_t nx, std::size_t ny, std::size_t label) {
  if (label >= ny) throw ValidationError("Channel::constant: label out of range");
  Channel ch{nx, ny, std::vector<double>(nx * ny, 0.0), true};
  for (std::size_t x = 0; x < nx; ++x) ch.cond[x * ny + label] = 1.0;
  return ch;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("tv_distance: length mismatch");
  check_distribution(p, "tv_distance");
  check_distribution(q, "tv_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("kl_divergence: length mismatch");
  check_distribution(p, "kl_divergence");
  check_distribution(q, "kl_divergence");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (q[i] <= 0.0) throw ValidationError("kl_divergence: reference must be strictly positive");
    s += xlogx_ratio(p[i], q[i]);
  }
  return std::max(0.0, s);
}

double entropy(std::span<const double> p) {
  check_distribution(p, "entropy");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double conditional_entropy(const ProbTable& joint) {
  if (joint.rank() != 2) throw ValidationError("conditional_entropy: expects a 2-way table");
  joint.validate_distribution();
  const auto pc = joint.marginal({1});
  const std::size_t na = joint.shape()[0], nc = joint.shape()[1];
  auto v = joint.values();
  double h = 0.0;
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t c = 0; c < nc; ++c) h -= xlogx_ratio(v[a * nc + c], pc.values()[c]);
  return std::max(0.0, h);
}

double mutual_information(const ProbTable& joint) {
  if (joint.rank() != 2) throw ValidationError("mutual_information: expects a 2-way table");
  joint.validate_distribution();
  const auto pa = joint.marginal({0});
  const auto pb = joint.marginal({1});
  const std::size_t na = joint.shape()[0], nb = joint.shape()[1];
  auto v = joint.values();
  double mi = 0.0;
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b)
      mi += xlogx_ratio(v[a * nb + b], pa.values()[a] * pb.values()[b]);
  return std::max(0.0, mi);
}

double conditional_mutual_information(const ProbTable& joint) {
  if (joint.rank() != 3) throw ValidationError("conditional_mutual_information: expects a 3-way table");
  joint.validate_distribution();
  const auto pac = joint.marginal({0, 2});
  const auto pbc = joint.marginal({1, 2});
  const auto pc = joint.marginal({2});
  const std::size_t na = joint.shape()[0], nb = joint.shape()[1], nc = joint.shape()[2];
  auto v = joint.values();
  double cmi = 0.0;
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t b = 0; b < nb; ++b)
      for (std::size_t c = 0; c < nc; ++c) {
        const double pabc = v[(a * nb + b) * nc + c];
        if (pabc <= 0.0) continue;
        const double num = pabc * pc.values()[c];
        const double den = pac.values()[a * nc + c] * pbc.values()[b * nc + c];
        cmi += pabc * std::log(num / den);
      }
  return std::max(0.0, cmi);
}

ProbTable push_channel(const FiniteJoint& joint, const Channel& ch) {
  joint.validate();
  ch.validate();
  if (ch.nx != joint.nx()) throw ValidationError("push_channel: channel |X| does not match joint");
  const std::size_t ny = joint.ny(), nd = joint.nd(), ng = joint.ng();
  ProbTable out = ProbTable::zeros({ch.ny, ny, nd, ng});
  auto src = joint.probs.values();
  auto dst = out.mutable_values();
  const std::size_t inner = ny * nd * ng;
  for (std::size_t x = 0; x < joint.nx(); ++x) {
    auto r = ch.row(x);
    for (std::size_t yh = 0; yh < ch.ny; ++yh) {
      if (r[yh] == 0.0) continue;
      for (std::size_t k = 0; k < inner; ++k) dst[yh * inner + k] += r[yh] * src[x * inner + k];
    }
  }
  return out;
}

SoftPush push_soft(const FiniteJoint& joint, const Channel& ch) {
  joint.validate();
  ch.validate();
  if (ch.nx != joint.nx()) throw ValidationError("push_soft: channel |X| does not match joint");
  SoftPush out;
  std::map<std::vector<double>, std::size_t> index;
  for (std::size_t x = 0; x < ch.nx; ++x) {
    std::vector<double> r(ch.row(x).begin(), ch.row(x).end());
    auto [it, inserted] = index.emplace(r, out.rows.size());
    if (inserted) out.rows.push_back(std::move(r));
    out.class_of_x.push_back(it->second);
  }
  const std::size_t inner = joint.ny() * joint.nd() * joint.ng();
  out.table = ProbTable::zeros({out.rows.size(), joint.ny(), joint.nd(), joint.ng()});
  auto src = joint.probs.values();
  auto dst = out.table.mutable_values();
  for (std::size_t x = 0; x < ch.nx; ++x)
    for (std::size_t k = 0; k < inner; ++k) dst[out.class_of_x[x] * inner + k] += src[x * inner + k];
  return out;
}

std::vector<double> conditional(const ProbTable& table, std::size_t axis,
                                std::span<const std::pair<std::size_t, std::size_t>> fixed) {
  if (axis >= table.rank()) throw ValidationError("conditional: axis out of range");
  for (auto [a, v] : fixed)
    if (a >= table.rank() || a == axis || v >= table.shape()[a])
      throw ValidationError("conditional: bad conditioning");
  std::vector<double> out(table.shape()[axis], 0.0);
  std::vector<std::size_t> idx(table.rank(), 0);
  auto vals = table.values();
  std::size_t flat = 0;
  do {
    bool match = true;
    for (auto [a, v] : fixed) match = match && idx[a] == v;
    if (match) out[idx[axis]] += vals[flat];
    ++flat;
  } while (next_index(idx, table.shape()));
  const double mass = std::accumulate(out.begin(), out.end(), 0.0);
  if (!(mass > 0.0)) throw DegenerateError("conditional: conditioning event has zero mass");
  for (auto& v : out) v /= mass;
  return out;
}

ProbTable restrict_axis(const ProbTable& table, std::size_t axis, std::span<const std::size_t> keep) {
  if (axis >= table.rank() || keep.empty()) throw ValidationError("restrict_axis: bad arguments");
  auto shape = table.shape();
  shape[axis] = keep.size();
  ProbTable out = ProbTable::zeros(shape);
  std::vector<std::size_t> idx(shape.size(), 0);
  do {
    auto src = idx;
    src[axis] = keep[idx[axis]];
    out.at(idx) = table.at(src);
  } while (next_index(idx, shape));
  const double mass = out.total();
  if (!(mass > 0.0)) throw DegenerateError("restrict_axis: selected values have zero mass");
  for (auto& v : out.mutable_values()) v /= mass;
  return out;
}

}  // namespace fairdg::prob
