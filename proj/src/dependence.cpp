#include "fairdg/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "fairdg/errors.hpp"

namespace fairdg::dependence {
namespace {

void check_finite(const RepBatch& a, const char* what) {
  if (!a.allFinite()) throw ValidationError(std::string(what) + ": non-finite entry");
}

void check_pair(const RepBatch& a, const RepBatch& b) {
  if (a.rows() != b.rows()) throw ValidationError("batches have different row counts");
  check_finite(a, "first batch");
  check_finite(b, "second batch");
}

// Row-major copy of selected rows, so the pair loops stay on raw memory.
struct Rows {
  std::size_t m = 0, k = 0;
  std::vector<double> v;
  Rows(const RepBatch& a, const std::vector<std::size_t>& idx)
      : m(idx.size()), k(static_cast<std::size_t>(a.cols())), v(m * k) {
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < k; ++c) v[r * k + c] = a(static_cast<Eigen::Index>(idx[r]), c);
  }
  double dist(std::size_t i, std::size_t j, double eps) const {
    const double* p = &v[i * k];
    const double* q = &v[j * k];
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double t = p[c] - q[c];
      s += t * t;
    }
    return std::sqrt(s + eps);
  }
  // Identical rows: the centred distance matrix is exactly zero.
  bool constant() const {
    for (std::size_t i = k; i < v.size(); ++i)
      if (v[i] != v[i % k]) return false;
    return true;
  }
};

// Row means and grand mean of the distance matrix. The diagonal is
// sqrt(eps), zero for exact distances.
void distance_means(const Rows& r, double eps, std::vector<double>& row, double& grand) {
  row.assign(r.m, std::sqrt(eps));
  for (std::size_t i = 0; i < r.m; ++i)
    for (std::size_t j = i + 1; j < r.m; ++j) {
      const double d = r.dist(i, j, eps);
      row[i] += d;
      row[j] += d;
    }
  grand = 0.0;
  for (auto& x : row) {
    grand += x;
    x /= static_cast<double>(r.m);
  }
  grand /= static_cast<double>(r.m) * static_cast<double>(r.m);
}

// Doubly centred smoothed distance matrix of the selected rows.
Eigen::MatrixXd centred(const Rows& r, double eps, Eigen::MatrixXd& dist) {
  const auto m = static_cast<Eigen::Index>(r.m);
  dist = Eigen::MatrixXd::Constant(m, m, std::sqrt(eps));
  if (r.constant()) return Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      dist(i, j) = dist(j, i) = r.dist(static_cast<std::size_t>(i), static_cast<std::size_t>(j), eps);
  return double_center(dist);
}

}  // namespace

Eigen::MatrixXd pairwise_distances(const RepBatch& a) {
  check_finite(a, "pairwise_distances");
  if (a.rows() < 1) throw ValidationError("pairwise_distances: empty batch");
  std::vector<std::size_t> all(static_cast<std::size_t>(a.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Rows r(a, all);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows(), a.rows());
  for (std::size_t i = 0; i < r.m; ++i)
    for (std::size_t j = i + 1; j < r.m; ++j) {
      const double d = r.dist(i, j, 0.0);
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
    }
  return out;
}

Eigen::MatrixXd double_center(const Eigen::MatrixXd& dist) {
  if (dist.rows() != dist.cols()) throw ValidationError("double_center: matrix not square");
  if (!dist.allFinite()) throw ValidationError("double_center: non-finite entry");
  const Eigen::VectorXd row = dist.rowwise().mean();
  const Eigen::RowVectorXd col = dist.colwise().mean();
  const double grand = dist.mean();
  Eigen::MatrixXd out = dist;
  out.colwise() -= row;
  out.rowwise() -= col;
  out.array() += grand;
  return out;
}

double DcorSums::dcov2() const { return n ? ab / (double(n) * double(n)) : 0.0; }
double DcorSums::dvar2_a() const { return n ? aa / (double(n) * double(n)) : 0.0; }
double DcorSums::dvar2_b() const { return n ? bb / (double(n) * double(n)) : 0.0; }

double DcorSums::correlation() const {
  const double denom = aa * bb;
  if (!(denom > 0.0)) return 0.0;
  const double r = ab / std::sqrt(denom);
  return std::sqrt(std::clamp(r, 0.0, 1.0));
}

std::vector<std::vector<std::size_t>> partition_cells(const std::vector<std::size_t>& y,
                                                      const std::vector<std::size_t>* d) {
  if (d && d->size() != y.size()) throw ValidationError("label vectors differ in length");
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < y.size(); ++i) cells[{y[i], d ? (*d)[i] : 0}].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [key, rows] : cells) out.push_back(std::move(rows));
  return out;
}

DcorSums partition_sums(const RepBatch& a, const RepBatch& b,
                        const std::vector<std::vector<std::size_t>>& cells, double eps) {
  check_pair(a, b);
  DcorSums s;
  for (const auto& cell : cells) s.n += cell.size();
  for (const auto& cell : cells) {
    if (cell.size() < 2) {
      ++s.cells_skipped;
      s.rows_skipped += cell.size();
      continue;
    }
    ++s.cells_used;
    const Rows ra(a, cell), rb(b, cell);
    std::vector<double> mean_a, mean_b;
    double grand_a, grand_b;
    if (ra.constant() && rb.constant()) continue;
    distance_means(ra, eps, mean_a, grand_a);
    distance_means(rb, eps, mean_b, grand_b);
    const bool flat_a = ra.constant(), flat_b = rb.constant();
    const double diag = std::sqrt(eps);
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < ra.m; ++i) {
      const double ad = flat_a ? 0.0 : diag + grand_a - 2.0 * mean_a[i];
      const double bd = flat_b ? 0.0 : diag + grand_b - 2.0 * mean_b[i];
      ab += ad * bd;
      aa += ad * ad;
      bb += bd * bd;
    }
    double ab_off = 0.0, aa_off = 0.0, bb_off = 0.0;
    for (std::size_t i = 0; i < ra.m; ++i)
      for (std::size_t j = i + 1; j < ra.m; ++j) {
        const double A = flat_a ? 0.0 : ra.dist(i, j, eps) - mean_a[i] - mean_a[j] + grand_a;
        const double B = flat_b ? 0.0 : rb.dist(i, j, eps) - mean_b[i] - mean_b[j] + grand_b;
        ab_off += A * B;
        aa_off += A * A;
        bb_off += B * B;
      }
    s.ab += ab + 2.0 * ab_off;
    s.aa += aa + 2.0 * aa_off;
    s.bb += bb + 2.0 * bb_off;
  }
  return s;
}

double dcor(const RepBatch& a, const RepBatch& b) {
  check_pair(a, b);
  if (a.rows() < 2) throw ValidationError("dcor needs at least two rows");
  std::vector<std::size_t> all(static_cast<std::size_t>(a.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return partition_sums(a, b, {all}).correlation();
}

namespace {

ConditionalDcor conditional(const RepBatch& a, const RepBatch& b, const PartitionLabels& labels,
                            bool use_domain) {
  if (labels.y.size() != static_cast<std::size_t>(a.rows()))
    throw ValidationError("label count does not match batch rows");
  const auto cells =
      partition_cells(labels.y, use_domain ? &labels.d.value() : nullptr);
  ConditionalDcor out;
  out.sums = partition_sums(a, b, cells);
  if (out.sums.cells_used == 0)
    throw DegenerateError("every partition cell has fewer than two samples");
  out.value = out.sums.correlation();
  return out;
}

}  // namespace

ConditionalDcor dcor_given_y(const RepBatch& zd, const RepBatch& ze, const PartitionLabels& labels) {
  return conditional(zd, ze, labels, false);
}

ConditionalDcor dcor_given_y_d(const RepBatch& zg, const RepBatch& ze,
                               const PartitionLabels& labels) {
  if (!labels.d) throw ValidationError("dcor_given_y_d needs domain labels");
  return conditional(zg, ze, labels, true);
}

DcorGradient smoothed_dcor_with_grad(const RepBatch& a, const RepBatch& b,
                                     const std::vector<std::vector<std::size_t>>& cells,
                                     double eps) {
  check_pair(a, b);
  struct Cell {
    const std::vector<std::size_t>* idx;
    Eigen::MatrixXd da, db, A, B;
  };
  std::vector<Cell> work;
  DcorGradient out;
  out.grad_a = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  out.grad_b = Eigen::MatrixXd::Zero(b.rows(), b.cols());
  for (const auto& cell : cells) out.sums.n += cell.size();
  for (const auto& cell : cells) {
    if (cell.size() < 2) {
      ++out.sums.cells_skipped;
      out.sums.rows_skipped += cell.size();
      continue;
    }
    ++out.sums.cells_used;
    Cell c{&cell, {}, {}, {}, {}};
    c.A = centred(Rows(a, cell), eps, c.da);
    c.B = centred(Rows(b, cell), eps, c.db);
    out.sums.ab += (c.A.array() * c.B.array()).sum();
    out.sums.aa += c.A.squaredNorm();
    out.sums.bb += c.B.squaredNorm();
    work.push_back(std::move(c));
  }
  const double denom = out.sums.aa * out.sums.bb;
  if (!(denom > 0.0)) return out;
  const double r = out.sums.ab / std::sqrt(denom);
  if (!(r > 0.0)) return out;
  out.value = std::sqrt(std::min(r, 1.0));
  const double root = std::sqrt(denom);
  const double outer = 1.0 / (2.0 * out.value);

  // d value / d (distance matrix) for one side, then chained to the rows.
  auto chain = [&](const Eigen::MatrixXd& g, const Eigen::MatrixXd& dist, const RepBatch& z,
                   const std::vector<std::size_t>& idx, Eigen::MatrixXd& grad) {
    const auto m = static_cast<Eigen::Index>(idx.size());
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto zi = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < m; ++j) {
        if (i == j || dist(i, j) == 0.0) continue;
        const auto zj = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]);
        grad.row(zi) += (2.0 * g(i, j) / dist(i, j)) * (z.row(zi) - z.row(zj));
      }
    }
  };
  for (const auto& c : work) {
    const Eigen::MatrixXd ga = outer * (c.B / root - r * c.A / out.sums.aa);
    const Eigen::MatrixXd gb = outer * (c.A / root - r * c.B / out.sums.bb);
    chain(ga, c.da, a, *c.idx, out.grad_a);
    chain(gb, c.db, b, *c.idx, out.grad_b);
  }
  return out;
}

double median_pairwise_distance(const RepBatch& a) {
  const Eigen::MatrixXd d = pairwise_distances(a);
  std::vector<double> v;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) v.push_back(d(i, j));
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double hi = v[mid];
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

double hsic(const RepBatch& a, const RepBatch& b, std::optional<double> bandwidth) {
  check_pair(a, b);
  if (a.rows() < 4) throw ValidationError("hsic needs at least four rows");
  if (bandwidth && !(*bandwidth > 0.0)) throw ValidationError("hsic bandwidth must be positive");
  auto gram = [&](const RepBatch& z) {
    double sigma = bandwidth ? *bandwidth : median_pairwise_distance(z);
    if (!(sigma > 0.0)) throw ValidationError("hsic: median pairwise distance is zero");
    const Eigen::MatrixXd d = pairwise_distances(z);
    return Eigen::MatrixXd((-d.array().square() / (2.0 * sigma * sigma)).exp());
  };
  const Eigen::MatrixXd K = gram(a);
  const Eigen::MatrixXd L = gram(b);
  const double n = static_cast<double>(a.rows());
  // H K H is double centring of K.
  const Eigen::MatrixXd Kc = double_center(K);
  return std::max(0.0, (Kc.array() * L.array()).sum() / (n * n));
}

}  // namespace fairdg::dependence
