#pragma once

// Independent reference implementations used by the tests. They are written
// from the definitions with plain loops and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;  // row-major samples

inline std::vector<double> dirichlet(std::mt19937_64& rng, std::size_t k) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& v : p) s += (v = e(rng));
  for (auto& v : p) v /= s;
  return p;
}

inline double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

// I(A;B) from a |A| x |B| table by the KL definition.
inline double mi2(const Matrix& p) {
  std::vector<double> pa(p.size(), 0.0), pb(p[0].size(), 0.0);
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < p[a].size(); ++b) {
      pa[a] += p[a][b];
      pb[b] += p[a][b];
    }
  double s = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < p[a].size(); ++b)
      if (p[a][b] > 0.0) s += p[a][b] * std::log(p[a][b] / (pa[a] * pb[b]));
  return s;
}

// H(A|C) from a |A| x |C| table.
inline double cond_entropy2(const Matrix& p) {
  double s = 0.0;
  for (std::size_t c = 0; c < p[0].size(); ++c) {
    double pc = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) pc += p[a][c];
    for (std::size_t a = 0; a < p.size(); ++a)
      if (p[a][c] > 0.0) s -= p[a][c] * std::log(p[a][c] / pc);
  }
  return s;
}

// I(A;B|C) from p[a][b][c].
inline double cmi3(const std::vector<Matrix>& p) {
  const std::size_t na = p.size(), nb = p[0].size(), nc = p[0][0].size();
  double s = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    double pc = 0.0;
    std::vector<double> pac(na, 0.0), pbc(nb, 0.0);
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t b = 0; b < nb; ++b) {
        pc += p[a][b][c];
        pac[a] += p[a][b][c];
        pbc[b] += p[a][b][c];
      }
    for (std::size_t a = 0; a < na; ++a)
      for (std::size_t b = 0; b < nb; ++b)
        if (p[a][b][c] > 0.0) s += p[a][b][c] * std::log(p[a][b][c] * pc / (pac[a] * pbc[b]));
  }
  return s;
}

// ---------------------------------------------------------------- distance correlation

inline double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

// Doubly centred distance matrix of the listed rows, term by term.
inline Matrix centred(const Matrix& x, const std::vector<std::size_t>& rows) {
  const std::size_t m = rows.size();
  Matrix d(m, std::vector<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) d[i][j] = euclid(x[rows[i]], x[rows[j]]);
  std::vector<double> row_mean(m, 0.0), col_mean(m, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      row_mean[i] += d[i][j] / static_cast<double>(m);
      col_mean[j] += d[i][j] / static_cast<double>(m);
      grand += d[i][j] / static_cast<double>(m * m);
    }
  Matrix c(m, std::vector<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) c[i][j] = d[i][j] - row_mean[i] - col_mean[j] + grand;
  return c;
}

struct CellStats {
  double dcov2 = 0.0, dvar2_a = 0.0, dvar2_b = 0.0;
};

inline CellStats cell_stats(const Matrix& a, const Matrix& b, const std::vector<std::size_t>& rows) {
  const Matrix ca = centred(a, rows), cb = centred(b, rows);
  const double m2 = static_cast<double>(rows.size() * rows.size());
  CellStats s;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) {
      s.dcov2 += ca[i][j] * cb[i][j] / m2;
      s.dvar2_a += ca[i][j] * ca[i][j] / m2;
      s.dvar2_b += cb[i][j] * cb[i][j] / m2;
    }
  return s;
}

// Class-wise statistics weighted by p_hat^2, then the correlation ratio.
// Cells with fewer than two rows are left out of the sums.
inline double conditional_dcor(const Matrix& a, const Matrix& b, const std::vector<std::size_t>& key) {
  std::map<std::size_t, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < key.size(); ++i) cells[key[i]].push_back(i);
  const double n = static_cast<double>(key.size());
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (const auto& [k, rows] : cells) {
    if (rows.size() < 2) continue;
    const CellStats s = cell_stats(a, b, rows);
    const double w = (static_cast<double>(rows.size()) / n) * (static_cast<double>(rows.size()) / n);
    cov += w * s.dcov2;
    va += w * s.dvar2_a;
    vb += w * s.dvar2_b;
  }
  const double den = std::sqrt(va * vb);
  if (!(den > 0.0)) return 0.0;
  return std::sqrt(std::max(0.0, cov / den));
}

inline double plain_dcor(const Matrix& a, const Matrix& b) {
  return conditional_dcor(a, b, std::vector<std::size_t>(a.size(), 0));
}

// ---------------------------------------------------------------- Pareto

struct Pt {
  double v, u, lambda;
};

// O(n^2) filter: keep points no other point weakly dominates while differing
// somewhere; duplicates keep the smallest lambda.
inline std::vector<Pt> brute_front(const std::vector<Pt>& pts) {
  std::vector<Pt> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      if (i == j) continue;
      const bool weak = pts[j].v <= pts[i].v && pts[j].u >= pts[i].u;
      const bool differs = pts[j].v != pts[i].v || pts[j].u != pts[i].u;
      if (weak && differs) dominated = true;
    }
    if (dominated) continue;
    bool dup = false;
    for (auto& o : out)
      if (o.v == pts[i].v && o.u == pts[i].u) {
        o.lambda = std::min(o.lambda, pts[i].lambda);
        dup = true;
      }
    if (!dup) out.push_back(pts[i]);
  }
  std::sort(out.begin(), out.end(), [](const Pt& a, const Pt& b) { return a.v < b.v; });
  return out;
}

struct McEstimate {
  double area, stderr_;
};

// Area of {(v,u) in [0, v_ref] x [u_ref, 1] : some front point has v_i <= v
// and u_i >= u} by uniform sampling over the box.
inline McEstimate mc_area(const std::vector<Pt>& front, double v_ref, double u_ref, std::size_t samples,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uv(0.0, v_ref), uu(u_ref, 1.0);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double v = uv(rng), u = uu(rng);
    for (const auto& p : front)
      if (p.v <= v && p.u >= u) {
        ++hits;
        break;
      }
  }
  const double box = v_ref * (1.0 - u_ref);
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  return {frac * box, box * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples))};
}

// ---------------------------------------------------------------- fairness

// EOD and EO by counting, with the 2 / (|Y| |G| (|G| - 1)) normalisation.
inline std::pair<double, double> count_eod_eo(const std::vector<std::size_t>& yt,
                                              const std::vector<std::size_t>& yp,
                                              const std::vector<std::size_t>& g, std::size_t ny,
                                              std::size_t ng) {
  std::vector<std::vector<std::vector<double>>> cnt(ny, std::vector<std::vector<double>>(ng, std::vector<double>(ny, 0.0)));
  for (std::size_t i = 0; i < yt.size(); ++i) cnt[yt[i]][g[i]][yp[i]] += 1.0;
  double eod = 0.0, eo = 0.0;
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t a = 0; a < ng; ++a)
      for (std::size_t b = a + 1; b < ng; ++b) {
        double na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < ny; ++k) {
          na += cnt[y][a][k];
          nb += cnt[y][b][k];
        }
        if (na == 0.0 || nb == 0.0) continue;
        double tv = 0.0;
        for (std::size_t k = 0; k < ny; ++k) tv += std::abs(cnt[y][a][k] / na - cnt[y][b][k] / nb);
        eod += tv / 2.0;
        eo += std::abs(cnt[y][a][y] / na - cnt[y][b][y] / nb);
      }
  const double c = 2.0 / static_cast<double>(ny * ng * (ng - 1));
  return {c * eod, c * eo};
}

}  // namespace oracle
