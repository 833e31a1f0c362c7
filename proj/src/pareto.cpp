#include "fairdg/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "fairdg/errors.hpp"

namespace fairdg::pareto {

std::vector<TradeoffPoint> pareto_front(const std::vector<TradeoffPoint>& points) {
  if (points.empty()) throw ValidationError("pareto_front: empty input");
  for (const auto& p : points)
    if (!std::isfinite(p.v) || !std::isfinite(p.u) || !std::isfinite(p.lambda))
      throw ValidationError("pareto_front: non-finite point");
  std::vector<TradeoffPoint> sorted = points;
  // Ascending V, descending U, ascending lambda: the first of each exact
  // duplicate run is the one kept.
  std::sort(sorted.begin(), sorted.end(), [](const TradeoffPoint& a, const TradeoffPoint& b) {
    return std::tie(a.v, b.u, a.lambda) < std::tie(b.v, a.u, b.lambda);
  });
  std::vector<TradeoffPoint> front;
  for (const auto& p : sorted) {
    if (!front.empty() && p.u <= front.back().u) continue;
    front.push_back(p);
  }
  return front;
}

Bounds bounds_of(const std::vector<TradeoffPoint>& points) {
  if (points.empty()) throw ValidationError("bounds_of: empty input");
  Bounds b{points[0].v, points[0].v, points[0].u, points[0].u};
  for (const auto& p : points) {
    b.v_min = std::min(b.v_min, p.v);
    b.v_max = std::max(b.v_max, p.v);
    b.u_min = std::min(b.u_min, p.u);
    b.u_max = std::max(b.u_max, p.u);
  }
  return b;
}

std::vector<TradeoffPoint> normalize_front(const std::vector<TradeoffPoint>& front,
                                           std::optional<Bounds> bounds) {
  if (front.empty()) return {};
  const Bounds b = bounds ? *bounds : bounds_of(front);
  const double dv = b.v_max - b.v_min, du = b.u_max - b.u_min;
  std::vector<TradeoffPoint> out;
  out.reserve(front.size());
  for (const auto& p : front)
    out.push_back({dv > 0.0 ? (p.v - b.v_min) / dv : 0.0, du > 0.0 ? (p.u - b.u_min) / du : 0.0,
                   p.lambda});
  return out;
}

Hypervolume hvi(const std::vector<TradeoffPoint>& f, const FrontConfig& cfg) {
  for (std::size_t i = 1; i < f.size(); ++i)
    if (f[i].v < f[i - 1].v || f[i].u < f[i - 1].u)
      throw ContractError("hvi: front must be sorted by ascending V and U");
  Hypervolume h;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double next_v = i + 1 < f.size() ? f[i + 1].v : cfg.v_ref;
    h.raw += (next_v - f[i].v) * (f[i].u - cfg.u_ref);
  }
  const double box = (cfg.v_ref - cfg.v_star) * (cfg.u_star - cfg.u_ref);
  h.percent = h.raw * 100.0 / box;
  return h;
}

std::size_t select_global_criterion(const std::vector<TradeoffPoint>& f, const FrontConfig& cfg) {
  if (f.empty()) throw ValidationError("select_global_criterion: empty front");
  std::size_t best = 0;
  double best_d = std::hypot(f[0].v - cfg.v_star, cfg.u_star - f[0].u);
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double d = std::hypot(f[i].v - cfg.v_star, cfg.u_star - f[i].u);
    if (d < best_d || (d == best_d && f[i].v < f[best].v)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

FrontSummary summarize(const std::vector<TradeoffPoint>& points, const FrontConfig& cfg,
                       std::optional<Bounds> bounds) {
  FrontSummary s;
  s.bounds = bounds ? *bounds : bounds_of(points);
  s.front = pareto_front(points);
  s.normalized = normalize_front(s.front, s.bounds);
  s.hv = hvi(s.normalized, cfg);
  s.selected = select_global_criterion(s.normalized, cfg);
  return s;
}

}  // namespace fairdg::pareto
