#pragma once

// Pareto fronts over (fairness violation V, utility U), the 2-D hypervolume
// indicator and global-criterion selection.

#include <cstddef>
#include <optional>
#include <vector>

namespace fairdg::pareto {

struct TradeoffPoint {
  double v = 0.0;  // minimized
  double u = 0.0;  // maximized
  double lambda = 0.0;
};

struct FrontConfig {
  double v_ref = 1.1;
  double u_ref = -0.1;
  double v_star = 0.0;
  double u_star = 1.0;
};

struct Bounds {
  double v_min = 0.0, v_max = 1.0, u_min = 0.0, u_max = 1.0;
};

// Non-dominated points sorted by ascending V (and so ascending U). Exact
// duplicates collapse to the one with the smallest lambda.
std::vector<TradeoffPoint> pareto_front(const std::vector<TradeoffPoint>& points);

Bounds bounds_of(const std::vector<TradeoffPoint>& points);

// Affine map into [0,1]^2; a zero range maps that coordinate to 0.
std::vector<TradeoffPoint> normalize_front(const std::vector<TradeoffPoint>& front,
                                           std::optional<Bounds> bounds = std::nullopt);

struct Hypervolume {
  double raw = 0.0;
  double percent = 0.0;
};

// Throws ContractError unless V and U are both non-decreasing.
Hypervolume hvi(const std::vector<TradeoffPoint>& norm_front, const FrontConfig& cfg = {});

// Index of the point closest to the utopia point; ties go to smaller V, then
// smaller index.
std::size_t select_global_criterion(const std::vector<TradeoffPoint>& norm_front,
                                    const FrontConfig& cfg = {});

struct FrontSummary {
  std::vector<TradeoffPoint> front;       // raw coordinates
  std::vector<TradeoffPoint> normalized;  // same order
  Bounds bounds;
  Hypervolume hv;
  std::size_t selected = 0;
};

// Front, normalization (bounds default to the full solution set), HVI and
// selection in one pass.
FrontSummary summarize(const std::vector<TradeoffPoint>& points, const FrontConfig& cfg = {},
                       std::optional<Bounds> bounds = std::nullopt);

}  // namespace fairdg::pareto
