#pragma once

// Cross-entropy capped at C by flooring each class probability at e^{-C}:
//   p_hat_i = p_i * (1 - |Y| e^{-C}) + e^{-C}
// which requires |Y| e^{-C} < 1.

#include <cstddef>
#include <span>
#include <vector>

namespace fairdg {

struct CapResolution {
  double cap = 1.0;
  bool raised = false;
};

// Returns `cap` when the floor construction is valid for `num_classes`,
// otherwise ln(2 |Y|) with `raised` set.
CapResolution resolve_cap(double cap, std::size_t num_classes);

// Applies the floor transform in place. Throws ConfigError if
// 1 - |Y| e^{-cap} <= 0.
void floor_distribution(std::span<double> p, double cap);

std::vector<double> floored(std::span<const double> p, double cap);

}  // namespace fairdg
