#include "fairdg/bounded_ce.hpp"

#include <cmath>
#include <string>

#include "fairdg/errors.hpp"

namespace fairdg {

CapResolution resolve_cap(double cap, std::size_t num_classes) {
  if (!(cap > 0.0)) throw ConfigError("loss cap must be positive");
  if (num_classes == 0) throw ConfigError("need at least one class");
  const double scale = 1.0 - static_cast<double>(num_classes) * std::exp(-cap);
  if (scale > 0.0) return {cap, false};
  return {std::log(2.0 * static_cast<double>(num_classes)), true};
}

void floor_distribution(std::span<double> p, double cap) {
  const double floor = std::exp(-cap);
  const double scale = 1.0 - static_cast<double>(p.size()) * floor;
  if (!(scale > 0.0))
    throw ConfigError("loss cap " + std::to_string(cap) + " too small for " +
                      std::to_string(p.size()) + " classes; raise it above ln|Y|");
  for (auto& v : p) v = v * scale + floor;
}

std::vector<double> floored(std::span<const double> p, double cap) {
  std::vector<double> out(p.begin(), p.end());
  floor_distribution(out, cap);
  return out;
}

}  // namespace fairdg
