#pragma once

// Exact discrete probability and information quantities over small finite
// spaces. All logarithms are natural (nats).

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace fairdg::prob {

inline constexpr double kNormTolerance = 1e-9;
inline constexpr double kJointTolerance = 1e-12;
inline constexpr std::size_t kMaxCells = 1'000'000;

// Dense row-major table over a product of finite axes.
class ProbTable {
 public:
  ProbTable() = default;
  ProbTable(std::vector<std::size_t> shape, std::vector<double> values);

  // Zero-filled table of the given shape.
  static ProbTable zeros(std::vector<std::size_t> shape);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }

  double& at(std::span<const std::size_t> index);
  double at(std::span<const std::size_t> index) const;
  double total() const;

  // Sum out every axis not listed; the result's axes follow `keep` order.
  ProbTable marginal(std::span<const std::size_t> keep) const;
  ProbTable marginal(std::initializer_list<std::size_t> keep) const {
    return marginal(std::span<const std::size_t>(keep.begin(), keep.size()));
  }

  // Merge groups of axes into single axes (row-major inside each group).
  // Every axis must appear in exactly one group, or be summed out if absent.
  ProbTable grouped(const std::vector<std::vector<std::size_t>>& groups) const;

  // Relabel the values of one axis: new index perm[i] receives old index i.
  ProbTable relabeled(std::size_t axis, std::span<const std::size_t> perm) const;

  // Throws ValidationError unless entries are >= 0 and sum to 1 within tol.
  void validate_distribution(double tol = kNormTolerance) const;

 private:
  std::size_t offset(std::span<const std::size_t> index) const;

  std::vector<std::size_t> shape_;
  std::vector<std::size_t> strides_;
  std::vector<double> values_;
};

// Axis order of a FiniteJoint table.
enum Axis : std::size_t { kX = 0, kY = 1, kD = 2, kG = 3 };

// Exact law of (input, label, domain, group) with source/target roles.
struct FiniteJoint {
  ProbTable probs;  // shape (|X|, |Y|, |D|, |G|)
  std::vector<std::size_t> source_domains;
  std::size_t target_domain = 0;

  std::size_t nx() const { return probs.shape()[kX]; }
  std::size_t ny() const { return probs.shape()[kY]; }
  std::size_t nd() const { return probs.shape()[kD]; }
  std::size_t ng() const { return probs.shape()[kG]; }

  void validate() const;
};

// Conditional law p(yhat | x), shape (|X|, |Y|).
struct Channel {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> cond;  // row-major
  bool deterministic = false;

  std::span<const double> row(std::size_t x) const {
    return std::span<const double>(cond).subspan(x * ny, ny);
  }
  void validate() const;

  static Channel identity(std::size_t n);
  static Channel constant(std::size_t nx, std::size_t ny, std::size_t label);
};

double tv_distance(std::span<const double> p, std::span<const double> q);
double kl_divergence(std::span<const double> p, std::span<const double> q);
double entropy(std::span<const double> p);

// Table axes (A, C); returns H(A | C).
double conditional_entropy(const ProbTable& joint);
// Table axes (A, B); returns I(A; B), clamped at 0.
double mutual_information(const ProbTable& joint);
// Table axes (A, B, C); returns I(A; B | C), clamped at 0.
double conditional_mutual_information(const ProbTable& joint);

// p(yhat, y, d, g) = sum_x p(yhat | x) p(x, y, d, g).
ProbTable push_channel(const FiniteJoint& joint, const Channel& ch);

// Law of (F, y, d, g) where F is the soft output of the channel, i.e. the
// class of inputs that share an identical row. `rows[f]` is that row.
struct SoftPush {
  ProbTable table;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> class_of_x;
};
SoftPush push_soft(const FiniteJoint& joint, const Channel& ch);

// Distribution of the given axis conditioned on fixed values of other axes,
// e.g. conditional(t, 0, {{1, y}, {3, g}}) = p(a0 | a1 = y, a3 = g).
// Throws DegenerateError when the conditioning event has zero mass.
std::vector<double> conditional(
    const ProbTable& table, std::size_t axis,
    std::span<const std::pair<std::size_t, std::size_t>> fixed);

// Restrict axis `axis` to the listed values and renormalize.
ProbTable restrict_axis(const ProbTable& table, std::size_t axis,
                        std::span<const std::size_t> keep);

}  // namespace fairdg::prob
