#pragma once

// Empirical (conditional) distance correlation and HSIC over sample batches.
// A batch is an n x k matrix, one sample per row.

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace fairdg::dependence {

using RepBatch = Eigen::MatrixXd;

struct PartitionLabels {
  std::vector<std::size_t> y;
  std::optional<std::vector<std::size_t>> d;
};

Eigen::MatrixXd pairwise_distances(const RepBatch& a);
Eigen::MatrixXd double_center(const Eigen::MatrixXd& dist);

// Squared-statistic sums over a partition: sum over cells of sum_ij A_ij B_ij
// etc. The p_hat^2 / n_cell^2 weights reduce to a common 1/n^2, which
// cancels in the correlation ratio, so only the raw sums are kept.
struct DcorSums {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  std::size_t n = 0;
  std::size_t cells_used = 0;
  std::size_t cells_skipped = 0;
  std::size_t rows_skipped = 0;

  double dcov2() const;   // ab / n^2
  double dvar2_a() const;
  double dvar2_b() const;
  double correlation() const;  // sqrt(max(0, ab / sqrt(aa bb))), 0 if aa bb = 0
};

struct ConditionalDcor {
  double value = 0.0;
  DcorSums sums;
};

double dcor(const RepBatch& a, const RepBatch& b);

// Within-class statistics aggregated with p_hat_y^2 weights.
ConditionalDcor dcor_given_y(const RepBatch& zd, const RepBatch& ze, const PartitionLabels& labels);
// Same over the (y, d) partition; labels.d is required.
ConditionalDcor dcor_given_y_d(const RepBatch& zg, const RepBatch& ze,
                               const PartitionLabels& labels);

// Rows grouped by cell id. Cells with fewer than two rows are skipped.
std::vector<std::vector<std::size_t>> partition_cells(const std::vector<std::size_t>& y,
                                                      const std::vector<std::size_t>* d);

// When `eps` > 0 off-diagonal distances are sqrt(|.|^2 + eps).
DcorSums partition_sums(const RepBatch& a, const RepBatch& b,
                        const std::vector<std::vector<std::size_t>>& cells, double eps = 0.0);

struct DcorGradient {
  double value = 0.0;
  DcorSums sums;
  Eigen::MatrixXd grad_a;  // d value / d a, same shape as a
  Eigen::MatrixXd grad_b;
};

// Conditional dCor with smoothed distances and its exact gradient.
DcorGradient smoothed_dcor_with_grad(const RepBatch& a, const RepBatch& b,
                                     const std::vector<std::vector<std::size_t>>& cells,
                                     double eps);

// Biased HSIC, trace(K H L H) / n^2 with Gaussian kernels. An empty
// bandwidth selects the median pairwise distance of each batch.
double hsic(const RepBatch& a, const RepBatch& b, std::optional<double> bandwidth = std::nullopt);

double median_pairwise_distance(const RepBatch& a);

}  // namespace fairdg::dependence
