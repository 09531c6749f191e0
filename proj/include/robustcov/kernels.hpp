#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace robustcov::kernels {

/**
 * Data-parallel inner loops shared across the estimators and clustering code.
 *
 * Each kernel has an OpenMP-parallel entry point and a `_serial` reference
 * twin that runs the identical per-element arithmetic on one thread. The
 * parallel versions partition by output element, so both produce bitwise
 * identical results; the unit tests assert that and the bench_kernels tool
 * compares their throughput.
 */

/// Threshold-exceedance indicators per observation and asset.
/// up: r >= +h, down: r <= -h and not up (relevant only when h == 0).
struct ExceedanceFlags {
    Eigen::Index rows = 0; // observations T
    Eigen::Index cols = 0; // assets N
    std::vector<std::uint8_t> up;   // column-major T*N
    std::vector<std::uint8_t> down; // column-major T*N
};

ExceedanceFlags exceedance_flags(const Eigen::MatrixXd& returns, const Eigen::VectorXd& thresholds);

/// Joint region counts per asset pair: concordant (UU+DD), discordant
/// (UD+DU), and joint-neutral (NN). All outputs are symmetric N x N.
struct PairCounts {
    Eigen::MatrixXi conc;
    Eigen::MatrixXi disc;
    Eigen::MatrixXi nn;
};

PairCounts pair_counts(const ExceedanceFlags& flags);
PairCounts pair_counts_serial(const ExceedanceFlags& flags);

/// sum_t weights[t] * (x_t - mu)(x_t - mu)^T over the rows x_t of `data`.
/// Weights are used as given (no normalization).
Eigen::MatrixXd weighted_scatter(const Eigen::MatrixXd& data, const Eigen::VectorXd& mu,
                                 const Eigen::VectorXd& weights);
Eigen::MatrixXd weighted_scatter_serial(const Eigen::MatrixXd& data, const Eigen::VectorXd& mu,
                                        const Eigen::VectorXd& weights);

/// Squared Euclidean distances between the rows of `points` (symmetric, zero
/// diagonal).
Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& points);
Eigen::MatrixXd pairwise_sq_dists_serial(const Eigen::MatrixXd& points);

/// Nearest-centroid assignment. Returns per-point labels and writes the
/// squared distance to the chosen centroid into `sq_dist`. Ties go to the
/// lower centroid index.
void assign_nearest(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                    std::vector<int>& labels, Eigen::VectorXd& sq_dist);
void assign_nearest_serial(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                           std::vector<int>& labels, Eigen::VectorXd& sq_dist);

} // namespace robustcov::kernels
