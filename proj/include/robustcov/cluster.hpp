#pragma once

#include "robustcov/estimators.hpp"
#include "robustcov/spectral.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace robustcov::cluster {

/// Partition of N points with per-point silhouette scores and the
/// mean-over-standard-error selection score used to pick K.
struct Clustering {
    std::vector<int> labels; // length N, values in 0..k-1
    int k = 0;
    double wcss = 0.0;                // within-cluster sum of squares
    Eigen::VectorXd silhouette;       // per-point scores in [-1, 1]
    double quality_z = 0.0;           // mean(silhouette) / stderr(silhouette)
};

/// Nested allocation: per-cluster weights, across-cluster weights, and their
/// composition. final = intra * inter; column k of intra is supported only
/// on cluster k and sums to 1.
struct NcoAllocation {
    Eigen::MatrixXd intra; // N x K
    Eigen::VectorXd inter; // K
    Eigen::VectorXd final; // N
    Clustering clustering;
    spectral::DenoiseResult denoised;
};

/// d_ij = sqrt((1 - rho_ij) / 2); row i is asset i's feature vector.
Eigen::MatrixXd correlation_distance(const Eigen::MatrixXd& corr);

/// Lloyd iterations from k-means++ seeding; best of `restarts` runs by WCSS
/// (ties by restart index). Deterministic for a fixed seed. Restarts run
/// concurrently.
Clustering kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10);

/// s_i = (b_i - a_i) / max(a_i, b_i) with Euclidean distances between the
/// rows of `points`; singleton clusters score 0. Throws SingleCluster when
/// fewer than two clusters are present.
Eigen::VectorXd silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Runs kmeans for each K in [k_min, k_max] on the correlation-distance
/// features and returns the clustering with the highest silhouette
/// mean/standard-error score; ties go to the smaller K.
Clustering choose_k(const Eigen::MatrixXd& corr, int k_min, int k_max, std::uint64_t seed,
                    int restarts = 10);

/// Weight rule applied to a covariance sub-matrix; must return weights
/// summing to 1.
using InnerOptimizer = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// Minimum-variance closed form, with an SPD repair fallback for indefinite
/// sub-matrices. The default inner optimizer for NCO.
Eigen::VectorXd minvar_inner(const Eigen::MatrixXd& cov);

struct NcoOptions {
    int k_min = 2;
    int k_max = 4;
    std::uint64_t seed = 0;
    int restarts = 10;
    // k_min == k_max == 1 collapses to a single cluster (no clustering run).
};

/// Nested Clustered Optimization: de-noise, cluster the de-noised
/// correlation, optimize within clusters, then across cluster "funds", and
/// compose the weights.
NcoAllocation nco_allocate(const estimators::CovEstimate& cov, double q,
                           const InnerOptimizer& inner = minvar_inner,
                           const NcoOptions& options = {});

} // namespace robustcov::cluster
