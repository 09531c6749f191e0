#include "robustcov/cluster.hpp"

#include "robustcov/errors.hpp"
#include "robustcov/kernels.hpp"
#include "robustcov/threading.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace robustcov::cluster {

namespace {

constexpr int kMaxLloydIters = 300;
constexpr double kWcssRelTol = 1e-9;

/// Uniform double in [0,1) from the raw generator, independent of the
/// standard library's distribution implementation.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& points, int k, std::mt19937_64& rng) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd centroids(k, points.cols());
    const Eigen::Index first = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n));
    centroids.row(0) = points.row(std::min(first, n - 1));

    Eigen::VectorXd d2 = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            for (; pick < n - 1; ++pick) {
                target -= d2[pick];
                if (target <= 0.0) break;
            }
        } else {
            pick = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n));
            pick = std::min(pick, n - 1);
        }
        centroids.row(c) = points.row(pick);
        d2 = d2.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
    }
    return centroids;
}

struct LloydResult {
    std::vector<int> labels;
    double wcss = std::numeric_limits<double>::infinity();
    bool ok = false;
};

LloydResult lloyd(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
    const Eigen::Index n = points.rows();
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd centroids = kmeanspp_init(points, k, rng);

    LloydResult res;
    Eigen::VectorXd sq_dist(n);
    std::vector<int> labels;
    double prev_wcss = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < kMaxLloydIters; ++iter) {
        kernels::assign_nearest_serial(points, centroids, labels, sq_dist);

        // Re-seed empty clusters from the worst-fitting points.
        for (int attempt = 0; attempt < 3; ++attempt) {
            std::vector<int> sizes(k, 0);
            for (int lbl : labels) ++sizes[lbl];
            int empty = -1;
            for (int c = 0; c < k; ++c)
                if (sizes[c] == 0) empty = c;
            if (empty < 0) break;
            Eigen::Index farthest;
            sq_dist.maxCoeff(&farthest);
            centroids.row(empty) = points.row(farthest);
            kernels::assign_nearest_serial(points, centroids, labels, sq_dist);
            if (attempt == 2) {
                for (int c = 0; c < k; ++c)
                    if (std::count(labels.begin(), labels.end(), c) == 0) return res; // not ok
            }
        }

        const double wcss = sq_dist.sum();
        if (std::isfinite(prev_wcss) &&
            std::abs(prev_wcss - wcss) <= kWcssRelTol * std::max(prev_wcss, 1e-300)) {
            prev_wcss = wcss;
            break;
        }
        prev_wcss = wcss;

        centroids.setZero();
        std::vector<double> counts(k, 0.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            centroids.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
            counts[labels[static_cast<std::size_t>(i)]] += 1.0;
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0.0) centroids.row(c) /= counts[c];
    }

    kernels::assign_nearest_serial(points, centroids, labels, sq_dist);
    res.labels = std::move(labels);
    res.wcss = sq_dist.sum();
    res.ok = true;
    for (int c = 0; c < k; ++c)
        if (std::count(res.labels.begin(), res.labels.end(), c) == 0) res.ok = false;
    return res;
}

/// mean(s) / (sample std(s) / sqrt(N)); +-inf when the scores have no
/// spread, 0 for the all-zero case.
double quality_z_score(const Eigen::VectorXd& s) {
    const Eigen::Index n = s.size();
    const double mean = s.mean();
    if (n < 2) return 0.0;
    const double var = (s.array() - mean).square().sum() / static_cast<double>(n - 1);
    const double stderr_s = std::sqrt(var / static_cast<double>(n));
    if (stderr_s == 0.0) {
        if (mean == 0.0) return 0.0;
        return mean > 0.0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
    }
    return mean / stderr_s;
}

} // namespace

Eigen::MatrixXd correlation_distance(const Eigen::MatrixXd& corr) {
    Eigen::MatrixXd d(corr.rows(), corr.cols());
    for (Eigen::Index i = 0; i < corr.rows(); ++i)
        for (Eigen::Index j = 0; j < corr.cols(); ++j)
            d(i, j) = std::sqrt(std::max(0.5 * (1.0 - corr(i, j)), 0.0));
    return d;
}

Clustering kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts) {
    const Eigen::Index n = points.rows();
    if (k < 1 || k > n) throw config_error("BadK", "k must lie in [1, N]");
    if (restarts < 1) throw config_error("BadK", "restarts must be >= 1");

    std::vector<LloydResult> runs(static_cast<std::size_t>(restarts));
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads())
    for (int r = 0; r < restarts; ++r)
        runs[static_cast<std::size_t>(r)] =
            lloyd(points, k, seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(r));

    int best = -1;
    for (int r = 0; r < restarts; ++r) {
        if (!runs[static_cast<std::size_t>(r)].ok) continue;
        if (best < 0 || runs[static_cast<std::size_t>(r)].wcss <
                            runs[static_cast<std::size_t>(best)].wcss)
            best = r;
    }
    if (best < 0)
        throw numerical_error("EmptyClusterUnrecoverable",
                              "could not populate every cluster after re-seeding");

    Clustering out;
    out.labels = std::move(runs[static_cast<std::size_t>(best)].labels);
    out.k = k;
    out.wcss = runs[static_cast<std::size_t>(best)].wcss;
    return out;
}

Eigen::VectorXd silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    const Eigen::Index n = points.rows();
    int k = 0;
    for (int lbl : labels) k = std::max(k, lbl + 1);
    std::vector<int> sizes(k, 0);
    for (int lbl : labels) ++sizes[lbl];
    int nonempty = 0;
    for (int c = 0; c < k; ++c) nonempty += sizes[c] > 0;
    if (nonempty < 2) throw config_error("SingleCluster", "silhouette needs >= 2 clusters");

    const Eigen::MatrixXd dist = kernels::pairwise_sq_dists(points).cwiseSqrt();
    Eigen::VectorXd scores(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int own = labels[static_cast<std::size_t>(i)];
        if (sizes[own] <= 1) {
            scores[i] = 0.0;
            continue;
        }
        std::vector<double> mean_to(k, 0.0);
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) mean_to[labels[static_cast<std::size_t>(j)]] += dist(i, j);
        double a = mean_to[own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != own && sizes[c] > 0) b = std::min(b, mean_to[c] / sizes[c]);
        const double denom = std::max(a, b);
        scores[i] = denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return scores;
}

Clustering choose_k(const Eigen::MatrixXd& corr, int k_min, int k_max, std::uint64_t seed,
                    int restarts) {
    const Eigen::Index n = corr.rows();
    if (k_min < 2) throw config_error("BadK", "k_min must be >= 2");
    if (k_max > n - 1) throw config_error("BadK", "k_max must be <= N-1");
    if (k_max < k_min) throw config_error("BadK", "k_max must be >= k_min");

    const Eigen::MatrixXd points = correlation_distance(corr);
    Clustering best;
    bool have = false;
    for (int k = k_min; k <= k_max; ++k) {
        Clustering cand = kmeans(points, k, seed, restarts);
        cand.silhouette = silhouette(points, cand.labels);
        cand.quality_z = quality_z_score(cand.silhouette);
        if (!have || cand.quality_z > best.quality_z) {
            best = std::move(cand);
            have = true;
        }
    }
    return best;
}

Eigen::VectorXd minvar_inner(const Eigen::MatrixXd& cov) {
    const Eigen::Index n = cov.rows();
    if (n == 1) return Eigen::VectorXd::Ones(1);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    Eigen::MatrixXd usable = cov;
    if (llt.info() != Eigen::Success) {
        usable = spectral::psd_repair(cov);
        llt.compute(usable);
        if (llt.info() != Eigen::Success)
            throw numerical_error("NotSpd", "covariance not SPD even after repair");
    }
    Eigen::VectorXd x = llt.solve(Eigen::VectorXd::Ones(n));
    const double denom = x.sum();
    if (denom == 0.0) throw numerical_error("NotSpd", "degenerate min-var denominator");
    return x / denom;
}

NcoAllocation nco_allocate(const estimators::CovEstimate& cov, double q,
                           const InnerOptimizer& inner, const NcoOptions& options) {
    const Eigen::Index n = cov.matrix.rows();
    NcoAllocation out;
    out.denoised = spectral::denoise(cov, q);
    const Eigen::MatrixXd& v_hat = out.denoised.cov.matrix;

    if (options.k_min == 1 && options.k_max == 1) {
        out.clustering.labels.assign(static_cast<std::size_t>(n), 0);
        out.clustering.k = 1;
    } else {
        out.clustering = choose_k(out.denoised.correlation, options.k_min,
                                  std::min<int>(options.k_max, static_cast<int>(n) - 1),
                                  options.seed, options.restarts);
    }

    const int k = out.clustering.k;
    out.intra.setZero(n, k);
    for (int c = 0; c < k; ++c) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < n; ++i)
            if (out.clustering.labels[static_cast<std::size_t>(i)] == c) members.push_back(i);
        if (members.size() == 1) {
            out.intra(members[0], c) = 1.0; // singleton cluster
            continue;
        }
        Eigen::MatrixXd sub(members.size(), members.size());
        for (std::size_t a = 0; a < members.size(); ++a)
            for (std::size_t b = 0; b < members.size(); ++b)
                sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                    v_hat(members[a], members[b]);
        Eigen::VectorXd w = inner(sub);
        for (std::size_t a = 0; a < members.size(); ++a)
            out.intra(members[a], c) = w[static_cast<Eigen::Index>(a)];
    }

    Eigen::MatrixXd v_reduced = out.intra.transpose() * v_hat * out.intra;
    v_reduced = ((v_reduced + v_reduced.transpose()) * 0.5).eval();
    out.inter = k == 1 ? Eigen::VectorXd::Ones(1) : inner(v_reduced);
    out.final = out.intra * out.inter;
    return out;
}

} // namespace robustcov::cluster
