#include "robustcov/kernels.hpp"

#include "robustcov/threading.hpp"

namespace robustcov::kernels {

ExceedanceFlags exceedance_flags(const Eigen::MatrixXd& returns, const Eigen::VectorXd& thresholds) {
    const Eigen::Index t_obs = returns.rows();
    const Eigen::Index n = returns.cols();
    ExceedanceFlags flags;
    flags.rows = t_obs;
    flags.cols = n;
    flags.up.assign(static_cast<std::size_t>(t_obs * n), 0);
    flags.down.assign(static_cast<std::size_t>(t_obs * n), 0);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = thresholds[j];
        std::uint8_t* up = flags.up.data() + j * t_obs;
        std::uint8_t* down = flags.down.data() + j * t_obs;
        for (Eigen::Index t = 0; t < t_obs; ++t) {
            const double r = returns(t, j);
            const bool u = r >= h;
            up[t] = u;
            // A return sitting exactly on a zero threshold counts as an
            // up-exceedance only, so the three regions stay disjoint.
            down[t] = !u && r <= -h;
        }
    }
    return flags;
}

namespace {

inline void count_pair(const std::uint8_t* ui, const std::uint8_t* di, const std::uint8_t* uj,
                       const std::uint8_t* dj, Eigen::Index t_obs, int& conc, int& disc, int& nn) {
    int c = 0, d = 0, n0 = 0;
    for (Eigen::Index t = 0; t < t_obs; ++t) {
        const int upi = ui[t], dni = di[t], upj = uj[t], dnj = dj[t];
        c += (upi & upj) | (dni & dnj);
        d += (upi & dnj) | (dni & upj);
        n0 += (1 - upi - dni) & (1 - upj - dnj);
    }
    conc = c;
    disc = d;
    nn = n0;
}

inline void store_pair_symmetric(PairCounts& out, Eigen::Index i, Eigen::Index j, int c, int d,
                                 int nn) {
    out.conc(i, j) = c;
    out.conc(j, i) = c;
    out.disc(i, j) = d;
    out.disc(j, i) = d;
    out.nn(i, j) = nn;
    out.nn(j, i) = nn;
}

} // namespace

PairCounts pair_counts(const ExceedanceFlags& flags) {
    const Eigen::Index n = flags.cols;
    const Eigen::Index t_obs = flags.rows;
    PairCounts out;
    out.conc.setZero(n, n);
    out.disc.setZero(n, n);
    out.nn.setZero(n, n);
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads())
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::uint8_t* ui = flags.up.data() + i * t_obs;
        const std::uint8_t* di = flags.down.data() + i * t_obs;
        for (Eigen::Index j = i; j < n; ++j) {
            int c, d, nn;
            count_pair(ui, di, flags.up.data() + j * t_obs, flags.down.data() + j * t_obs, t_obs, c,
                       d, nn);
            store_pair_symmetric(out, i, j, c, d, nn);
        }
    }
    return out;
}

PairCounts pair_counts_serial(const ExceedanceFlags& flags) {
    const Eigen::Index n = flags.cols;
    const Eigen::Index t_obs = flags.rows;
    PairCounts out;
    out.conc.setZero(n, n);
    out.disc.setZero(n, n);
    out.nn.setZero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            int c, d, nn;
            count_pair(flags.up.data() + i * t_obs, flags.down.data() + i * t_obs,
                       flags.up.data() + j * t_obs, flags.down.data() + j * t_obs, t_obs, c, d, nn);
            store_pair_symmetric(out, i, j, c, d, nn);
        }
    }
    return out;
}

Eigen::MatrixXd weighted_scatter(const Eigen::MatrixXd& data, const Eigen::VectorXd& mu,
                                 const Eigen::VectorXd& weights) {
    const Eigen::Index t_obs = data.rows();
    const Eigen::Index n = data.cols();
    Eigen::MatrixXd out(n, n);
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads())
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = j; k < n; ++k) {
            double acc = 0.0;
            for (Eigen::Index t = 0; t < t_obs; ++t)
                acc += weights[t] * (data(t, j) - mu[j]) * (data(t, k) - mu[k]);
            out(j, k) = acc;
            out(k, j) = acc;
        }
    }
    return out;
}

Eigen::MatrixXd weighted_scatter_serial(const Eigen::MatrixXd& data, const Eigen::VectorXd& mu,
                                        const Eigen::VectorXd& weights) {
    const Eigen::Index t_obs = data.rows();
    const Eigen::Index n = data.cols();
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index k = j; k < n; ++k) {
            double acc = 0.0;
            for (Eigen::Index t = 0; t < t_obs; ++t)
                acc += weights[t] * (data(t, j) - mu[j]) * (data(t, k) - mu[k]);
            out(j, k) = acc;
            out(k, j) = acc;
        }
    }
    return out;
}

Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& points) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd out(n, n);
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads())
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d2 = (points.row(i) - points.row(j)).squaredNorm();
            out(i, j) = d2;
            out(j, i) = d2;
        }
    }
    return out;
}

Eigen::MatrixXd pairwise_sq_dists_serial(const Eigen::MatrixXd& points) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d2 = (points.row(i) - points.row(j)).squaredNorm();
            out(i, j) = d2;
            out(j, i) = d2;
        }
    }
    return out;
}

namespace {

inline int nearest_centroid(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                            Eigen::Index i, double& best_d2) {
    int best = 0;
    best_d2 = (points.row(i) - centroids.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
        const double d2 = (points.row(i) - centroids.row(c)).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(c);
        }
    }
    return best;
}

} // namespace

void assign_nearest(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                    std::vector<int>& labels, Eigen::VectorXd& sq_dist) {
    const Eigen::Index n = points.rows();
    labels.assign(static_cast<std::size_t>(n), 0);
    sq_dist.resize(n);
#pragma omp parallel for schedule(static) num_threads(effective_threads())
    for (Eigen::Index i = 0; i < n; ++i) {
        double d2;
        labels[static_cast<std::size_t>(i)] = nearest_centroid(points, centroids, i, d2);
        sq_dist[i] = d2;
    }
}

void assign_nearest_serial(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                           std::vector<int>& labels, Eigen::VectorXd& sq_dist) {
    const Eigen::Index n = points.rows();
    labels.assign(static_cast<std::size_t>(n), 0);
    sq_dist.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double d2;
        labels[static_cast<std::size_t>(i)] = nearest_centroid(points, centroids, i, d2);
        sq_dist[i] = d2;
    }
}

} // namespace robustcov::kernels
