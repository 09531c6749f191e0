#include "robustcov/spectral.hpp"

#include "robustcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace robustcov::spectral {

namespace {

constexpr int kKdeGridSize = 512;
constexpr double kGoldenTol = 1e-6;

/// Golden-section minimizer for a unimodal scalar function on [lo, hi].
/// Returns the midpoint of the final bracket; sets `converged` false when the
/// iteration cap is reached before the bracket shrinks below tol.
template <typename F>
double golden_section(F&& f, double lo, double hi, double tol, bool& converged) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c);
    double fd = f(d);
    converged = false;
    for (int it = 0; it < 200; ++it) {
        if (b - a < tol * std::max(1.0, std::abs(a) + std::abs(b))) {
            converged = true;
            break;
        }
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

double silverman_bandwidth(const Eigen::VectorXd& sample) {
    const Eigen::Index n = sample.size();
    const double mean = sample.mean();
    const double sd =
        std::sqrt((sample.array() - mean).square().sum() / std::max<Eigen::Index>(n - 1, 1));
    std::vector<double> sorted(sample.data(), sample.data() + n);
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(n - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min<std::size_t>(lo + 1, n - 1);
        const double frac = pos - static_cast<double>(lo);
        return (1.0 - frac) * sorted[lo] + frac * sorted[hi];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

Eigen::VectorXd kde_on_grid(const Eigen::VectorXd& sample, const Eigen::VectorXd& grid,
                            double bandwidth) {
    const double norm = 1.0 / (static_cast<double>(sample.size()) * bandwidth *
                               std::sqrt(2.0 * std::numbers::pi));
    Eigen::VectorXd density(grid.size());
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < sample.size(); ++i) {
            const double z = (grid[g] - sample[i]) / bandwidth;
            acc += std::exp(-0.5 * z * z);
        }
        density[g] = norm * acc;
    }
    return density;
}

} // namespace

MpModel MpModel::from_params(double sigma2, double q) {
    if (!(q > 1.0)) throw config_error("BadRatio", "q = T/N must exceed 1");
    if (!(sigma2 >= 0.0)) throw config_error("BadVariance", "sigma2 must be nonnegative");
    MpModel m;
    m.sigma2 = sigma2;
    m.q = q;
    const double root = std::sqrt(1.0 / q);
    m.lambda_minus = sigma2 * (1.0 - root) * (1.0 - root);
    m.lambda_plus = sigma2 * (1.0 + root) * (1.0 + root);
    return m;
}

EigenSystem eigen_system(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric);
    if (solver.info() != Eigen::Success)
        throw numerical_error("EigenFailure", "symmetric eigendecomposition failed");
    EigenSystem sys;
    const Eigen::Index n = symmetric.rows();
    sys.eigenvalues.resize(n);
    sys.eigenvectors.resize(n, n);
    // Eigen sorts ascending; flip to descending.
    for (Eigen::Index i = 0; i < n; ++i) {
        sys.eigenvalues[i] = solver.eigenvalues()[n - 1 - i];
        sys.eigenvectors.col(i) = solver.eigenvectors().col(n - 1 - i);
    }
    return sys;
}

double mp_pdf(double lambda, const MpModel& model) {
    if (lambda < model.lambda_minus || lambda > model.lambda_plus) return 0.0;
    if (lambda <= 0.0 || model.sigma2 <= 0.0) return 0.0;
    const double num = (model.lambda_plus - lambda) * (lambda - model.lambda_minus);
    if (num <= 0.0) return 0.0;
    return model.q * std::sqrt(num) / (2.0 * std::numbers::pi * lambda * model.sigma2);
}

MpModel fit_mp(const Eigen::VectorXd& eigenvalues, double q) {
    if (eigenvalues.size() < 2) throw config_error("BadSpectrum", "need at least 2 eigenvalues");
    if (!(q > 1.0)) throw config_error("BadRatio", "q = T/N must exceed 1");

    auto fallback = [&]() {
        std::vector<double> sorted(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
        std::sort(sorted.begin(), sorted.end());
        const double median = sorted.size() % 2 == 1
                                  ? sorted[sorted.size() / 2]
                                  : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                           sorted[sorted.size() / 2]);
        // Eigenvalues at or below the median: never empty, robust to spikes.
        double acc = 0.0;
        int count = 0;
        for (double v : sorted)
            if (v <= median) {
                acc += v;
                ++count;
            }
        MpModel m = MpModel::from_params(std::max(acc / count, 1e-12), q);
        m.fit_fallback = true;
        return m;
    };

    const double max_eig = eigenvalues.maxCoeff();
    if (!(max_eig > 0.0)) return fallback();
    const double bandwidth = silverman_bandwidth(eigenvalues);
    if (!(bandwidth > 0.0)) return fallback();

    Eigen::VectorXd grid(kKdeGridSize);
    const double hi = 1.5 * max_eig;
    for (int g = 0; g < kKdeGridSize; ++g)
        grid[g] = hi * static_cast<double>(g) / (kKdeGridSize - 1);
    const Eigen::VectorXd empirical = kde_on_grid(eigenvalues, grid, bandwidth);

    auto sse = [&](double sigma2) {
        const MpModel m = MpModel::from_params(sigma2, q);
        double acc = 0.0;
        for (int g = 0; g < kKdeGridSize; ++g) {
            const double diff = mp_pdf(grid[g], m) - empirical[g];
            acc += diff * diff;
        }
        return acc;
    };

    bool converged = false;
    const double sigma2 = golden_section(sse, 1e-6, max_eig, kGoldenTol, converged);
    if (!converged || !std::isfinite(sigma2) || !(sigma2 > 0.0)) return fallback();
    return MpModel::from_params(sigma2, q);
}

DenoiseResult denoise(const estimators::CovEstimate& cov, double q) {
    const Eigen::Index n = cov.matrix.rows();
    Eigen::VectorXd sd = cov.matrix.diagonal().cwiseMax(0.0).cwiseSqrt();
    Eigen::VectorXd inv_sd(n);
    for (Eigen::Index i = 0; i < n; ++i) inv_sd[i] = sd[i] > 0.0 ? 1.0 / sd[i] : 0.0;
    Eigen::MatrixXd corr = inv_sd.asDiagonal() * cov.matrix * inv_sd.asDiagonal();
    for (Eigen::Index i = 0; i < n; ++i) corr(i, i) = 1.0;
    corr = ((corr + corr.transpose()) * 0.5).eval();

    EigenSystem sys = eigen_system(corr);
    MpModel model = fit_mp(sys.eigenvalues, q);

    Eigen::Index n_signal = 0;
    while (n_signal < n && sys.eigenvalues[n_signal] > model.lambda_plus) ++n_signal;

    Eigen::VectorXd adjusted = sys.eigenvalues;
    if (n_signal < n) {
        const double avg = sys.eigenvalues.tail(n - n_signal).mean();
        adjusted.tail(n - n_signal).setConstant(avg);
    }

    Eigen::MatrixXd rebuilt =
        sys.eigenvectors * adjusted.asDiagonal() * sys.eigenvectors.transpose();
    Eigen::VectorXd scale = rebuilt.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd denoised_corr = scale.asDiagonal() * rebuilt * scale.asDiagonal();
    for (Eigen::Index i = 0; i < n; ++i) denoised_corr(i, i) = 1.0;
    denoised_corr = ((denoised_corr + denoised_corr.transpose()) * 0.5).eval();

    DenoiseResult out;
    out.correlation = denoised_corr;
    out.model = model;
    out.n_signal = n_signal;
    out.cov.matrix = sd.asDiagonal() * denoised_corr * sd.asDiagonal();
    out.cov.matrix = ((out.cov.matrix + out.cov.matrix.transpose()) * 0.5).eval();
    out.cov.asset_ids = cov.asset_ids;
    out.cov.kind = cov.kind;
    out.cov.params = cov.params;
    out.cov.diagnostics["denoised"] = 1.0;
    out.cov.diagnostics["lambda_plus"] = model.lambda_plus;
    out.cov.diagnostics["n_signal"] = static_cast<double>(n_signal);
    out.cov.diagnostics["fit_fallback"] = model.fit_fallback ? 1.0 : 0.0;
    return out;
}

Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& matrix, double kappa_max) {
    if (matrix.rows() != matrix.cols())
        throw config_error("ShapeMismatch", "psd_repair needs a square matrix");
    if (!(kappa_max >= 1.0)) throw config_error("BadConditionBound", "kappa_max must be >= 1");
    Eigen::MatrixXd sym = (matrix + matrix.transpose()) * 0.5;

    EigenSystem sys = eigen_system(sym);
    const Eigen::VectorXd& lam = sys.eigenvalues; // descending
    const double lam_max = lam[0];
    const double lam_min = lam[lam.size() - 1];

    if (lam_max <= 0.0) {
        const double eps = 1e-8 * std::max(lam.cwiseAbs().maxCoeff(), 1e-8);
        return eps * Eigen::MatrixXd::Identity(sym.rows(), sym.cols());
    }
    if (lam_min > 0.0 && lam_max / lam_min <= kappa_max) return sym; // already feasible

    auto clip_cost = [&](double tau) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < lam.size(); ++i) {
            const double mu = std::clamp(lam[i], tau, kappa_max * tau);
            acc += (mu - lam[i]) * (mu - lam[i]);
        }
        return acc;
    };

    // The clip cost is convex in tau; bracket it between a strictly positive
    // floor and the top eigenvalue.
    const double tau_lo = 1e-10 * lam_max;
    bool converged = false;
    double tau = golden_section(clip_cost, tau_lo, lam_max, 1e-10, converged);
    tau = std::max(tau, tau_lo);

    Eigen::VectorXd mu(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i)
        mu[i] = std::clamp(lam[i], tau, kappa_max * tau);
    return sys.eigenvectors * mu.asDiagonal() * sys.eigenvectors.transpose();
}

double condition_number(const Eigen::MatrixXd& matrix) {
    if (matrix.size() == 0 || matrix.norm() == 0.0)
        throw numerical_error("SingularMatrix", "condition number of a zero matrix");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(matrix);
    const double smax = svd.singularValues()[0];
    const double smin = svd.singularValues()[svd.singularValues().size() - 1];
    if (smin < 1e-14 * smax) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

} // namespace robustcov::spectral
