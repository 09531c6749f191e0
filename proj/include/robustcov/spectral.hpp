#pragma once

#include "robustcov/estimators.hpp"

#include <Eigen/Dense>

namespace robustcov::spectral {

/// Marcenko-Pastur bulk model for the eigenvalues of pure-noise sample
/// covariance, parameterized by the variance scale and the sample ratio
/// q = T/N > 1.
struct MpModel {
    double sigma2 = 1.0;
    double q = 2.0;
    double lambda_minus = 0.0;
    double lambda_plus = 0.0;
    bool fit_fallback = false; // optimizer failed; moment fallback was used

    static MpModel from_params(double sigma2, double q);
};

/// Eigenvalues descending, eigenvectors as orthonormal columns.
struct EigenSystem {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

/// Symmetric eigendecomposition sorted by descending eigenvalue.
EigenSystem eigen_system(const Eigen::MatrixXd& symmetric);

/// Marcenko-Pastur density at lambda; zero outside [lambda_minus, lambda_plus].
double mp_pdf(double lambda, const MpModel& model);

/// Fits sigma^2 by matching mp_pdf against a Gaussian kernel density estimate
/// of the eigenvalue sample (Silverman bandwidth, 512-point grid over
/// [0, 1.5 * max eigenvalue]), minimizing the sum of squared differences with
/// a golden-section search. On failure falls back to the mean of the
/// eigenvalues at or below the sample median and sets fit_fallback.
MpModel fit_mp(const Eigen::VectorXd& eigenvalues, double q);

struct DenoiseResult {
    estimators::CovEstimate cov;  // de-noised covariance
    Eigen::MatrixXd correlation;  // de-noised correlation, unit diagonal
    MpModel model;                // fitted bulk model
    Eigen::Index n_signal = 0;    // eigenvalues kept above lambda_plus
};

/// Flattens the bulk of the correlation spectrum: eigenvalues at or below the
/// fitted lambda_plus are replaced by their average, the matrix is rebuilt,
/// rescaled to unit diagonal, and the standard deviations are reapplied.
DenoiseResult denoise(const estimators::CovEstimate& cov, double q);

/// Nearest matrix in Frobenius norm that shares the input's eigenvectors and
/// has positive eigenvalues with max/min <= kappa_max. Eigenvalues are
/// clipped to an interval [tau, kappa_max * tau] with tau chosen by a 1-D
/// convex search. Inputs that already satisfy the bound come back unchanged
/// (symmetrized). If every eigenvalue is nonpositive, returns a small
/// multiple of the identity.
Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& matrix, double kappa_max = 4.0);

/// sigma_max / sigma_min. Returns +infinity when sigma_min < 1e-14 sigma_max.
double condition_number(const Eigen::MatrixXd& matrix);

} // namespace robustcov::spectral
