#pragma once

#include "robustcov/market_data.hpp"

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace robustcov::estimators {

enum class EstimatorKind { Sample, Ewma, Ledoit, GerberStd, GerberMad };

std::string kind_name(EstimatorKind kind);
EstimatorKind kind_from_name(const std::string& name); // throws BadEstimator

/// Covariance matrix plus provenance: which estimator produced it, with what
/// parameters, and basic diagnostics (rho_bar, kappa, is_spd, ...).
struct CovEstimate {
    Eigen::MatrixXd matrix; // N x N symmetric
    std::vector<std::string> asset_ids;
    EstimatorKind kind = EstimatorKind::Sample;
    std::map<std::string, double> params;
    std::map<std::string, double> diagnostics;

    bool is_spd() const {
        auto it = diagnostics.find("is_spd");
        return it != diagnostics.end() && it->second > 0.5;
    }
};

/// Joint threshold-exceedance counts per asset pair.
struct GerberCounts {
    Eigen::MatrixXi n_conc; // same-direction joint exceedances
    Eigen::MatrixXi n_disc; // opposite-direction joint exceedances
    Eigen::MatrixXi n_nn;   // both assets neutral
    Eigen::VectorXd thresholds;
    Eigen::Index n_obs = 0;
};

/// Normalized exponential-decay observation weights, oldest first.
struct SmoothingWeights {
    Eigen::VectorXd weights;
    double alpha = 0.0;
};

std::pair<Eigen::VectorXd, CovEstimate> sample_mean_cov(const market_data::ReturnPanel& panel);

/// Weight for observation i (1-indexed, oldest first) proportional to
/// (1-alpha)^(T-i), normalized to sum 1. Throws BadAlpha for alpha outside
/// (0,1).
SmoothingWeights exp_weights(Eigen::Index t_obs, double alpha);

/// V = sum_i w_i (x_i - mu*)(x_i - mu*)^T with mu* = sum_i w_i x_i.
/// No effective-sample-size bias correction; the weights sum to 1.
CovEstimate ewma_cov(const market_data::ReturnPanel& panel, double alpha);

/// Constant-correlation shrinkage target: f_ii = s_ii,
/// f_ij = rho_bar * sqrt(s_ii s_jj) with rho_bar the mean upper-triangle
/// sample correlation. Pairs with a zero variance contribute 0 to rho_bar
/// and are flagged in diagnostics ("zero_variance_pairs").
CovEstimate ledoit_target(const CovEstimate& sample);

struct LedoitIntensity {
    double pi_hat;
    double rho_hat;
    double gamma_hat;
    double kappa;
    double delta_star; // clamp(kappa / T, 0, 1)
    bool degenerate_gamma = false;
};

/// Empirical optimal shrinkage intensity for the constant-correlation target,
/// computed from the panel under the 1/T moment convention of the published
/// estimator (demeaned products; pi/rho from asymptotic-variance sums, gamma
/// the squared distance between target and sample). The S and F arguments
/// are checked for shape only. gamma = 0 yields delta_star = 0 with the
/// degenerate flag set.
LedoitIntensity ledoit_intensity(const market_data::ReturnPanel& panel, const CovEstimate& sample,
                                 const CovEstimate& target);

/// delta * F + (1 - delta) * S. Throws BadDelta outside [0,1].
CovEstimate ledoit_shrink(const CovEstimate& sample, const CovEstimate& target, double delta);

/// Median absolute deviation about the median. T = 1 gives 0.
double mad_scale(const Eigen::VectorXd& series);
/// 1.4826 * MAD, the normal-consistent scale estimate.
double mad_sigma(const Eigen::VectorXd& series);

enum class ThresholdKind { Std, Mad };
enum class GerberVariant { Eq3, Eq5 };

/// H_k = c * s_k with s_k the sample standard deviation (Std) or
/// 1.4826 * MAD (Mad) of column k.
Eigen::VectorXd gerber_thresholds(const market_data::ReturnPanel& panel, double c,
                                  ThresholdKind kind);

GerberCounts gerber_counts(const market_data::ReturnPanel& panel,
                           const Eigen::VectorXd& thresholds);

/// Eq3: (conc - disc) / (conc + disc); Eq5: (conc - disc) / (T - nn).
/// Zero denominators give 0 off the diagonal; the diagonal is forced to 1.
Eigen::MatrixXd gerber_matrix(const GerberCounts& counts, GerberVariant variant);

/// Sigma_GS = diag(sigma) G diag(sigma); sigma is always the sample standard
/// deviation regardless of the threshold kind used for G.
CovEstimate gerber_cov(const Eigen::MatrixXd& gerber, const Eigen::VectorXd& sigma,
                       const std::vector<std::string>& asset_ids);

/// Convenience pipeline: thresholds -> counts -> G -> Sigma_GS.
CovEstimate gerber_estimate(const market_data::ReturnPanel& panel, double c, ThresholdKind kind,
                            GerberVariant variant);

/// Column sample standard deviations with the 1/(T-1) convention.
Eigen::VectorXd column_sample_std(const market_data::ReturnPanel& panel);

} // namespace robustcov::estimators
