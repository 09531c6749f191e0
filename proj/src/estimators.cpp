#include "robustcov/estimators.hpp"

#include "robustcov/errors.hpp"
#include "robustcov/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace robustcov::estimators {

namespace {

void symmetrize(Eigen::MatrixXd& m) { m = ((m + m.transpose()) * 0.5).eval(); }

void spd_diagnostics(CovEstimate& est) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.matrix,
                                                       Eigen::EigenvaluesOnly);
    const double min_eig = eig.eigenvalues().minCoeff();
    const double max_eig = eig.eigenvalues().maxCoeff();
    est.diagnostics["min_eig"] = min_eig;
    est.diagnostics["max_eig"] = max_eig;
    est.diagnostics["is_spd"] =
        (min_eig > 1e-10 * std::max(std::abs(max_eig), 1e-300)) ? 1.0 : 0.0;
}

double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    auto mid = v.begin() + n / 2;
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

} // namespace

std::string kind_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Sample: return "sample";
        case EstimatorKind::Ewma: return "ewma";
        case EstimatorKind::Ledoit: return "ledoit";
        case EstimatorKind::GerberStd: return "gerber-std";
        case EstimatorKind::GerberMad: return "gerber-mad";
    }
    return "unknown";
}

EstimatorKind kind_from_name(const std::string& name) {
    if (name == "sample") return EstimatorKind::Sample;
    if (name == "ewma") return EstimatorKind::Ewma;
    if (name == "ledoit") return EstimatorKind::Ledoit;
    if (name == "gerber-std") return EstimatorKind::GerberStd;
    if (name == "gerber-mad") return EstimatorKind::GerberMad;
    throw config_error("BadEstimator", "unknown estimator '" + name + "'");
}

std::pair<Eigen::VectorXd, CovEstimate> sample_mean_cov(const market_data::ReturnPanel& panel) {
    const Eigen::Index t_obs = panel.weeks();
    if (t_obs < 2) throw data_error("InsufficientSamples", "need T >= 2 for a sample covariance");
    Eigen::VectorXd mean = panel.returns.colwise().mean();
    Eigen::VectorXd w = Eigen::VectorXd::Constant(t_obs, 1.0 / static_cast<double>(t_obs - 1));

    CovEstimate est;
    est.matrix = kernels::weighted_scatter(panel.returns, mean, w);
    symmetrize(est.matrix);
    est.asset_ids = panel.asset_ids;
    est.kind = EstimatorKind::Sample;
    spd_diagnostics(est);
    return {std::move(mean), std::move(est)};
}

SmoothingWeights exp_weights(Eigen::Index t_obs, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw config_error("BadAlpha", "alpha must lie strictly inside (0,1)");
    if (t_obs < 1) throw config_error("BadAlpha", "need at least one observation");
    SmoothingWeights sw;
    sw.alpha = alpha;
    sw.weights.resize(t_obs);
    // Build newest-to-oldest by repeated multiplication so consecutive
    // weights keep the exact (1-alpha) ratio.
    double w = 1.0;
    for (Eigen::Index i = t_obs - 1; i >= 0; --i) {
        sw.weights[i] = w;
        w *= 1.0 - alpha;
    }
    sw.weights /= sw.weights.sum();
    return sw;
}

CovEstimate ewma_cov(const market_data::ReturnPanel& panel, double alpha) {
    const Eigen::Index t_obs = panel.weeks();
    if (t_obs < 2) throw data_error("InsufficientSamples", "need T >= 2 for an EWMA covariance");
    const SmoothingWeights sw = exp_weights(t_obs, alpha);
    Eigen::VectorXd mu_star = panel.returns.transpose() * sw.weights;

    CovEstimate est;
    est.matrix = kernels::weighted_scatter(panel.returns, mu_star, sw.weights);
    symmetrize(est.matrix);
    est.asset_ids = panel.asset_ids;
    est.kind = EstimatorKind::Ewma;
    est.params["alpha"] = alpha;
    spd_diagnostics(est);
    return est;
}

CovEstimate ledoit_target(const CovEstimate& sample) {
    const Eigen::MatrixXd& s = sample.matrix;
    const Eigen::Index n = s.rows();
    double rho_sum = 0.0;
    Eigen::Index pairs = 0;
    Eigen::Index zero_var_pairs = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double denom = s(i, i) * s(j, j);
            ++pairs;
            if (denom <= 0.0) {
                ++zero_var_pairs; // correlation undefined; contributes 0
                continue;
            }
            rho_sum += s(i, j) / std::sqrt(denom);
        }
    }
    const double rho_bar = pairs > 0 ? rho_sum / static_cast<double>(pairs) : 0.0;

    CovEstimate target;
    target.matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        target.matrix(i, i) = s(i, i);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double f = rho_bar * std::sqrt(std::max(s(i, i) * s(j, j), 0.0));
            target.matrix(i, j) = f;
            target.matrix(j, i) = f;
        }
    }
    target.asset_ids = sample.asset_ids;
    target.kind = EstimatorKind::Ledoit;
    target.diagnostics["rho_bar"] = rho_bar;
    target.diagnostics["zero_variance_pairs"] = static_cast<double>(zero_var_pairs);
    return target;
}

LedoitIntensity ledoit_intensity(const market_data::ReturnPanel& panel, const CovEstimate& sample,
                                 const CovEstimate& target) {
    const Eigen::Index t_obs = panel.weeks();
    const Eigen::Index n = panel.assets();
    if (t_obs < 2) throw data_error("InsufficientSamples", "need T >= 2 for shrinkage intensity");
    if (sample.matrix.rows() != n || target.matrix.rows() != n)
        throw config_error("ShapeMismatch", "S and F must be N x N for the panel");
    const double t_dbl = static_cast<double>(t_obs);

    // Demeaned observations and 1/T moments, the convention of the published
    // constant-correlation shrinkage estimator.
    Eigen::MatrixXd y = panel.returns.rowwise() - panel.returns.colwise().mean();
    Eigen::MatrixXd s = (y.transpose() * y) / t_dbl;

    double rho_sum = 0.0;
    Eigen::Index pairs = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double denom = s(i, i) * s(j, j);
            ++pairs;
            if (denom > 0.0) rho_sum += s(i, j) / std::sqrt(denom);
        }
    const double rho_bar = pairs > 0 ? rho_sum / static_cast<double>(pairs) : 0.0;

    LedoitIntensity out{};
    double pi_hat = 0.0;
    double rho_hat = 0.0;
    double gamma_hat = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double pi_ij = 0.0;
            for (Eigen::Index t = 0; t < t_obs; ++t) {
                const double prod = y(t, i) * y(t, j) - s(i, j);
                pi_ij += prod * prod;
            }
            pi_ij /= t_dbl;
            pi_hat += pi_ij;

            if (i == j) {
                rho_hat += pi_ij;
            } else if (s(i, i) > 0.0 && s(j, j) > 0.0) {
                double theta_ii = 0.0;
                double theta_jj = 0.0;
                for (Eigen::Index t = 0; t < t_obs; ++t) {
                    const double prod = y(t, i) * y(t, j) - s(i, j);
                    theta_ii += (y(t, i) * y(t, i) - s(i, i)) * prod;
                    theta_jj += (y(t, j) * y(t, j) - s(j, j)) * prod;
                }
                theta_ii /= t_dbl;
                theta_jj /= t_dbl;
                rho_hat += 0.5 * rho_bar *
                           (std::sqrt(s(j, j) / s(i, i)) * theta_ii +
                            std::sqrt(s(i, i) / s(j, j)) * theta_jj);
            }

            const double f_ij =
                i == j ? s(i, i) : rho_bar * std::sqrt(std::max(s(i, i) * s(j, j), 0.0));
            const double diff = f_ij - s(i, j);
            gamma_hat += diff * diff;
        }
    }

    out.pi_hat = pi_hat;
    out.rho_hat = rho_hat;
    out.gamma_hat = gamma_hat;
    if (gamma_hat <= 0.0) {
        // Target equals the sample matrix; any delta produces the same
        // estimate, so report 0.
        out.degenerate_gamma = true;
        out.kappa = 0.0;
        out.delta_star = 0.0;
        return out;
    }
    out.kappa = (pi_hat - rho_hat) / gamma_hat;
    out.delta_star = std::clamp(out.kappa / t_dbl, 0.0, 1.0);
    return out;
}

CovEstimate ledoit_shrink(const CovEstimate& sample, const CovEstimate& target, double delta) {
    if (!(delta >= 0.0 && delta <= 1.0))
        throw config_error("BadDelta", "delta must lie in [0,1]");
    if (sample.matrix.rows() != target.matrix.rows())
        throw config_error("ShapeMismatch", "S and F must be conformable");
    CovEstimate out;
    out.matrix = delta * target.matrix + (1.0 - delta) * sample.matrix;
    symmetrize(out.matrix);
    out.asset_ids = sample.asset_ids;
    out.kind = EstimatorKind::Ledoit;
    out.params["delta"] = delta;
    if (auto it = target.diagnostics.find("rho_bar"); it != target.diagnostics.end())
        out.diagnostics["rho_bar"] = it->second;
    spd_diagnostics(out);
    return out;
}

double mad_scale(const Eigen::VectorXd& series) {
    if (series.size() < 1) throw data_error("InsufficientSamples", "empty series");
    std::vector<double> v(series.data(), series.data() + series.size());
    const double med = median_inplace(v);
    for (double& x : v) x = std::abs(x - med);
    return median_inplace(v);
}

double mad_sigma(const Eigen::VectorXd& series) { return 1.4826 * mad_scale(series); }

Eigen::VectorXd column_sample_std(const market_data::ReturnPanel& panel) {
    const Eigen::Index t_obs = panel.weeks();
    if (t_obs < 2) throw data_error("InsufficientSamples", "need T >= 2 for sample std");
    Eigen::RowVectorXd mean = panel.returns.colwise().mean();
    Eigen::VectorXd var = (panel.returns.rowwise() - mean).array().square().colwise().sum() /
                          static_cast<double>(t_obs - 1);
    return var.cwiseSqrt();
}

Eigen::VectorXd gerber_thresholds(const market_data::ReturnPanel& panel, double c,
                                  ThresholdKind kind) {
    if (!(c > 0.0)) throw config_error("BadThresholdScale", "c must be positive");
    if (panel.weeks() < 2) throw data_error("InsufficientSamples", "need T >= 2 for thresholds");
    if (kind == ThresholdKind::Std) return c * column_sample_std(panel);
    Eigen::VectorXd h(panel.assets());
    for (Eigen::Index j = 0; j < panel.assets(); ++j) h[j] = c * mad_sigma(panel.returns.col(j));
    return h;
}

GerberCounts gerber_counts(const market_data::ReturnPanel& panel,
                           const Eigen::VectorXd& thresholds) {
    if (thresholds.size() != panel.assets())
        throw config_error("ShapeMismatch", "one threshold per asset required");
    if (thresholds.minCoeff() < 0.0)
        throw config_error("BadThresholdScale", "thresholds must be nonnegative");
    kernels::ExceedanceFlags flags = kernels::exceedance_flags(panel.returns, thresholds);
    kernels::PairCounts counts = kernels::pair_counts(flags);
    GerberCounts out;
    out.n_conc = std::move(counts.conc);
    out.n_disc = std::move(counts.disc);
    out.n_nn = std::move(counts.nn);
    out.thresholds = thresholds;
    out.n_obs = panel.weeks();
    return out;
}

Eigen::MatrixXd gerber_matrix(const GerberCounts& counts, GerberVariant variant) {
    const Eigen::Index n = counts.n_conc.rows();
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        g(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double num = counts.n_conc(i, j) - counts.n_disc(i, j);
            const double den =
                variant == GerberVariant::Eq3
                    ? static_cast<double>(counts.n_conc(i, j) + counts.n_disc(i, j))
                    : static_cast<double>(counts.n_obs - counts.n_nn(i, j));
            const double value = den > 0.0 ? num / den : 0.0;
            g(i, j) = value;
            g(j, i) = value;
        }
    }
    return g;
}

CovEstimate gerber_cov(const Eigen::MatrixXd& gerber, const Eigen::VectorXd& sigma,
                       const std::vector<std::string>& asset_ids) {
    if (gerber.rows() != sigma.size())
        throw config_error("ShapeMismatch", "G and sigma must be conformable");
    CovEstimate est;
    est.matrix = sigma.asDiagonal() * gerber * sigma.asDiagonal();
    symmetrize(est.matrix);
    est.asset_ids = asset_ids;
    spd_diagnostics(est);
    return est;
}

CovEstimate gerber_estimate(const market_data::ReturnPanel& panel, double c, ThresholdKind kind,
                            GerberVariant variant) {
    Eigen::VectorXd h = gerber_thresholds(panel, c, kind);
    GerberCounts counts = gerber_counts(panel, h);
    Eigen::MatrixXd g = gerber_matrix(counts, variant);
    CovEstimate est = gerber_cov(g, column_sample_std(panel), panel.asset_ids);
    est.kind = kind == ThresholdKind::Std ? EstimatorKind::GerberStd : EstimatorKind::GerberMad;
    est.params["c"] = c;
    est.params["variant"] = variant == GerberVariant::Eq3 ? 3.0 : 5.0;
    return est;
}

} // namespace robustcov::estimators
