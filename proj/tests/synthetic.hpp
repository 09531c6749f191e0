// Synthetic market fixtures shared by the unit and acceptance suites:
// block-structured Gaussian weekly returns with optional heavy-tailed
// single-asset outliers, and CSV writers matching docs/data-formats.md.

#pragma once

#include "robustcov/dates.hpp"
#include "robustcov/report_io.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace synthetic {

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double normal(std::mt19937_64& rng) {
    const double u1 = uniform01(rng) + 1e-300;
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
}

/// Block covariance: equal-size blocks with common within-block correlation
/// and zero across blocks; per-asset vols cycle through `vols`.
inline Eigen::MatrixXd block_covariance(int n_assets, int n_blocks,
                                        const std::vector<double>& block_rho,
                                        const std::vector<double>& vols) {
    Eigen::MatrixXd cov(n_assets, n_assets);
    const int block_size = n_assets / n_blocks;
    for (int i = 0; i < n_assets; ++i) {
        for (int j = 0; j < n_assets; ++j) {
            const int bi = std::min(i / block_size, n_blocks - 1);
            const int bj = std::min(j / block_size, n_blocks - 1);
            double rho = 0.0;
            if (i == j)
                rho = 1.0;
            else if (bi == bj)
                rho = block_rho[static_cast<std::size_t>(bi)];
            cov(i, j) = rho * vols[i % vols.size()] * vols[j % vols.size()];
        }
    }
    return cov;
}

struct OutlierSpec {
    double prob_per_week = 0.0;  // chance a week has one contaminated asset
    double magnitude_lo = 0.10;  // absolute spike size range
    double magnitude_hi = 0.25;
};

/// T x N weekly simple returns ~ N(drift, cov), with optional single-asset
/// spikes planted on random weeks.
inline Eigen::MatrixXd gaussian_returns(const Eigen::MatrixXd& cov, int t_weeks, double drift,
                                        std::uint64_t seed, const OutlierSpec& outliers = {}) {
    const int n = static_cast<int>(cov.rows());
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    Eigen::MatrixXd chol = llt.matrixL();
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd returns(t_weeks, n);
    for (int t = 0; t < t_weeks; ++t) {
        Eigen::VectorXd z(n);
        for (int j = 0; j < n; ++j) z[j] = normal(rng);
        returns.row(t) = (chol * z).transpose();
        returns.row(t).array() += drift;
        if (outliers.prob_per_week > 0.0 && uniform01(rng) < outliers.prob_per_week) {
            const int hit = static_cast<int>(uniform01(rng) * n) % n;
            const double mag = outliers.magnitude_lo +
                               (outliers.magnitude_hi - outliers.magnitude_lo) * uniform01(rng);
            returns(t, hit) += (uniform01(rng) < 0.5 ? -1.0 : 1.0) * mag;
        }
        // Keep simple returns valid.
        for (int j = 0; j < n; ++j) returns(t, j) = std::max(returns(t, j), -0.95);
    }
    return returns;
}

inline std::vector<std::string> tickers(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("A" + std::to_string(i));
    return out;
}

/// Prices CSV text on a weekly Friday grid starting 2010-01-08, built by
/// compounding the given returns from 100.
inline std::string prices_csv(const Eigen::MatrixXd& returns) {
    const int t_weeks = static_cast<int>(returns.rows());
    const int n = static_cast<int>(returns.cols());
    const auto ids = tickers(n);
    std::ostringstream out;
    out << "date";
    for (const auto& id : ids) out << ',' << id;
    out << '\n';
    Eigen::VectorXd price = Eigen::VectorXd::Constant(n, 100.0);
    robustcov::dates::CivilDay day = robustcov::dates::days_from_civil(2010, 1, 8);
    auto emit = [&](robustcov::dates::CivilDay d, const Eigen::VectorXd& p) {
        out << robustcov::dates::format_iso_date(d);
        for (int j = 0; j < n; ++j) out << ',' << robustcov::report_io::format_double(p[j]);
        out << '\n';
    };
    emit(day, price);
    for (int t = 0; t < t_weeks; ++t) {
        day += 7;
        price = price.cwiseProduct((1.0 + returns.row(t).transpose().array()).matrix());
        emit(day, price);
    }
    return out.str();
}

/// Universe CSV: sectors follow the block structure, caps descend with the
/// asset index.
inline std::string universe_csv(int n_assets, int n_blocks) {
    const auto ids = tickers(n_assets);
    const int block_size = n_assets / n_blocks;
    std::ostringstream out;
    out << "ticker,sector,market_cap\n";
    for (int i = 0; i < n_assets; ++i) {
        const int block = std::min(i / block_size, n_blocks - 1);
        out << ids[static_cast<std::size_t>(i)] << ",S" << block << ','
            << robustcov::report_io::format_double(1000.0 - 10.0 * i) << '\n';
    }
    return out.str();
}

} // namespace synthetic
