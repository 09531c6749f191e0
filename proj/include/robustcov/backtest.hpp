#pragma once

#include "robustcov/cluster.hpp"
#include "robustcov/estimators.hpp"
#include "robustcov/market_data.hpp"
#include "robustcov/solver.hpp"

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace robustcov::backtest {

/// Estimator choice plus its tuned parameters. The shipped defaults are the
/// cross-validated values: delta 0.4, Gerber c 0.4 (MAD) / 0.6 (std).
struct EstimatorSpec {
    estimators::EstimatorKind kind = estimators::EstimatorKind::Sample;
    double alpha = 0.06;      // EWMA decay
    double delta = 0.4;       // Ledoit shrinkage intensity
    bool delta_auto = false;  // use the empirical optimal intensity instead
    double c = 0.4;           // Gerber threshold scale
    estimators::GerberVariant variant = estimators::GerberVariant::Eq3;
};

EstimatorSpec default_spec(estimators::EstimatorKind kind);

/// Estimates the covariance for one window per the spec, repairing
/// non-SPD Gerber outputs with the condition-bounded projection.
estimators::CovEstimate estimate_covariance(const market_data::ReturnPanel& window,
                                            const EstimatorSpec& spec);

struct BacktestConfig {
    EstimatorSpec estimator;
    Eigen::Index window_length = 200; // use 400 when CVaR constraints are present
    double cost_rate = 0.0050;        // per side, proportional
    double lambda = 0.0050;           // L1 turnover penalty in the solve
    std::vector<solver::CvarConstraint> cvar_constraints;
    bool use_nco = false;
    cluster::NcoOptions nco;
    double train_test_split = 0.5;
    std::uint64_t seed = 0;
};

struct RebalanceRecord {
    dates::CivilDay date = 0;
    Eigen::VectorXd pre_weights;  // drifted holdings before trading
    Eigen::VectorXd post_weights; // holdings after trading, sum 1
    double turnover = 0.0;        // 0.5 * |post - pre|_1
    double cost_paid = 0.0;       // cost_rate * |post - pre|_1 (buys + sells)
    double realized_return = 0.0; // weekly, net of cost
    std::vector<std::string> liquidations;
    bool infeasible_hold = false; // CVaR infeasible: held prior weights
    int nco_k = 0;                // clusters used (NCO runs only)
};

struct Metrics {
    double ann_return = 0.0;
    double ann_vol = 0.0;
    double sharpe = 0.0;
    double sortino = 0.0;
    double max_drawdown = 0.0;
    double avg_turnover = 0.0;
};

struct BacktestReport {
    std::vector<RebalanceRecord> records;
    Metrics metrics;
    double terminal_value = 1.0;
};

/// Annualized metrics from a record list (52 periods per year, rf = 0).
/// Degenerate zero-volatility paths report signed-infinity ratios.
Metrics compute_metrics(const std::vector<RebalanceRecord>& records);

/// One-sided turnover: half the total traded notional fraction.
inline double turnover_of(const Eigen::VectorXd& pre, const Eigen::VectorXd& post) {
    return 0.5 * (post - pre).cwiseAbs().sum();
}

/// Proportional cost on buys plus sells.
inline double cost_of(const Eigen::VectorXd& pre, const Eigen::VectorXd& post, double cost_rate) {
    return cost_rate * (post - pre).cwiseAbs().sum();
}

/// Rolling weekly rebalance over the test segment: estimate on the trailing
/// window, solve, trade from drifted weights at cost_rate per side, realize
/// the week's return. Optional availability mask (T x N, nonzero = tradable)
/// drives forced liquidations. Infeasible CVaR weeks hold prior weights.
BacktestReport run_backtest(const market_data::ReturnPanel& panel, const BacktestConfig& config,
                            const Eigen::MatrixXi& availability = {});

/// Same engine restricted to rebalance weeks [first_week, last_week).
BacktestReport run_range(const market_data::ReturnPanel& panel, const BacktestConfig& config,
                         Eigen::Index first_week, Eigen::Index last_week,
                         const Eigen::MatrixXi& availability = {});

/// First rebalance week of the test segment for this config.
Eigen::Index test_start(const market_data::ReturnPanel& panel, const BacktestConfig& config);

/// Cap-weighted benchmark with the same cost model and test segment.
BacktestReport benchmark_market_cap(const market_data::ReturnPanel& panel,
                                    const std::map<std::string, double>& caps,
                                    const BacktestConfig& config);

struct CvResult {
    double best_value = 0.0;
    double best_score = 0.0;
    Eigen::MatrixXd fold_sharpe; // grid points x 5 folds
    std::vector<double> grid;
};

/// 5-fold cross-validation on the training segment: each fold is a disjoint
/// block of 25 weekly rebalances; the score is the Sharpe ratio averaged
/// over folds; ties go to the smaller parameter value. `param` selects which
/// EstimatorSpec field the grid sweeps: "c", "delta" or "alpha".
CvResult cross_validate(const market_data::ReturnPanel& panel, const std::string& param,
                        const std::vector<double>& grid, const BacktestConfig& config);

/// The cross-validation grids used for tuning (paper protocol): c in
/// {0.3,...,1.0}, delta in {0.1,...,1.0}.
std::vector<double> default_grid(const std::string& param);

} // namespace robustcov::backtest
