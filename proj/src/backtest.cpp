#include "robustcov/backtest.hpp"

#include "robustcov/errors.hpp"
#include "robustcov/spectral.hpp"
#include "robustcov/threading.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace robustcov::backtest {

namespace {

constexpr double kPeriodsPerYear = 52.0;
constexpr Eigen::Index kCvFolds = 5;
constexpr Eigen::Index kCvFoldWeeks = 25;

double sample_std(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    const double mean = v.mean();
    return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

double ratio_or_infinity(double numerator, double denominator) {
    if (denominator > 0.0) return numerator / denominator;
    if (numerator > 0.0) return std::numeric_limits<double>::infinity();
    if (numerator < 0.0) return -std::numeric_limits<double>::infinity();
    return 0.0;
}

} // namespace

EstimatorSpec default_spec(estimators::EstimatorKind kind) {
    EstimatorSpec spec;
    spec.kind = kind;
    if (kind == estimators::EstimatorKind::GerberStd) spec.c = 0.6;
    if (kind == estimators::EstimatorKind::GerberMad) spec.c = 0.4;
    return spec;
}

estimators::CovEstimate estimate_covariance(const market_data::ReturnPanel& window,
                                            const EstimatorSpec& spec) {
    using estimators::EstimatorKind;
    estimators::CovEstimate est;
    switch (spec.kind) {
        case EstimatorKind::Sample: est = estimators::sample_mean_cov(window).second; break;
        case EstimatorKind::Ewma: est = estimators::ewma_cov(window, spec.alpha); break;
        case EstimatorKind::Ledoit: {
            estimators::CovEstimate sample = estimators::sample_mean_cov(window).second;
            estimators::CovEstimate target = estimators::ledoit_target(sample);
            double delta = spec.delta;
            if (spec.delta_auto) {
                estimators::LedoitIntensity li =
                    estimators::ledoit_intensity(window, sample, target);
                delta = li.delta_star;
                est = estimators::ledoit_shrink(sample, target, delta);
                est.diagnostics["kappa"] = li.kappa;
                est.diagnostics["delta_star"] = li.delta_star;
                break;
            }
            est = estimators::ledoit_shrink(sample, target, delta);
            break;
        }
        case EstimatorKind::GerberStd:
            est = estimators::gerber_estimate(window, spec.c, estimators::ThresholdKind::Std,
                                              spec.variant);
            break;
        case EstimatorKind::GerberMad:
            est = estimators::gerber_estimate(window, spec.c, estimators::ThresholdKind::Mad,
                                              spec.variant);
            break;
    }
    if (!est.is_spd()) {
        est.matrix = spectral::psd_repair(est.matrix);
        est.diagnostics["repaired"] = 1.0;
        est.diagnostics["is_spd"] = 1.0;
    }
    return est;
}

Metrics compute_metrics(const std::vector<RebalanceRecord>& records) {
    if (records.size() < 2)
        throw data_error("InsufficientRecords", "metrics need at least two rebalances");
    const Eigen::Index t_test = static_cast<Eigen::Index>(records.size());
    Eigen::VectorXd returns(t_test);
    Eigen::VectorXd turnover(t_test);
    for (Eigen::Index i = 0; i < t_test; ++i) {
        returns[i] = records[static_cast<std::size_t>(i)].realized_return;
        turnover[i] = records[static_cast<std::size_t>(i)].turnover;
    }

    Metrics m;
    double value = 1.0;
    double peak = 1.0;
    double max_dd = 0.0;
    for (Eigen::Index i = 0; i < t_test; ++i) {
        value *= 1.0 + returns[i];
        peak = std::max(peak, value);
        max_dd = std::max(max_dd, 1.0 - value / peak);
    }
    m.max_drawdown = max_dd;
    m.ann_return = std::pow(value, kPeriodsPerYear / static_cast<double>(t_test)) - 1.0;
    m.ann_vol = sample_std(returns) * std::sqrt(kPeriodsPerYear);
    m.sharpe = ratio_or_infinity(returns.mean() * kPeriodsPerYear, m.ann_vol);
    const Eigen::VectorXd downside = returns.cwiseMin(0.0);
    const double downside_ann = sample_std(downside) * std::sqrt(kPeriodsPerYear);
    m.sortino = ratio_or_infinity(returns.mean() * kPeriodsPerYear, downside_ann);
    m.avg_turnover = turnover.mean();
    return m;
}

Eigen::Index test_start(const market_data::ReturnPanel& panel, const BacktestConfig& config) {
    const Eigen::Index split_week =
        static_cast<Eigen::Index>(std::floor(static_cast<double>(panel.weeks()) *
                                             config.train_test_split));
    return std::max(config.window_length, split_week);
}

namespace {

void validate_config(const BacktestConfig& config) {
    if (config.window_length < 2) throw config_error("BadWindow", "window_length must be >= 2");
    if (config.cost_rate < 0.0) throw config_error("BadCost", "cost_rate must be >= 0");
    if (config.lambda < 0.0) throw config_error("BadLambda", "lambda must be >= 0");
    if (!(config.train_test_split > 0.0 && config.train_test_split < 1.0))
        throw config_error("BadSplit", "train_test_split must lie in (0,1)");
    if (config.use_nco && !config.cvar_constraints.empty())
        throw config_error("BadConstraints", "NCO and CVaR constraints cannot be combined");
}

struct WeekDecision {
    Eigen::VectorXd target;
    bool infeasible_hold = false;
    int nco_k = 0;
};

WeekDecision decide_weights(const market_data::ReturnPanel& window, const BacktestConfig& config,
                            const Eigen::VectorXd& prior) {
    WeekDecision out;
    estimators::CovEstimate cov = estimate_covariance(window, config.estimator);
    if (config.use_nco) {
        const double q =
            static_cast<double>(window.weeks()) / static_cast<double>(window.assets());
        cluster::NcoOptions opts = config.nco;
        opts.seed = config.seed;
        cluster::NcoAllocation alloc = cluster::nco_allocate(cov, q, cluster::minvar_inner, opts);
        out.target = alloc.final;
        out.nco_k = alloc.clustering.k;
        return out;
    }
    solver::MinVarProblem problem;
    problem.V = cov.matrix;
    problem.w0 = prior;
    problem.lambda = config.lambda;
    if (!config.cvar_constraints.empty()) {
        problem.cvar_constraints = config.cvar_constraints;
        problem.scenarios = window.returns;
        solver::Solution sol = solver::solve_minvar_cvar(problem);
        if (sol.status == solver::SolveStatus::Infeasible) {
            out.infeasible_hold = true;
            out.target = prior;
            return out;
        }
        out.target = sol.weights;
        return out;
    }
    out.target = solver::solve_minvar_l1(problem).weights;
    return out;
}

} // namespace

BacktestReport run_range(const market_data::ReturnPanel& panel, const BacktestConfig& config,
                         Eigen::Index first_week, Eigen::Index last_week,
                         const Eigen::MatrixXi& availability) {
    validate_config(config);
    const Eigen::Index n = panel.assets();
    if (first_week < config.window_length || last_week > panel.weeks() || first_week >= last_week)
        throw data_error("InsufficientHistory", "rebalance range does not fit the panel");
    const bool masked = availability.size() != 0;
    if (masked && (availability.rows() != panel.weeks() || availability.cols() != n))
        throw config_error("ShapeMismatch", "availability mask must be T x N");

    BacktestReport report;
    Eigen::VectorXd held = Eigen::VectorXd::Zero(n); // cold start
    double value = 1.0;
    for (Eigen::Index week = first_week; week < last_week; ++week) {
        market_data::ReturnPanel window =
            market_data::rolling_window(panel, week, config.window_length);

        RebalanceRecord rec;
        rec.date = panel.timestamps[static_cast<std::size_t>(week)];
        rec.pre_weights = held;

        Eigen::VectorXd target(n);
        WeekDecision decision;
        if (!masked) {
            decision = decide_weights(window, config, held);
            target = decision.target;
        } else {
            // Restrict the window and the solve to assets tradable this week;
            // anything held in a dead asset is liquidated and its mass
            // redistributed pro-rata through the renormalized prior.
            std::vector<std::string> active_ids;
            std::vector<Eigen::Index> active_idx;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (availability(week, j) != 0) {
                    active_idx.push_back(j);
                    active_ids.push_back(panel.asset_ids[static_cast<std::size_t>(j)]);
                } else if (std::abs(held[j]) > 1e-12) {
                    rec.liquidations.push_back(panel.asset_ids[static_cast<std::size_t>(j)]);
                }
            }
            if (active_idx.empty()) throw data_error("EmptyPanel", "no tradable assets this week");
            market_data::ReturnPanel sub;
            sub.asset_ids = active_ids;
            sub.timestamps = window.timestamps;
            sub.returns.resize(window.weeks(), static_cast<Eigen::Index>(active_idx.size()));
            for (std::size_t a = 0; a < active_idx.size(); ++a)
                sub.returns.col(static_cast<Eigen::Index>(a)) = window.returns.col(active_idx[a]);

            Eigen::VectorXd prior_sub(static_cast<Eigen::Index>(active_idx.size()));
            for (std::size_t a = 0; a < active_idx.size(); ++a)
                prior_sub[static_cast<Eigen::Index>(a)] = held[active_idx[a]];
            const double live_mass = prior_sub.sum();
            if (std::abs(live_mass) > 1e-12)
                prior_sub /= live_mass;
            else
                prior_sub.setZero();

            decision = decide_weights(sub, config, prior_sub);
            target.setZero();
            for (std::size_t a = 0; a < active_idx.size(); ++a)
                target[active_idx[a]] = decision.target[static_cast<Eigen::Index>(a)];
        }

        rec.post_weights = target;
        rec.turnover = turnover_of(held, target);
        rec.cost_paid = cost_of(held, target, config.cost_rate);
        rec.infeasible_hold = decision.infeasible_hold;
        rec.nco_k = decision.nco_k;

        const double gross = target.dot(panel.returns.row(week).transpose());
        rec.realized_return = (1.0 + gross) * (1.0 - rec.cost_paid) - 1.0;
        value *= 1.0 + rec.realized_return;

        // Drift holdings through the week's returns.
        Eigen::VectorXd grown =
            target.cwiseProduct((1.0 + panel.returns.row(week).transpose().array()).matrix());
        held = std::abs(1.0 + gross) > 1e-300 ? (grown / (1.0 + gross)).eval() : target;

        report.records.push_back(std::move(rec));
    }
    report.terminal_value = value;
    if (report.records.size() >= 2) report.metrics = compute_metrics(report.records);
    return report;
}

BacktestReport run_backtest(const market_data::ReturnPanel& panel, const BacktestConfig& config,
                            const Eigen::MatrixXi& availability) {
    const Eigen::Index first = test_start(panel, config);
    if (first >= panel.weeks())
        throw data_error("InsufficientHistory",
                         "panel too short for one estimation window plus a holding week");
    return run_range(panel, config, first, panel.weeks(), availability);
}

BacktestReport benchmark_market_cap(const market_data::ReturnPanel& panel,
                                    const std::map<std::string, double>& caps,
                                    const BacktestConfig& config) {
    validate_config(config);
    const Eigen::Index n = panel.assets();
    Eigen::VectorXd target(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        auto it = caps.find(panel.asset_ids[static_cast<std::size_t>(j)]);
        if (it == caps.end() || !(it->second > 0.0))
            throw data_error("MissingCap",
                             "no market cap for " + panel.asset_ids[static_cast<std::size_t>(j)]);
        target[j] = it->second;
    }
    target /= target.sum();

    const Eigen::Index first = test_start(panel, config);
    if (first >= panel.weeks())
        throw data_error("InsufficientHistory", "panel too short for the benchmark segment");

    BacktestReport report;
    Eigen::VectorXd held = Eigen::VectorXd::Zero(n);
    double value = 1.0;
    for (Eigen::Index week = first; week < panel.weeks(); ++week) {
        RebalanceRecord rec;
        rec.date = panel.timestamps[static_cast<std::size_t>(week)];
        rec.pre_weights = held;
        rec.post_weights = target;
        rec.turnover = turnover_of(held, target);
        rec.cost_paid = cost_of(held, target, config.cost_rate);
        const double gross = target.dot(panel.returns.row(week).transpose());
        rec.realized_return = (1.0 + gross) * (1.0 - rec.cost_paid) - 1.0;
        value *= 1.0 + rec.realized_return;
        Eigen::VectorXd grown =
            target.cwiseProduct((1.0 + panel.returns.row(week).transpose().array()).matrix());
        held = std::abs(1.0 + gross) > 1e-300 ? (grown / (1.0 + gross)).eval() : target;
        report.records.push_back(std::move(rec));
    }
    report.terminal_value = value;
    if (report.records.size() >= 2) report.metrics = compute_metrics(report.records);
    return report;
}

std::vector<double> default_grid(const std::string& param) {
    std::vector<double> grid;
    if (param == "c") {
        for (int i = 3; i <= 10; ++i) grid.push_back(static_cast<double>(i) / 10.0);
    } else if (param == "delta") {
        for (int i = 1; i <= 10; ++i) grid.push_back(static_cast<double>(i) / 10.0);
    } else if (param == "alpha") {
        for (int i = 1; i <= 9; ++i) grid.push_back(static_cast<double>(i) / 20.0);
    } else {
        throw config_error("BadParam", "unknown tuning parameter '" + param + "'");
    }
    return grid;
}

CvResult cross_validate(const market_data::ReturnPanel& panel, const std::string& param,
                        const std::vector<double>& grid, const BacktestConfig& config) {
    validate_config(config);
    if (grid.empty()) throw config_error("BadParam", "empty tuning grid");
    if (param != "c" && param != "delta" && param != "alpha")
        throw config_error("BadParam", "unknown tuning parameter '" + param + "'");

    const Eigen::Index train_end = static_cast<Eigen::Index>(
        std::floor(static_cast<double>(panel.weeks()) * config.train_test_split));
    const Eigen::Index fold_span = kCvFolds * kCvFoldWeeks;
    const Eigen::Index fold_base = train_end - fold_span;
    if (fold_base < config.window_length)
        throw data_error("InsufficientHistory",
                         "training segment cannot host 5 folds of 25 rebalances plus a window");

    const int n_grid = static_cast<int>(grid.size());
    CvResult result;
    result.grid = grid;
    result.fold_sharpe.resize(n_grid, kCvFolds);

#pragma omp parallel for collapse(2) schedule(dynamic) num_threads(effective_threads())
    for (int g = 0; g < n_grid; ++g) {
        for (int f = 0; f < static_cast<int>(kCvFolds); ++f) {
            BacktestConfig fold_config = config;
            if (param == "c")
                fold_config.estimator.c = grid[static_cast<std::size_t>(g)];
            else if (param == "delta") {
                fold_config.estimator.delta = grid[static_cast<std::size_t>(g)];
                fold_config.estimator.delta_auto = false;
            } else {
                fold_config.estimator.alpha = grid[static_cast<std::size_t>(g)];
            }
            const Eigen::Index start = fold_base + f * kCvFoldWeeks;
            BacktestReport rep =
                run_range(panel, fold_config, start, start + kCvFoldWeeks);
            result.fold_sharpe(g, f) = rep.metrics.sharpe;
        }
    }

    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < n_grid; ++g) {
        const double score = result.fold_sharpe.row(g).mean();
        const double value = grid[static_cast<std::size_t>(g)];
        if (score > best_score ||
            (score == best_score && value < grid[static_cast<std::size_t>(best)])) {
            best_score = score;
            best = g;
        }
    }
    result.best_value = grid[static_cast<std::size_t>(best)];
    result.best_score = best_score;
    return result;
}

} // namespace robustcov::backtest
