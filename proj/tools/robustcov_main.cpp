/**
 * @file robustcov_main.cpp
 * @brief Command-line front end: estimate | backtest | tune.
 *
 * Results go to files under --out; progress notes go to stderr so pipelines
 * stay clean. Errors are reported as one JSON object on stderr with exit
 * codes 2 (config), 3 (data), 4 (numerical failure).
 */

#include "CLI11.hpp"
#include "json.hpp"

#include "robustcov/backtest.hpp"
#include "robustcov/cluster.hpp"
#include "robustcov/errors.hpp"
#include "robustcov/estimators.hpp"
#include "robustcov/market_data.hpp"
#include "robustcov/report_io.hpp"
#include "robustcov/solver.hpp"
#include "robustcov/spectral.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace robustcov;

namespace {

struct Options {
    std::string command;
    std::optional<std::string> config_path;
    std::optional<std::string> prices;
    std::optional<std::string> universe;
    std::optional<std::string> estimator;
    std::optional<double> alpha;
    std::optional<std::string> delta; // number or "auto"
    std::optional<double> c;
    std::optional<double> lambda;
    std::optional<long> window;
    std::optional<double> cost;
    std::vector<std::string> cvar; // "A:B"
    std::optional<bool> nco;
    std::optional<long> seed;
    std::optional<std::string> out;
    std::optional<bool> emit_charts;
    std::optional<long> per_sector;
    std::optional<std::string> variant; // eq3 | eq5
    std::optional<double> split;
};

/// Effective run configuration after merging config file and flags
/// (flags win).
struct RunConfig {
    std::string prices;
    std::string universe;
    std::string estimator = "sample";
    double alpha = 0.06;
    std::string delta = "0.4";
    double c = -1.0; // negative: use the estimator default
    double lambda = 0.0050;
    long window = -1; // negative: 200, or 400 with CVaR constraints
    double cost = 0.0050;
    std::vector<std::string> cvar;
    bool nco = false;
    long seed = 0;
    std::string out = ".";
    bool emit_charts = false;
    long per_sector = 0;
    std::string variant = "eq3";
    double split = 0.5;
};

void merge_config_file(RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("BadConfig", "cannot open config file: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw config_error("BadConfig", std::string("config parse error: ") + e.what());
    }
    auto str = [&](const char* key, std::string& field) {
        if (cfg.contains(key)) field = cfg[key].get<std::string>();
    };
    auto num = [&](const char* key, double& field) {
        if (cfg.contains(key)) field = cfg[key].get<double>();
    };
    auto integer = [&](const char* key, long& field) {
        if (cfg.contains(key)) field = cfg[key].get<long>();
    };
    auto flag = [&](const char* key, bool& field) {
        if (cfg.contains(key)) field = cfg[key].get<bool>();
    };
    try {
        str("prices", rc.prices);
        str("universe", rc.universe);
        str("estimator", rc.estimator);
        num("alpha", rc.alpha);
        if (cfg.contains("delta")) {
            if (cfg["delta"].is_string())
                rc.delta = cfg["delta"].get<std::string>();
            else
                rc.delta = report_io::format_double(cfg["delta"].get<double>());
        }
        num("c", rc.c);
        num("lambda", rc.lambda);
        integer("window", rc.window);
        num("cost", rc.cost);
        if (cfg.contains("cvar")) rc.cvar = cfg["cvar"].get<std::vector<std::string>>();
        flag("nco", rc.nco);
        integer("seed", rc.seed);
        str("out", rc.out);
        flag("emit_charts", rc.emit_charts);
        integer("per_sector", rc.per_sector);
        str("variant", rc.variant);
        num("split", rc.split);
    } catch (const json::exception& e) {
        throw config_error("BadConfig", std::string("config field error: ") + e.what());
    }
}

RunConfig merge(const Options& opt) {
    RunConfig rc;
    if (opt.config_path) merge_config_file(rc, *opt.config_path);
    if (opt.prices) rc.prices = *opt.prices;
    if (opt.universe) rc.universe = *opt.universe;
    if (opt.estimator) rc.estimator = *opt.estimator;
    if (opt.alpha) rc.alpha = *opt.alpha;
    if (opt.delta) rc.delta = *opt.delta;
    if (opt.c) rc.c = *opt.c;
    if (opt.lambda) rc.lambda = *opt.lambda;
    if (opt.window) rc.window = *opt.window;
    if (opt.cost) rc.cost = *opt.cost;
    if (!opt.cvar.empty()) rc.cvar = opt.cvar;
    if (opt.nco) rc.nco = *opt.nco;
    if (opt.seed) rc.seed = *opt.seed;
    if (opt.out) rc.out = *opt.out;
    if (opt.emit_charts) rc.emit_charts = *opt.emit_charts;
    if (opt.per_sector) rc.per_sector = *opt.per_sector;
    if (opt.variant) rc.variant = *opt.variant;
    if (opt.split) rc.split = *opt.split;
    return rc;
}

std::vector<solver::CvarConstraint> parse_cvar(const std::vector<std::string>& specs) {
    std::vector<solver::CvarConstraint> out;
    for (const std::string& s : specs) {
        const std::size_t colon = s.find(':');
        if (colon == std::string::npos)
            throw config_error("BadConstraints", "--cvar expects ALPHA:BETA, got '" + s + "'");
        try {
            out.push_back({std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))});
        } catch (const std::exception&) {
            throw config_error("BadConstraints", "--cvar expects numbers, got '" + s + "'");
        }
        if (!(out.back().alpha > 0.0 && out.back().alpha < 1.0) || !(out.back().beta > 0.0))
            throw config_error("BadConstraints", "cvar needs 0<alpha<1 and beta>0: '" + s + "'");
    }
    return out;
}

backtest::EstimatorSpec make_spec(const RunConfig& rc) {
    backtest::EstimatorSpec spec = backtest::default_spec(estimators::kind_from_name(rc.estimator));
    spec.alpha = rc.alpha;
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
        throw config_error("BadAlpha", "alpha must lie strictly inside (0,1)");
    if (rc.delta == "auto") {
        spec.delta_auto = true;
    } else {
        try {
            spec.delta = std::stod(rc.delta);
        } catch (const std::exception&) {
            throw config_error("BadDelta", "--delta expects a number or 'auto'");
        }
        if (!(spec.delta >= 0.0 && spec.delta <= 1.0))
            throw config_error("BadDelta", "delta must lie in [0,1]");
    }
    if (rc.c > 0.0)
        spec.c = rc.c;
    else if (rc.c >= 0.0)
        throw config_error("BadThresholdScale", "c must be positive");
    if (rc.variant == "eq3")
        spec.variant = estimators::GerberVariant::Eq3;
    else if (rc.variant == "eq5")
        spec.variant = estimators::GerberVariant::Eq5;
    else
        throw config_error("BadConfig", "variant must be eq3 or eq5");
    return spec;
}

/// Loads prices, applies the optional universe restriction, resamples weekly.
struct LoadedData {
    market_data::PricePanel prices;
    market_data::ReturnPanel weekly;
    std::vector<std::string> universe_warnings;
};

LoadedData load_data(const RunConfig& rc) {
    if (rc.prices.empty()) throw config_error("BadConfig", "--prices is required");
    LoadedData data;
    data.prices = market_data::load_price_table(rc.prices);
    if (!rc.universe.empty()) {
        market_data::load_universe_table(rc.universe, data.prices);
        std::vector<std::string> keep;
        for (const std::string& id : data.prices.asset_ids)
            if (data.prices.market_cap_of.count(id)) keep.push_back(id);
        if (keep.empty()) throw data_error("EmptyPanel", "universe file matches no price columns");
        data.prices = market_data::restrict_assets(data.prices, keep);
        if (rc.per_sector > 0) {
            market_data::UniverseSelection sel =
                market_data::select_universe(data.prices, static_cast<int>(rc.per_sector));
            data.universe_warnings = sel.warnings;
            data.prices = market_data::restrict_assets(data.prices, sel.asset_ids);
        }
    }
    data.weekly = market_data::to_weekly_returns(data.prices);
    std::cerr << "loaded " << data.weekly.weeks() << " weekly returns for "
              << data.weekly.assets() << " assets";
    if (data.prices.dropped_rows) std::cerr << " (" << data.prices.dropped_rows << " rows dropped)";
    std::cerr << "\n";
    for (const std::string& w : data.universe_warnings) std::cerr << "warning: " << w << "\n";
    return data;
}

json config_echo(const RunConfig& rc) {
    json echo;
    echo["prices"] = rc.prices;
    echo["universe"] = rc.universe;
    echo["estimator"] = rc.estimator;
    echo["alpha"] = rc.alpha;
    echo["delta"] = rc.delta;
    echo["c"] = rc.c;
    echo["lambda"] = rc.lambda;
    echo["window"] = rc.window;
    echo["cost"] = rc.cost;
    echo["cvar"] = rc.cvar;
    echo["nco"] = rc.nco;
    echo["seed"] = rc.seed;
    echo["per_sector"] = rc.per_sector;
    echo["variant"] = rc.variant;
    echo["split"] = rc.split;
    return echo;
}

json metrics_json(const backtest::Metrics& m) {
    json out;
    out["ann_return"] = m.ann_return;
    out["ann_vol"] = m.ann_vol;
    out["sharpe"] = m.sharpe;
    out["sortino"] = m.sortino;
    out["max_drawdown"] = m.max_drawdown;
    out["avg_turnover"] = m.avg_turnover;
    return out;
}

void dump_json(const json& j, const std::string& path) {
    report_io::write_text_file(path, j.dump(2) + "\n");
}

backtest::BacktestConfig make_backtest_config(const RunConfig& rc,
                                              const backtest::EstimatorSpec& spec) {
    backtest::BacktestConfig config;
    config.estimator = spec;
    config.cvar_constraints = parse_cvar(rc.cvar);
    config.window_length = rc.window > 0 ? static_cast<Eigen::Index>(rc.window)
                                         : (config.cvar_constraints.empty() ? 200 : 400);
    config.cost_rate = rc.cost;
    config.lambda = rc.lambda;
    config.use_nco = rc.nco;
    config.train_test_split = rc.split;
    config.seed = static_cast<std::uint64_t>(rc.seed);
    return config;
}

int cmd_estimate(const RunConfig& rc) {
    LoadedData data = load_data(rc);
    backtest::EstimatorSpec spec = make_spec(rc);
    fs::create_directories(rc.out);

    market_data::ReturnPanel panel = data.weekly;
    if (rc.window > 0 && panel.weeks() > rc.window)
        panel = market_data::rolling_window(panel, panel.weeks(), rc.window);

    estimators::CovEstimate est = backtest::estimate_covariance(panel, spec);
    report_io::write_matrix_csv(rc.out + "/covariance.csv", est.matrix, est.asset_ids);

    Eigen::VectorXd sd = est.matrix.diagonal().cwiseMax(0.0).cwiseSqrt();
    Eigen::VectorXd inv_sd(sd.size());
    for (Eigen::Index i = 0; i < sd.size(); ++i) inv_sd[i] = sd[i] > 0 ? 1.0 / sd[i] : 0.0;
    Eigen::MatrixXd corr = inv_sd.asDiagonal() * est.matrix * inv_sd.asDiagonal();
    for (Eigen::Index i = 0; i < corr.rows(); ++i) corr(i, i) = 1.0;
    report_io::write_matrix_csv(rc.out + "/correlation.csv", corr, est.asset_ids);

    spectral::EigenSystem sys = spectral::eigen_system(est.matrix);
    json diag;
    diag["estimator"] = estimators::kind_name(est.kind);
    diag["n_assets"] = static_cast<long>(est.matrix.rows());
    diag["window_weeks"] = static_cast<long>(panel.weeks());
    json top10 = json::array();
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(10, sys.eigenvalues.size()); ++i)
        top10.push_back(sys.eigenvalues[i]);
    diag["eigenvalues_top10"] = top10;
    diag["condition_number"] = spectral::condition_number(est.matrix);
    json params;
    for (const auto& [k, v] : est.params) params[k] = v;
    diag["params"] = params;
    json dd;
    for (const auto& [k, v] : est.diagnostics) dd[k] = v;
    diag["diagnostics"] = dd;
    diag["config"] = config_echo(rc);

    if (spec.kind == estimators::EstimatorKind::GerberStd ||
        spec.kind == estimators::EstimatorKind::GerberMad) {
        const estimators::ThresholdKind tk = spec.kind == estimators::EstimatorKind::GerberStd
                                                 ? estimators::ThresholdKind::Std
                                                 : estimators::ThresholdKind::Mad;
        estimators::CovEstimate eq3 =
            estimators::gerber_estimate(panel, spec.c, tk, estimators::GerberVariant::Eq3);
        estimators::CovEstimate eq5 =
            estimators::gerber_estimate(panel, spec.c, tk, estimators::GerberVariant::Eq5);
        Eigen::MatrixXd repaired = spectral::psd_repair(eq3.matrix);
        report_io::write_matrix_csv(rc.out + "/gerber_eq3.csv", eq3.matrix, est.asset_ids);
        report_io::write_matrix_csv(rc.out + "/gerber_eq5.csv", eq5.matrix, est.asset_ids);
        report_io::write_matrix_csv(rc.out + "/gerber_repaired.csv", repaired, est.asset_ids);
        // Distances of both adjustment routes to the unadjusted matrix.
        json adj;
        adj["frobenius_eq5_vs_eq3"] = (eq5.matrix - eq3.matrix).norm();
        adj["frobenius_repaired_vs_eq3"] = (repaired - eq3.matrix).norm();
        adj["condition_repaired"] = spectral::condition_number(repaired);
        adj["eq3_is_spd"] = eq3.is_spd();
        adj["eq5_is_spd"] = eq5.is_spd();
        diag["gerber_adjustment"] = adj;
    }
    dump_json(diag, rc.out + "/eigenvalues.json");
    std::cerr << "estimate done: " << rc.out << "\n";
    return 0;
}

int cmd_backtest(const RunConfig& rc) {
    LoadedData data = load_data(rc);
    backtest::EstimatorSpec spec = make_spec(rc);
    backtest::BacktestConfig config = make_backtest_config(rc, spec);
    fs::create_directories(rc.out);

    std::cerr << "running backtest (window " << config.window_length << ", "
              << data.weekly.weeks() << " weeks)...\n";
    backtest::BacktestReport strat = backtest::run_backtest(data.weekly, config);
    report_io::write_records_csv(rc.out + "/records.csv", strat.records, data.weekly.asset_ids);

    json report;
    report["config"] = config_echo(rc);
    report["window"] = static_cast<long>(config.window_length);
    report["n_rebalances"] = static_cast<long>(strat.records.size());
    report["terminal_value"] = strat.terminal_value;
    report["metrics"] = metrics_json(strat.metrics);
    long infeasible = 0;
    for (const auto& r : strat.records) infeasible += r.infeasible_hold ? 1 : 0;
    report["infeasible_holds"] = infeasible;
    if (config.use_nco) {
        json ks = json::array();
        for (const auto& r : strat.records) ks.push_back(r.nco_k);
        report["nco_k_values"] = ks;
    }
    json constraints = json::array();
    for (const auto& cv : config.cvar_constraints) {
        json c;
        c["alpha"] = cv.alpha;
        c["beta"] = cv.beta;
        constraints.push_back(c);
    }
    report["cvar_constraints"] = constraints;

    bool have_caps = !data.prices.market_cap_of.empty();
    for (const std::string& id : data.weekly.asset_ids)
        if (!data.prices.market_cap_of.count(id)) have_caps = false;
    if (have_caps) {
        backtest::BacktestReport bench =
            backtest::benchmark_market_cap(data.weekly, data.prices.market_cap_of, config);
        report_io::write_records_csv(rc.out + "/benchmark_records.csv", bench.records,
                                     data.weekly.asset_ids);
        report["benchmark_metrics"] = metrics_json(bench.metrics);
        report["benchmark_terminal_value"] = bench.terminal_value;
    } else {
        report["benchmark_metrics"] = nullptr;
    }
    dump_json(report, rc.out + "/report.json");

    if (rc.emit_charts) {
        std::vector<double> cumret, maxw, cost;
        double value = 1.0;
        for (const auto& r : strat.records) {
            value *= 1.0 + r.realized_return;
            cumret.push_back(value - 1.0);
            maxw.push_back(r.post_weights.cwiseAbs().maxCoeff());
            cost.push_back(r.cost_paid);
        }
        report_io::write_line_chart_svg(rc.out + "/cumulative_return.svg", "Cumulative return",
                                        cumret);
        report_io::write_line_chart_svg(rc.out + "/max_abs_weight.svg", "Max absolute weight",
                                        maxw);
        report_io::write_line_chart_svg(rc.out + "/cost.svg", "Rebalance cost", cost);
    }
    std::cerr << "backtest done: " << rc.out << "\n";
    return 0;
}

int cmd_tune(const RunConfig& rc) {
    LoadedData data = load_data(rc);
    backtest::EstimatorSpec spec = make_spec(rc);
    backtest::BacktestConfig config = make_backtest_config(rc, spec);
    fs::create_directories(rc.out);

    std::string param;
    switch (spec.kind) {
        case estimators::EstimatorKind::GerberStd:
        case estimators::EstimatorKind::GerberMad: param = "c"; break;
        case estimators::EstimatorKind::Ledoit: param = "delta"; break;
        case estimators::EstimatorKind::Ewma: param = "alpha"; break;
        default:
            throw config_error("BadConfig", "tune requires an estimator with a tunable parameter");
    }
    std::vector<double> grid = backtest::default_grid(param);
    std::cerr << "tuning " << param << " over " << grid.size() << " grid points x 5 folds...\n";
    backtest::CvResult cv = backtest::cross_validate(data.weekly, param, grid, config);

    std::ostringstream folds;
    folds << param << ",fold1,fold2,fold3,fold4,fold5,mean_sharpe\n";
    for (Eigen::Index g = 0; g < cv.fold_sharpe.rows(); ++g) {
        folds << report_io::format_double(cv.grid[static_cast<std::size_t>(g)]);
        for (Eigen::Index f = 0; f < cv.fold_sharpe.cols(); ++f)
            folds << ',' << report_io::format_double(cv.fold_sharpe(g, f));
        folds << ',' << report_io::format_double(cv.fold_sharpe.row(g).mean()) << '\n';
    }
    report_io::write_text_file(rc.out + "/folds.csv", folds.str());

    json best;
    best["param"] = param;
    best["best_value"] = cv.best_value;
    best["best_score"] = cv.best_score;
    best["grid"] = cv.grid;
    best["config"] = config_echo(rc);
    dump_json(best, rc.out + "/best_params.json");
    std::cerr << "tune done: best " << param << " = " << cv.best_value << "\n";
    return 0;
}

int error_exit(const Error& err) {
    json out;
    out["error"] = err.name();
    switch (err.kind()) {
        case ErrorKind::Config: out["kind"] = "config"; break;
        case ErrorKind::Data: out["kind"] = "data"; break;
        case ErrorKind::Numerical: out["kind"] = "numerical"; break;
    }
    out["message"] = err.what();
    std::cerr << out.dump() << "\n";
    switch (err.kind()) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Data: return 3;
        case ErrorKind::Numerical: return 4;
    }
    return 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust-covariance portfolio toolkit"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON config file; flags override it");
        sub->add_option("--prices", opt.prices, "prices CSV (date,<TICKER>,...)");
        sub->add_option("--universe", opt.universe, "universe CSV (ticker,sector,market_cap)");
        sub->add_option("--estimator", opt.estimator,
                        "sample | ewma | ledoit | gerber-std | gerber-mad");
        sub->add_option("--alpha", opt.alpha, "EWMA decay in (0,1)");
        sub->add_option("--delta", opt.delta, "Ledoit shrinkage in [0,1], or 'auto'");
        sub->add_option("--c", opt.c, "Gerber threshold scale");
        sub->add_option("--lambda", opt.lambda, "L1 turnover penalty coefficient");
        sub->add_option("--window", opt.window, "estimation window in weeks");
        sub->add_option("--cost", opt.cost, "proportional cost per side");
        sub->add_option("--cvar", opt.cvar, "CVaR constraint ALPHA:BETA (repeatable)");
        sub->add_flag(
            "--nco", [&](std::int64_t) { opt.nco = true; },
            "allocate with nested clustered optimization");
        sub->add_option("--seed", opt.seed, "random seed");
        sub->add_option("--out", opt.out, "output directory");
        sub->add_flag(
            "--emit-charts", [&](std::int64_t) { opt.emit_charts = true; },
            "write SVG charts");
        sub->add_option("--per-sector", opt.per_sector, "top-N-by-cap selection per sector");
        sub->add_option("--variant", opt.variant, "gerber denominator: eq3 | eq5");
        sub->add_option("--split", opt.split, "train/test split fraction");
    };
    add_common(app.add_subcommand("estimate", "compute one covariance estimate + diagnostics"));
    add_common(app.add_subcommand("backtest", "rolling weekly backtest + benchmark"));
    add_common(app.add_subcommand("tune", "5-fold cross-validation of the estimator parameter"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        json out;
        out["error"] = "BadArguments";
        out["kind"] = "config";
        out["message"] = e.what();
        std::cerr << out.dump() << "\n";
        return 2;
    }
    opt.command = app.get_subcommands().front()->get_name();

    try {
        RunConfig rc = merge(opt);
        if (opt.command == "estimate") return cmd_estimate(rc);
        if (opt.command == "backtest") return cmd_backtest(rc);
        return cmd_tune(rc);
    } catch (const Error& err) {
        return error_exit(err);
    } catch (const std::exception& e) {
        return error_exit(numerical_error("Unexpected", e.what()));
    }
}
