#pragma once

#include "robustcov/dates.hpp"

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace robustcov::market_data {

/**
 * @brief Raw adjusted-close price table with optional sector/cap metadata.
 *
 * Immutable after construction; timestamps are strictly increasing and all
 * prices strictly positive.
 */
struct PricePanel {
    std::vector<dates::CivilDay> timestamps;
    std::vector<std::string> asset_ids;
    Eigen::MatrixXd prices; // T x N
    std::map<std::string, std::string> sector_of;
    std::map<std::string, double> market_cap_of;
    std::size_t dropped_rows = 0; // rows discarded at load for missing prices
};

/// Periodic simple returns, column order matching asset_ids.
struct ReturnPanel {
    std::vector<dates::CivilDay> timestamps;
    std::vector<std::string> asset_ids;
    Eigen::MatrixXd returns; // T x N, each entry > -1

    Eigen::Index weeks() const { return returns.rows(); }
    Eigen::Index assets() const { return returns.cols(); }
};

/// Column conventions for the prices CSV (see docs/data-formats.md).
struct PriceCsvSchema {
    std::string date_column = "date";
};

/// Loads `date,<TICKER>,...` CSV. Rows with any blank price cell are dropped
/// and counted in PricePanel::dropped_rows; rows are sorted by date.
/// Throws MalformedCsv, EmptyPanel or DuplicateDate.
PricePanel load_price_table(const std::string& path, const PriceCsvSchema& schema = {});

/// Loads `ticker,sector,market_cap` CSV into the panel's metadata maps.
/// Unknown tickers are ignored; throws MalformedCsv.
void load_universe_table(const std::string& path, PricePanel& panel);

/// Resamples to the last observation of each ISO calendar week, then forms
/// simple returns p_t/p_{t-1} - 1 on that weekly grid.
ReturnPanel to_weekly_returns(const PricePanel& panel);

struct UniverseSelection {
    std::vector<std::string> asset_ids;
    std::vector<std::string> warnings; // sectors with fewer than per_sector names
};

/// Top `per_sector` assets by market cap within each sector. Sectors are
/// ordered ascending by label; within a sector, descending cap with ties
/// broken by ascending asset id. Undersized sectors contribute everything
/// they have plus a warning record.
UniverseSelection select_universe(const PricePanel& panel, int per_sector);

/// Restricts a panel to the given assets, preserving the requested order.
PricePanel restrict_assets(const PricePanel& panel, const std::vector<std::string>& ids);

/// Contiguous slice of `length` rows ending at end_index - 1, so the week
/// being traded is never part of its own estimation window.
ReturnPanel rolling_window(const ReturnPanel& panel, Eigen::Index end_index, Eigen::Index length);

} // namespace robustcov::market_data
