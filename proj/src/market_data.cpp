#include "robustcov/market_data.hpp"

#include "robustcov/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

namespace robustcov::market_data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    if (!cells.empty() && !cells.back().empty() && cells.back().back() == '\r')
        cells.back().pop_back();
    return cells;
}

bool parse_double_cell(const std::string& cell, double& out) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [p, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && p == end;
}

} // namespace

PricePanel load_price_table(const std::string& path, const PriceCsvSchema& schema) {
    std::ifstream file(path);
    if (!file) throw data_error("MalformedCsv", "cannot open prices file: " + path);

    std::string line;
    if (!std::getline(file, line)) throw data_error("EmptyPanel", "prices file is empty: " + path);
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2 || header[0] != schema.date_column)
        throw data_error("MalformedCsv",
                         "prices header must start with '" + schema.date_column + "'");

    PricePanel panel;
    panel.asset_ids.assign(header.begin() + 1, header.end());
    for (std::size_t i = 0; i < panel.asset_ids.size(); ++i)
        for (std::size_t j = i + 1; j < panel.asset_ids.size(); ++j)
            if (panel.asset_ids[i] == panel.asset_ids[j])
                throw data_error("MalformedCsv", "duplicate ticker: " + panel.asset_ids[i]);

    const std::size_t n = panel.asset_ids.size();
    std::vector<dates::CivilDay> stamps;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != n + 1)
            throw data_error("MalformedCsv", path + ":" + std::to_string(line_no) +
                                                 ": expected " + std::to_string(n + 1) +
                                                 " cells, got " + std::to_string(cells.size()));
        bool missing = false;
        std::vector<double> row(n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::string& cell = cells[j + 1];
            if (cell.empty()) {
                missing = true;
                continue;
            }
            if (!parse_double_cell(cell, row[j]))
                throw data_error("MalformedCsv", path + ":" + std::to_string(line_no) +
                                                     ": unparseable price '" + cell + "'");
        }
        if (missing) {
            ++panel.dropped_rows;
            continue;
        }
        for (std::size_t j = 0; j < n; ++j)
            if (!(row[j] > 0.0))
                throw data_error("MalformedCsv", path + ":" + std::to_string(line_no) +
                                                     ": nonpositive price for " +
                                                     panel.asset_ids[j]);
        stamps.push_back(dates::parse_iso_date(cells[0]));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw data_error("EmptyPanel", "no usable rows in " + path);

    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return stamps[a] < stamps[b]; });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (stamps[order[i]] == stamps[order[i - 1]])
            throw data_error("DuplicateDate",
                             "repeated date " + dates::format_iso_date(stamps[order[i]]));

    panel.timestamps.resize(rows.size());
    panel.prices.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < order.size(); ++i) {
        panel.timestamps[i] = stamps[order[i]];
        for (std::size_t j = 0; j < n; ++j)
            panel.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[order[i]][j];
    }
    return panel;
}

void load_universe_table(const std::string& path, PricePanel& panel) {
    std::ifstream file(path);
    if (!file) throw data_error("MalformedCsv", "cannot open universe file: " + path);
    std::string line;
    if (!std::getline(file, line)) throw data_error("MalformedCsv", "universe file is empty");
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() != 3 || header[0] != "ticker" || header[1] != "sector" ||
        header[2] != "market_cap")
        throw data_error("MalformedCsv", "universe header must be 'ticker,sector,market_cap'");

    std::size_t line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != 3)
            throw data_error("MalformedCsv",
                             path + ":" + std::to_string(line_no) + ": expected 3 cells");
        double cap;
        if (!parse_double_cell(cells[2], cap) || !(cap > 0.0))
            throw data_error("MalformedCsv", path + ":" + std::to_string(line_no) +
                                                 ": market_cap must be a positive number");
        panel.sector_of[cells[0]] = cells[1];
        panel.market_cap_of[cells[0]] = cap;
    }
}

ReturnPanel to_weekly_returns(const PricePanel& panel) {
    const Eigen::Index t_obs = static_cast<Eigen::Index>(panel.timestamps.size());
    // Keep the last observation of each ISO week.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index t = 0; t < t_obs; ++t) {
        const std::int64_t key = dates::iso_week_key(panel.timestamps[t]);
        if (!keep.empty() && dates::iso_week_key(panel.timestamps[keep.back()]) == key)
            keep.back() = t;
        else
            keep.push_back(t);
    }
    if (keep.size() < 2)
        throw data_error("EmptyPanel", "fewer than two weekly observations after resampling");

    ReturnPanel out;
    out.asset_ids = panel.asset_ids;
    const Eigen::Index weeks = static_cast<Eigen::Index>(keep.size()) - 1;
    out.timestamps.resize(weeks);
    out.returns.resize(weeks, panel.prices.cols());
    for (Eigen::Index w = 0; w < weeks; ++w) {
        out.timestamps[w] = panel.timestamps[keep[w + 1]];
        out.returns.row(w) = panel.prices.row(keep[w + 1]).cwiseQuotient(panel.prices.row(keep[w]));
        out.returns.row(w).array() -= 1.0;
    }
    return out;
}

UniverseSelection select_universe(const PricePanel& panel, int per_sector) {
    if (per_sector < 1) throw config_error("BadPerSector", "per_sector must be >= 1");
    for (const std::string& id : panel.asset_ids) {
        if (!panel.sector_of.count(id))
            throw data_error("MissingSector", "no sector for asset " + id);
        if (!panel.market_cap_of.count(id))
            throw data_error("MissingCap", "no market cap for asset " + id);
    }

    std::map<std::string, std::vector<std::string>> by_sector;
    for (const std::string& id : panel.asset_ids) by_sector[panel.sector_of.at(id)].push_back(id);

    UniverseSelection sel;
    for (auto& [sector, ids] : by_sector) {
        std::sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
            const double ca = panel.market_cap_of.at(a);
            const double cb = panel.market_cap_of.at(b);
            if (ca != cb) return ca > cb;
            return a < b;
        });
        if (static_cast<int>(ids.size()) < per_sector)
            sel.warnings.push_back("sector '" + sector + "' has only " +
                                   std::to_string(ids.size()) + " assets");
        const std::size_t take = std::min<std::size_t>(ids.size(), per_sector);
        sel.asset_ids.insert(sel.asset_ids.end(), ids.begin(), ids.begin() + take);
    }
    return sel;
}

PricePanel restrict_assets(const PricePanel& panel, const std::vector<std::string>& ids) {
    PricePanel out;
    out.timestamps = panel.timestamps;
    out.asset_ids = ids;
    out.dropped_rows = panel.dropped_rows;
    out.prices.resize(panel.prices.rows(), static_cast<Eigen::Index>(ids.size()));
    for (std::size_t j = 0; j < ids.size(); ++j) {
        auto it = std::find(panel.asset_ids.begin(), panel.asset_ids.end(), ids[j]);
        if (it == panel.asset_ids.end())
            throw data_error("MissingAsset", "asset not in prices table: " + ids[j]);
        out.prices.col(static_cast<Eigen::Index>(j)) =
            panel.prices.col(it - panel.asset_ids.begin());
        if (auto s = panel.sector_of.find(ids[j]); s != panel.sector_of.end())
            out.sector_of[ids[j]] = s->second;
        if (auto c = panel.market_cap_of.find(ids[j]); c != panel.market_cap_of.end())
            out.market_cap_of[ids[j]] = c->second;
    }
    return out;
}

ReturnPanel rolling_window(const ReturnPanel& panel, Eigen::Index end_index, Eigen::Index length) {
    if (length < 1) throw config_error("BadWindow", "window length must be >= 1");
    if (end_index > panel.weeks() || end_index - length < 0)
        throw data_error("InsufficientHistory",
                         "window of " + std::to_string(length) + " rows ending at " +
                             std::to_string(end_index) + " does not fit in panel of " +
                             std::to_string(panel.weeks()) + " rows");
    ReturnPanel out;
    out.asset_ids = panel.asset_ids;
    out.timestamps.assign(panel.timestamps.begin() + (end_index - length),
                          panel.timestamps.begin() + end_index);
    out.returns = panel.returns.middleRows(end_index - length, length);
    return out;
}

} // namespace robustcov::market_data
