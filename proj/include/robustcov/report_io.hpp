#pragma once

#include "robustcov/backtest.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace robustcov::report_io {

/// Shortest round-trip decimal text for a double ("%.17g" trimmed), so
/// repeated runs emit byte-identical files.
std::string format_double(double value);

/// Writes a symmetric matrix as CSV: header row of asset ids, one row per
/// asset (row-major).
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix,
                      const std::vector<std::string>& asset_ids);

/// One row per rebalance: date, turnover, cost, realized_return,
/// top-weight asset, max absolute weight.
void write_records_csv(const std::string& path,
                       const std::vector<backtest::RebalanceRecord>& records,
                       const std::vector<std::string>& asset_ids);

/// Self-contained SVG line chart of one series against its index.
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<double>& values);

/// Writes text to a file, creating parent directories is the caller's job.
void write_text_file(const std::string& path, const std::string& content);

} // namespace robustcov::report_io
