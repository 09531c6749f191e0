#include "robustcov/report_io.hpp"

#include "robustcov/dates.hpp"
#include "robustcov/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace robustcov::report_io {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[40];
    // Shortest representation that round-trips.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, value);
        double parsed = 0.0;
        std::sscanf(buf, "%lf", &parsed);
        if (parsed == value) return std::string(buf);
    }
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return std::string(buf);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("WriteFailure", "cannot open for writing: " + path);
    out << content;
    if (!out) throw data_error("WriteFailure", "write failed: " + path);
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix,
                      const std::vector<std::string>& asset_ids) {
    std::ostringstream out;
    for (std::size_t j = 0; j < asset_ids.size(); ++j) {
        if (j) out << ',';
        out << asset_ids[j];
    }
    out << '\n';
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            if (j) out << ',';
            out << format_double(matrix(i, j));
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

void write_records_csv(const std::string& path,
                       const std::vector<backtest::RebalanceRecord>& records,
                       const std::vector<std::string>& asset_ids) {
    std::ostringstream out;
    out << "date,turnover,cost,realized_return,top_asset,max_abs_weight\n";
    for (const backtest::RebalanceRecord& rec : records) {
        Eigen::Index top = 0;
        rec.post_weights.cwiseAbs().maxCoeff(&top);
        out << dates::format_iso_date(rec.date) << ',' << format_double(rec.turnover) << ','
            << format_double(rec.cost_paid) << ',' << format_double(rec.realized_return) << ','
            << asset_ids[static_cast<std::size_t>(top)] << ','
            << format_double(rec.post_weights.cwiseAbs().maxCoeff()) << '\n';
    }
    write_text_file(path, out.str());
}

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<double>& values) {
    const int width = 800, height = 420;
    const int margin = 50;
    double lo = values.empty() ? 0.0 : values[0];
    double hi = lo;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) hi = lo + 1.0;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "  <text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    out << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
        << width - margin << "\" y2=\"" << height - margin
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << height - margin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "  <text x=\"8\" y=\"" << margin << "\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_double(hi) << "</text>\n";
    out << "  <text x=\"8\" y=\"" << height - margin
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(lo) << "</text>\n";
    out << "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    const std::size_t n = values.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x =
            margin + (width - 2.0 * margin) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5);
        const double y = height - margin - (height - 2.0 * margin) * (values[i] - lo) / (hi - lo);
        if (i) out << ' ';
        out << format_double(x) << ',' << format_double(y);
    }
    out << "\"/>\n</svg>\n";
    write_text_file(path, out.str());
}

} // namespace robustcov::report_io
