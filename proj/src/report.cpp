#include "portopt/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "portopt/errors.hpp"

namespace portopt {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path.string());
    return out;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                          "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#ad494a"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_forecast_csv(const std::filesystem::path& path, const ForecastMatrix& fm,
                        std::span<const std::string> asset_ids) {
    auto out = open_out(path);
    out << "date";
    for (const auto& id : asset_ids) out << ',' << id;
    out << '\n';
    for (std::size_t t = 0; t < fm.scores.rows; ++t) {
        out << fm.timestamps[t].to_string();
        for (std::size_t a = 0; a < fm.scores.cols; ++a) out << ',' << format_double(fm.scores.at(t, a));
        out << '\n';
    }
}

ForecastMatrix read_forecast_csv(const std::filesystem::path& path,
                                 std::vector<std::string>* asset_ids) {
    std::ifstream in(path);
    if (!in) throw PrereqError("missing forecast file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty forecast file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header;
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
    if (header.empty() || header[0] != "date")
        throw InputError("forecast file must start with a 'date' column: " + path.string());
    if (asset_ids != nullptr) asset_ids->assign(header.begin() + 1, header.end());

    ForecastMatrix fm;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::getline(ls, cell, ',');
        fm.timestamps.push_back(Date::parse(cell));
        while (std::getline(ls, cell, ',')) {
            double v = 0.0;
            if (!parse_double_field(cell, v))
                throw InputError("bad number '" + cell + "' in " + path.string());
            values.push_back(v);
        }
    }
    const std::size_t cols = header.size() - 1;
    if (fm.timestamps.empty() || values.size() != fm.timestamps.size() * cols)
        throw InputError("ragged forecast file: " + path.string());
    fm.scores = Matrix(fm.timestamps.size(), cols);
    fm.scores.data = std::move(values);
    return fm;
}

void write_weights_csv(const std::filesystem::path& path, std::span<const Date> timestamps,
                       const Matrix& weights, std::span<const std::string> asset_ids) {
    auto out = open_out(path);
    out << "date";
    for (const auto& id : asset_ids) out << ',' << id;
    out << '\n';
    for (std::size_t t = 0; t < weights.rows; ++t) {
        out << timestamps[t].to_string();
        for (std::size_t a = 0; a < weights.cols; ++a) out << ',' << format_double(weights.at(t, a));
        out << '\n';
    }
}

void write_ledger_csv(const std::filesystem::path& path, std::span<const Date> timestamps,
                      std::span<const StepRecord> records) {
    auto out = open_out(path);
    out << "date,gross,turnover,active,net,reward,clamped\n";
    for (std::size_t t = 0; t < records.size(); ++t) {
        const auto& r = records[t];
        out << timestamps[t].to_string() << ',' << format_double(r.gross) << ','
            << format_double(r.turnover) << ',' << r.active << ',' << format_double(r.net) << ','
            << format_double(r.reward) << ',' << (r.clamped ? 1 : 0) << '\n';
    }
}

void write_curves_csv(const std::filesystem::path& path, std::span<const CurveRow> curves) {
    auto out = open_out(path);
    out << "update,mean_reward,policy_loss,value_loss,entropy,clip_fraction\n";
    for (const auto& r : curves) {
        out << r.update << ',' << format_double(r.mean_reward) << ',' << format_double(r.policy_loss)
            << ',' << format_double(r.value_loss) << ',' << format_double(r.entropy) << ','
            << format_double(r.clip_fraction) << '\n';
    }
}

namespace {

std::string sharpe_cell(const std::optional<double>& s) {
    return s.has_value() ? format_double(*s) : "nan";
}

}  // namespace

void write_comparison_csv(const std::filesystem::path& path,
                          std::span<const StrategyResult> results, bool with_reported_rows) {
    auto out = open_out(path);
    out << "strategy,ann_return,volatility,sharpe,mdd";
    if (with_reported_rows) out << ",source";
    out << '\n';
    for (const auto& r : results) {
        out << r.name << ',' << format_double(r.metrics.ann_return) << ','
            << format_double(r.metrics.volatility) << ',' << sharpe_cell(r.metrics.sharpe) << ','
            << format_double(r.curve.max_drawdown);
        if (with_reported_rows) out << ",computed";
        out << '\n';
    }
    if (with_reported_rows) {
        for (const auto& r : reported_reference_rows()) {
            if (!r.benchmark) continue;
            out << '"' << r.name << '"' << ',' << format_double(r.ann_return) << ','
                << format_double(r.volatility) << ',' << format_double(r.sharpe) << ','
                << format_double(r.max_drawdown) << ",reported\n";
        }
    }
}

void write_comparison_json(const std::filesystem::path& path,
                           std::span<const StrategyResult> results, bool with_reported_rows) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json row = {
            {"strategy", r.name},
            {"ann_return", r.metrics.ann_return},
            {"volatility", r.metrics.volatility},
            {"mdd", r.curve.max_drawdown},
            {"source", "computed"},
        };
        if (r.metrics.sharpe.has_value())
            row["sharpe"] = *r.metrics.sharpe;
        else
            row["sharpe"] = nullptr;
        rows.push_back(row);
    }
    if (with_reported_rows) {
        for (const auto& r : reported_reference_rows()) {
            if (!r.benchmark) continue;
            rows.push_back({{"strategy", r.name},
                            {"ann_return", r.ann_return},
                            {"volatility", r.volatility},
                            {"sharpe", r.sharpe},
                            {"mdd", r.max_drawdown},
                            {"source", "reported"}});
        }
    }
    auto out = open_out(path);
    out << nlohmann::json{{"format", "portopt-comparison"}, {"version", 1}, {"rows", rows}}.dump(2)
        << '\n';
}

void write_equity_csv(const std::filesystem::path& path, std::span<const StrategyResult> results) {
    auto out = open_out(path);
    out << "date";
    for (const auto& r : results) out << ',' << r.name;
    out << '\n';
    if (results.empty()) return;
    const auto& stamps = results[0].curve.timestamps;
    for (std::size_t t = 0; t < stamps.size(); ++t) {
        out << stamps[t].to_string();
        for (const auto& r : results) out << ',' << format_double(r.curve.equity[t]);
        out << '\n';
    }
}

void write_drawdown_csv(const std::filesystem::path& path, std::span<const StrategyResult> results) {
    auto out = open_out(path);
    out << "date";
    for (const auto& r : results) out << ',' << r.name;
    out << '\n';
    if (results.empty()) return;
    const auto& stamps = results[0].curve.timestamps;
    for (std::size_t t = 0; t < stamps.size(); ++t) {
        out << stamps[t].to_string();
        for (const auto& r : results) out << ',' << format_double(r.curve.drawdowns[t]);
        out << '\n';
    }
}

namespace {

struct Frame {
    double width = 960, height = 480;
    double left = 70, right = 170, top = 40, bottom = 50;
    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
};

void svg_line_chart(const std::filesystem::path& path, const std::string& title,
                    std::span<const StrategyResult> results,
                    const std::function<const std::vector<double>&(const StrategyResult&)>& series) {
    Frame f;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    std::size_t n = 0;
    for (const auto& r : results) {
        for (double v : series(r)) {
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        n = std::max(n, series(r).size());
    }
    if (first || n < 2) {
        lo = 0.0;
        hi = 1.0;
        n = std::max<std::size_t>(n, 2);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;

    const auto sx = [&](std::size_t i) {
        return f.left + f.plot_w() * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    const auto sy = [&](double v) { return f.top + f.plot_h() * (1.0 - (v - lo) / (hi - lo)); };

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
        << f.height << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << f.width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"15\">" << title << "</text>\n";

    for (int g = 0; g <= 4; ++g) {
        const double v = lo + (hi - lo) * g / 4.0;
        const double y = sy(v);
        out << "<line x1=\"" << f.left << "\" y1=\"" << y << "\" x2=\"" << f.left + f.plot_w()
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n"
            << "<text x=\"" << f.left - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt4(v)
            << "</text>\n";
    }

    std::size_t color = 0;
    for (const auto& r : results) {
        const auto& v = series(r);
        out << "<polyline fill=\"none\" stroke=\"" << kPalette[color % kPaletteSize]
            << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < v.size(); ++i) out << sx(i) << ',' << sy(v[i]) << ' ';
        out << "\"/>\n";
        const double ly = f.top + 16.0 * static_cast<double>(color);
        out << "<rect x=\"" << f.left + f.plot_w() + 12 << "\" y=\"" << ly - 9
            << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[color % kPaletteSize] << "\"/>\n"
            << "<text x=\"" << f.left + f.plot_w() + 27 << "\" y=\"" << ly
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << r.name << "</text>\n";
        ++color;
    }
    if (!results.empty() && !results[0].curve.timestamps.empty()) {
        const auto& ts = results[0].curve.timestamps;
        out << "<text x=\"" << f.left << "\" y=\"" << f.height - 16
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << ts.front().to_string()
            << "</text>\n"
            << "<text x=\"" << f.left + f.plot_w() << "\" y=\"" << f.height - 16
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << ts.back().to_string() << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace

void write_equity_svg(const std::filesystem::path& path, std::span<const StrategyResult> results) {
    svg_line_chart(path, "Cumulative equity (net of costs)", results,
                   [](const StrategyResult& r) -> const std::vector<double>& { return r.curve.equity; });
}

void write_drawdown_svg(const std::filesystem::path& path, std::span<const StrategyResult> results) {
    svg_line_chart(path, "Drawdown", results,
                   [](const StrategyResult& r) -> const std::vector<double>& { return r.curve.drawdowns; });
}

void write_mean_weights_pie_svg(const std::filesystem::path& path, const StrategyResult& result,
                                std::span<const std::string> asset_ids) {
    const double cx = 240, cy = 240, radius = 170;
    const double total = std::accumulate(result.mean_weights.begin(), result.mean_weights.end(), 0.0);

    std::vector<std::size_t> idx(result.mean_weights.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return result.mean_weights[a] > result.mean_weights[b];
    });

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\""
        << " viewBox=\"0 0 720 480\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"240\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"15\">Average weights: " << result.name << "</text>\n";

    double angle = -0.5 * std::numbers::pi;
    std::size_t color = 0;
    std::size_t legend = 0;
    for (std::size_t a : idx) {
        const double share = total > 0.0 ? result.mean_weights[a] / total : 0.0;
        if (share <= 1e-9) continue;
        const double sweep = share * 2.0 * std::numbers::pi;
        const double x0 = cx + radius * std::cos(angle);
        const double y0 = cy + radius * std::sin(angle);
        const double x1 = cx + radius * std::cos(angle + sweep);
        const double y1 = cy + radius * std::sin(angle + sweep);
        const int large = sweep > std::numbers::pi ? 1 : 0;
        if (share >= 1.0 - 1e-9) {
            out << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << radius << "\" fill=\""
                << kPalette[color % kPaletteSize] << "\"/>\n";
        } else {
            out << "<path d=\"M" << cx << ' ' << cy << " L" << x0 << ' ' << y0 << " A" << radius
                << ' ' << radius << " 0 " << large << " 1 " << x1 << ' ' << y1 << " Z\" fill=\""
                << kPalette[color % kPaletteSize] << "\" stroke=\"white\"/>\n";
        }
        if (legend < 14) {
            const double ly = 60 + 18.0 * static_cast<double>(legend);
            out << "<rect x=\"500\" y=\"" << ly - 10 << "\" width=\"11\" height=\"11\" fill=\""
                << kPalette[color % kPaletteSize] << "\"/>\n"
                << "<text x=\"517\" y=\"" << ly << "\" font-family=\"sans-serif\" font-size=\"12\">"
                << (a < asset_ids.size() ? asset_ids[a] : "asset " + std::to_string(a)) << " ("
                << fmt4(100.0 * share) << "%)</text>\n";
            ++legend;
        }
        angle += sweep;
        ++color;
    }
    out << "</svg>\n";
}

std::string comparison_text_table(std::span<const StrategyResult> results, bool with_reported_rows) {
    std::ostringstream os;
    std::size_t width = 24;
    for (const auto& r : results) width = std::max(width, r.name.size() + 2);
    if (with_reported_rows)
        for (const auto& r : reported_reference_rows())
            if (r.benchmark) width = std::max(width, r.name.size() + 2);

    const auto pad = [&](const std::string& s) {
        std::string p = s;
        p.resize(width, ' ');
        return p;
    };
    const auto cell = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%12.4f", v);
        return std::string(buf);
    };
    os << pad("strategy") << "  ann_return  volatility      sharpe         mdd  source\n";
    for (const auto& r : results) {
        os << pad(r.name) << cell(r.metrics.ann_return) << cell(r.metrics.volatility)
           << (r.metrics.sharpe ? cell(*r.metrics.sharpe) : std::string("         nan"))
           << cell(r.curve.max_drawdown) << "  computed\n";
    }
    if (with_reported_rows) {
        for (const auto& r : reported_reference_rows()) {
            if (!r.benchmark) continue;
            os << pad(r.name) << cell(r.ann_return) << cell(r.volatility) << cell(r.sharpe)
               << cell(r.max_drawdown) << "  reported\n";
        }
    }
    return os.str();
}

}  // namespace portopt
