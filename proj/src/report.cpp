#include "scida/report.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "scida/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scida {

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << content;
    if (!out) throw LoadError("write failed for " + path.string());
}

struct Series {
    std::string name;
    std::vector<double> values;
    cv::Scalar color;  // BGR
};

// Simple line chart; one curve per series, epoch on the x axis.
void render_curves(const std::vector<Series>& series, const std::string& title,
                   const fs::path& path) {
    const int w = 800, h = 500, margin = 60;
    cv::Mat img(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
    double lo = 0.0, hi = 1e-12;
    std::size_t n = 1;
    for (const auto& s : series) {
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        n = std::max(n, s.values.size());
    }
    const double span = hi - lo < 1e-12 ? 1.0 : hi - lo;
    auto px = [&](std::size_t i) {
        return margin + static_cast<int>((w - 2.0 * margin) * (n > 1 ? double(i) / (n - 1) : 0.5));
    };
    auto py = [&](double v) {
        return h - margin - static_cast<int>((h - 2.0 * margin) * (v - lo) / span);
    };
    cv::rectangle(img, {margin, margin}, {w - margin, h - margin}, cv::Scalar(180, 180, 180));
    cv::putText(img, title, {margin, margin - 20}, cv::FONT_HERSHEY_SIMPLEX, 0.7,
                cv::Scalar(30, 30, 30), 1, cv::LINE_AA);
    int legend_y = margin + 20;
    for (const auto& s : series) {
        for (std::size_t i = 1; i < s.values.size(); ++i)
            cv::line(img, {px(i - 1), py(s.values[i - 1])}, {px(i), py(s.values[i])}, s.color, 2,
                     cv::LINE_AA);
        if (s.values.size() == 1)
            cv::circle(img, {px(0), py(s.values[0])}, 3, s.color, cv::FILLED, cv::LINE_AA);
        cv::putText(img, s.name, {w - margin - 130, legend_y}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                    s.color, 1, cv::LINE_AA);
        legend_y += 18;
    }
    if (!cv::imwrite(path.string(), img)) throw LoadError("cannot write plot " + path.string());
}

void render_correlation_heatmap(const Mat& normalized, const fs::path& path) {
    const int k = static_cast<int>(normalized.rows());
    if (k == 0) return;
    const int cell = std::max(8, 512 / k);
    cv::Mat img(k * cell, k * cell, CV_8UC3);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const double v = std::clamp(normalized(i, j), 0.0, 1.0);
            // white -> dark blue ramp
            const auto shade = static_cast<unsigned char>(255 - 215 * v);
            cv::rectangle(img, {j * cell, i * cell}, {(j + 1) * cell - 1, (i + 1) * cell - 1},
                          cv::Scalar(255, shade, shade), cv::FILLED);
        }
    }
    if (!cv::imwrite(path.string(), img)) throw LoadError("cannot write plot " + path.string());
}

void render_all(const TrainLog& log, const Mat& corr_normalized, const fs::path& dir) {
    std::vector<Series> losses;
    Series wfl{"wfl", {}, cv::Scalar(180, 60, 20)};
    Series dis{"dis", {}, cv::Scalar(30, 140, 30)};
    Series sc{"selfcorr", {}, cv::Scalar(30, 30, 200)};
    Series churn{"churn", {}, cv::Scalar(140, 30, 140)};
    for (const auto& r : log.rows) {
        wfl.values.push_back(r.wfl);
        dis.values.push_back(r.dis);
        sc.values.push_back(r.selfcorr);
        churn.values.push_back(r.churn);
    }
    render_curves({wfl, dis, sc, churn}, "training losses / churn", dir / "curves_losses.png");

    Series op{"OP", {}, cv::Scalar(180, 60, 20)};
    Series orr{"OR", {}, cv::Scalar(30, 140, 30)};
    Series of1{"OF1", {}, cv::Scalar(30, 30, 200)};
    Series of2{"OF2", {}, cv::Scalar(140, 30, 140)};
    for (const auto& r : log.rows) {
        op.values.push_back(r.metrics.op);
        orr.values.push_back(r.metrics.or_);
        of1.values.push_back(r.metrics.of1);
        of2.values.push_back(r.metrics.of2);
    }
    render_curves({op, orr, of1, of2}, "evaluation metrics (all mode)", dir / "curves_metrics.png");

    render_correlation_heatmap(corr_normalized, dir / "correlation.png");
}

}  // namespace

void emit_report(const TrainLog& log, const CorrelationMatrix& corr,
                 const std::vector<MetricsReport>& final_reports, const std::string& config_json,
                 const std::string& pseudo_json, const std::string& out_dir) {
    if (log.rows.empty()) throw ConfigError("emit_report: empty train log");
    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw LoadError("cannot create report directory " + out_dir + ": " + ec.message());

    write_file(dir / "config.json", config_json + "\n");
    write_file(dir / "log.json", log.to_json() + "\n");
    write_file(dir / "curve.csv", log.curve_csv());
    write_file(dir / "pseudo_labels.json", pseudo_json + "\n");
    if (corr.counts.size() != 0) {
        write_file(dir / "correlation_counts.csv", corr.counts_csv());
        write_file(dir / "correlation_normalized.json", corr.normalized_json() + "\n");
    }

    json metrics = json::array();
    for (const auto& rep : final_reports) metrics.push_back(json::parse(rep.to_json()));
    write_file(dir / "metrics.json", metrics.dump(2) + "\n");

    render_all(log, corr.normalized, dir);
}

void report_from_run_dir(const std::string& run_dir) {
    const fs::path dir(run_dir);
    std::ifstream log_in(dir / "log.json");
    if (!log_in) throw LoadError("no log.json in " + run_dir);
    const std::string log_text((std::istreambuf_iterator<char>(log_in)),
                               std::istreambuf_iterator<char>());
    TrainLog log;
    try {
        log = TrainLog::from_json_text(log_text);
    } catch (const json::exception& e) {
        throw LoadError("malformed log.json: " + std::string(e.what()));
    }
    if (log.rows.empty()) throw ConfigError("report: empty train log");

    Mat corr;
    std::ifstream corr_in(dir / "correlation_normalized.json");
    if (corr_in) {
        const json rows = json::parse(corr_in);
        corr = Mat::Zero(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                corr(static_cast<int>(r), static_cast<int>(c)) = rows[r][c].get<double>();
    }

    write_file(dir / "curve.csv", log.curve_csv());
    render_all(log, corr, dir);
}

}  // namespace scida
