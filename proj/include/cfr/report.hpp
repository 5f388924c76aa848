#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfr/attack.hpp"
#include "cfr/errors.hpp"
#include "cfr/image_io.hpp"
#include "cfr/metrics.hpp"

namespace cfr {

constexpr int kReportSchema = 1;

namespace detail {

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

inline nlohmann::json metrics_to_json(const MetricsReport& rep) {
    return {{"asr", rep.asr},     {"mean_ssim", rep.mean_ssim}, {"mean_l0", rep.mean_l0},
            {"mean_l1", rep.mean_l1}, {"mean_l2", rep.mean_l2},     {"mean_linf", rep.mean_linf},
            {"n", rep.n}};
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
    MetricsReport rep;
    rep.asr = j.at("asr").get<double>();
    rep.mean_ssim = j.at("mean_ssim").get<double>();
    rep.mean_l0 = j.at("mean_l0").get<double>();
    rep.mean_l1 = j.at("mean_l1").get<double>();
    rep.mean_l2 = j.at("mean_l2").get<double>();
    rep.mean_linf = j.at("mean_linf").get<double>();
    rep.n = j.at("n").get<int>();
    return rep;
}

inline nlohmann::json run_report_json(const std::string& method, const nlohmann::json& config,
                                      const std::vector<AttackResult>& results,
                                      const MetricsReport& report,
                                      const SsimParams& sp = SsimParams::defaults()) {
    nlohmann::json per_image = nlohmann::json::array();
    for (const auto& r : results) {
        const LpNorms n = lp_norms(r.delta);
        nlohmann::json rec = {{"id", r.id},
                              {"label", r.label},
                              {"success", r.success},
                              {"final_predicted", r.final_predicted},
                              {"iterations_used", r.iterations_used},
                              {"suprathreshold_count", r.suprathreshold_count},
                              {"empty_cfr_fallback", r.empty_cfr_fallback},
                              {"regularizer_clamped", r.regularizer_clamped},
                              {"ssim", ssim(r.clean, r.adversarial, sp)},
                              {"l0", n.l0},
                              {"l1", n.l1},
                              {"l2", n.l2},
                              {"linf", n.linf},
                              {"loss_history", r.loss_history}};
        if (!r.error.empty()) rec["error"] = r.error;
        per_image.push_back(std::move(rec));
    }
    return {{"schema", kReportSchema},
            {"method", method},
            {"config", config},
            {"metrics", metrics_to_json(report)},
            {"per_image", per_image},
            {"timestamp", detail::utc_timestamp()}};
}

// Recomputes the aggregate metrics from a stored run's per-image records;
// matches the stored metrics field exactly (same summation order).
inline MetricsReport recompute_metrics(const nlohmann::json& report) {
    const auto& per_image = report.at("per_image");
    MetricsReport rep;
    rep.n = static_cast<int>(per_image.size());
    if (per_image.empty()) return rep;
    std::size_t wins = 0;
    for (const auto& rec : per_image) {
        wins += rec.at("success").get<bool>() ? 1 : 0;
        rep.mean_ssim += rec.at("ssim").get<double>();
        rep.mean_l0 += rec.at("l0").get<double>();
        rep.mean_l1 += rec.at("l1").get<double>();
        rep.mean_l2 += rec.at("l2").get<double>();
        rep.mean_linf += rec.at("linf").get<double>();
    }
    rep.asr = 100.0 * static_cast<double>(wins) / static_cast<double>(per_image.size());
    const double inv = 1.0 / static_cast<double>(per_image.size());
    rep.mean_ssim *= inv;
    rep.mean_l0 *= inv;
    rep.mean_l1 *= inv;
    rep.mean_l2 *= inv;
    rep.mean_linf *= inv;
    return rep;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write " + path.string());
    out << text;
    if (!out) throw io_error("short write on " + path.string());
}

inline std::string table_csv(const std::string& method, const std::vector<AttackResult>& results,
                             const nlohmann::json& report) {
    std::string csv = "method,asr,ssim,l0,l1,l2,linf\n";
    const auto& per_image = report.at("per_image");
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& rec = per_image[i];
        csv += method + "," + (results[i].success ? "100" : "0") + "," +
               nlohmann::json(rec.at("ssim")).dump() + "," + nlohmann::json(rec.at("l0")).dump() + "," +
               nlohmann::json(rec.at("l1")).dump() + "," + nlohmann::json(rec.at("l2")).dump() + "," +
               nlohmann::json(rec.at("linf")).dump() + "\n";
    }
    return csv;
}

// Writes report.json, table.csv and (optionally) per-image triptych PNGs
// into `dir`. The caller owns the directory.
inline void write_run(const std::filesystem::path& dir, const std::string& method,
                      const nlohmann::json& config, const std::vector<AttackResult>& results,
                      const MetricsReport& report, bool write_images = false,
                      std::size_t max_images = 16, const SsimParams& sp = SsimParams::defaults()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw io_error("cannot create run directory " + dir.string());

    const nlohmann::json j = run_report_json(method, config, results, report, sp);
    write_text_file(dir / "report.json", j.dump(2) + "\n");
    write_text_file(dir / "table.csv", table_csv(method, results, j));
    if (write_images) {
        for (std::size_t i = 0; i < results.size() && i < max_images; ++i) {
            const auto& r = results[i];
            if (!r.error.empty()) continue;
            write_png(dir / (r.id + "_triptych.png"), triptych(r.clean, r.delta, r.adversarial));
        }
    }
}

inline nlohmann::json read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw format_error("bad report json " + path.string() + ": " + e.what());
    }
}

}  // namespace cfr
