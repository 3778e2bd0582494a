#include "confsplat/io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace confsplat::io {

std::string format_metric(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::ostringstream out;
    out << "tau,kept,psnr_db,ssim,sqr,acs\n";
    for (const auto& r : rows) {
        out << format_metric(r.tau) << ',' << r.kept << ',' << format_metric(r.psnr) << ',' << format_metric(r.ssim)
            << ',' << format_metric(r.sqr) << ',' << format_metric(r.acs) << '\n';
    }
    return out.str();
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
    write_text(path, sweep_csv(rows));
}

namespace {

nlohmann::json metric_json(double v) {
    if (std::isfinite(v)) return v;
    return format_metric(v);
}

}  // namespace

nlohmann::json sweep_report(std::span<const SweepRow> rows, const ReportMeta& meta) {
    nlohmann::json out;
    out["scene"] = {{"path", meta.scene_path},
                    {"n_splats", meta.n_splats},
                    {"sh_degree", meta.sh_degree},
                    {"mode", meta.mode}};
    out["config_hash"] = meta.config_hash;
    out["seed"] = meta.seed;
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : rows) {
        list.push_back({{"tau", r.tau},
                        {"kept", r.kept},
                        {"psnr_db", metric_json(r.psnr)},
                        {"ssim", metric_json(r.ssim)},
                        {"sqr", metric_json(r.sqr)},
                        {"acs", metric_json(r.acs)}});
    }
    out["rows"] = std::move(list);
    return out;
}

std::string history_csv(std::span<const train::HistoryEntry> history) {
    std::ostringstream out;
    out << "iteration,total,recon,sparse,entropy,saliency,active,mean_confidence,degenerate_pairs\n";
    for (const auto& h : history) {
        out << h.iteration << ',' << format_metric(h.loss.total) << ',' << format_metric(h.loss.recon) << ','
            << format_metric(h.loss.sparse) << ',' << format_metric(h.loss.entropy) << ','
            << format_metric(h.loss.saliency) << ',' << h.active << ',' << format_metric(h.mean_confidence) << ','
            << (h.degenerate_pairs ? 1 : 0) << '\n';
    }
    return out.str();
}

}  // namespace confsplat::io
