#include "confsplat/cli.hpp"

#include "confsplat/compress.hpp"
#include "confsplat/io.hpp"
#include "confsplat/serve.hpp"
#include "confsplat/train.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace confsplat::cli {

namespace {

constexpr double kRangeSlack = 1e-9;

double parse_unit_number(const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("'" + text + "' is not a number");
    }
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument("'" + text + "' is not a number");
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("tau " + text + " is outside [0, 1]");
    return v;
}

struct Common {
    std::string config_path;
    std::uint64_t seed = 42;
    bool seed_given = false;
};

io::AppConfig load_app_config(const Common& common) {
    io::AppConfig cfg = common.config_path.empty() ? io::AppConfig{} : io::load_config(common.config_path);
    if (common.seed_given) cfg.train.seed = common.seed;
    return cfg;
}

ConfidenceField require_field(const io::PlyScene& ply, const std::string& path) {
    if (!ply.field) throw DataError(path + ": scene has no confidence properties; run fit-confidence first");
    return *ply.field;
}

std::vector<Camera> cameras_of(const std::vector<io::CameraEntry>& entries) {
    std::vector<Camera> out;
    for (const auto& e : entries) out.push_back(e.camera);
    return out;
}

/// Target images for every camera, or nothing if any camera lacks one.
std::optional<std::vector<Image>> camera_targets(const std::vector<io::CameraEntry>& entries) {
    if (entries.empty()) return std::nullopt;
    std::vector<Image> out;
    for (const auto& e : entries) {
        if (!e.image) return std::nullopt;
        out.push_back(read_image(e.image->string()));
    }
    return out;
}

/// Reference views: given target images, or renders of the unmodulated scene.
std::vector<compress::View> build_views(const SplatSet& scene, const std::vector<io::CameraEntry>& entries,
                                        const std::string& target_path, bool self_supervised,
                                        const raster::RenderSettings& settings, std::ostream& err) {
    if (scene.mode == SceneMode::TwoD) {
        if (!self_supervised && !target_path.empty()) {
            std::vector<compress::View> views{{std::nullopt, read_image(target_path)}};
            const auto [w, h] = raster::output_size(scene, nullptr);
            if (views[0].target.width != w || views[0].target.height != h) {
                throw DataError(target_path + ": target size does not match the scene canvas");
            }
            return views;
        }
        return compress::self_supervised_views(scene, {}, settings);
    }
    if (entries.empty()) throw DataError("a 3D scene needs --cameras");
    const auto cams = cameras_of(entries);
    if (!self_supervised) {
        if (auto targets = camera_targets(entries)) {
            std::vector<compress::View> views;
            for (std::size_t i = 0; i < cams.size(); ++i) {
                const auto [w, h] = raster::output_size(scene, &cams[i]);
                if ((*targets)[i].width != w || (*targets)[i].height != h) {
                    throw DataError(entries[i].image->string() + ": image size does not match camera " +
                                    std::to_string(cams[i].id));
                }
                views.push_back({cams[i], std::move((*targets)[i])});
            }
            return views;
        }
        err << "note: not every camera lists an image; using renders of the unmodulated scene as targets\n";
    }
    return compress::self_supervised_views(scene, cams, settings);
}

std::string mode_name(const SplatSet& scene) { return scene.mode == SceneMode::TwoD ? "2d" : "3d"; }

void print_summary(std::ostream& out, const SplatSet& scene, const ConfidenceField& field) {
    out << "splats " << scene.size() << "  acs " << io::format_metric(compress::acs(field)) << "  active "
        << compress::count_active(field) << '\n';
}

}  // namespace

std::vector<double> parse_tau_range(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (!text.empty() && text.back() == ':') parts.emplace_back();
    if (parts.size() == 1) return {parse_unit_number(parts[0])};
    if (parts.size() != 3) throw std::invalid_argument("expected start:stop:step, got '" + text + "'");
    const double start = parse_unit_number(parts[0]);
    const double stop = parse_unit_number(parts[1]);
    double step = 0.0;
    try {
        std::size_t used = 0;
        step = std::stod(parts[2], &used);
        if (used != parts[2].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw std::invalid_argument("step '" + parts[2] + "' is not a number");
    }
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("step must be positive");
    if (start > stop) throw std::invalid_argument("start must not exceed stop");
    std::vector<double> out;
    for (long k = 0;; ++k) {
        double v = start + static_cast<double>(k) * step;
        if (v > stop + kRangeSlack) break;
        if (std::abs(v - stop) <= kRangeSlack) v = stop;
        out.push_back(v);
        if (v == stop) break;
    }
    return out;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"confsplat: confidence-scored Gaussian splat compression"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    auto* seed_opt = app.add_option("--seed", common.seed, "Random seed (default 42)");

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "TOML config file")->check(CLI::ExistingFile);
    };

    std::string target, out_path, scene_path, cameras_path, taus_text = "0:1:0.05", csv_path, report_path,
                                                                 history_path, host = "127.0.0.1";
    std::size_t n_splats = 0;
    double tau = 0.0;
    int camera_id = 0, port = 8080;
    bool self_supervised = false, heatmap = false, convenience = false;

    auto* fit2d = app.add_subcommand("fit2d", "Fit a 2D splat image and its confidences to a PNG target");
    fit2d->add_option("--target", target, "Target PNG")->required()->check(CLI::ExistingFile);
    fit2d->add_option("--splats", n_splats, "Number of splats")->required()->check(CLI::PositiveNumber);
    fit2d->add_option("--out", out_path, "Output PLY")->required();
    fit2d->add_option("--history", history_path, "Optional loss history CSV");
    add_config(fit2d);

    auto* fitc = app.add_subcommand("fit-confidence", "Fit confidences on a frozen scene");
    fitc->add_option("--scene", scene_path, "Input PLY")->required()->check(CLI::ExistingFile);
    fitc->add_option("--cameras", cameras_path, "Camera JSON")->check(CLI::ExistingFile);
    fitc->add_option("--target", target, "Target PNG for a 2D scene")->check(CLI::ExistingFile);
    fitc->add_flag("--self-supervised", self_supervised, "Use renders of the unmodulated scene as targets");
    fitc->add_option("--out", out_path, "Output PLY")->required();
    fitc->add_option("--history", history_path, "Optional loss history CSV");
    add_config(fitc);

    auto* prune_cmd = app.add_subcommand("prune", "Drop splats with confidence below tau");
    prune_cmd->add_option("--scene", scene_path, "Input PLY with confidences")->required()->check(CLI::ExistingFile);
    prune_cmd->add_option("--tau", tau, "Threshold in [0, 1]")->required()->check(CLI::Range(0.0, 1.0));
    prune_cmd->add_option("--out", out_path, "Output PLY")->required();
    prune_cmd->add_flag("--with-confidence", convenience, "Also write the derived confidence property");
    add_config(prune_cmd);

    auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate a range of thresholds");
    sweep_cmd->add_option("--scene", scene_path, "Input PLY with confidences")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--cameras", cameras_path, "Camera JSON")->check(CLI::ExistingFile);
    sweep_cmd->add_option("--target", target, "Target PNG for a 2D scene")->check(CLI::ExistingFile);
    sweep_cmd->add_option("--taus", taus_text, "start:stop:step (inclusive)");
    sweep_cmd->add_option("--csv", csv_path, "Output CSV");
    sweep_cmd->add_option("--report", report_path, "Output JSON report");
    add_config(sweep_cmd);

    auto* render_cmd = app.add_subcommand("render", "Render a scene to PNG");
    render_cmd->add_option("--scene", scene_path, "Input PLY")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--cameras", cameras_path, "Camera JSON")->check(CLI::ExistingFile);
    render_cmd->add_option("--camera-id", camera_id, "Camera id (ignored for 2D scenes)");
    render_cmd->add_option("--tau", tau, "Prune threshold before rendering")->check(CLI::Range(0.0, 1.0));
    render_cmd->add_flag("--heatmap", heatmap, "Colour splats by confidence");
    render_cmd->add_option("--out", out_path, "Output PNG")->required();
    add_config(render_cmd);

    auto* serve_cmd = app.add_subcommand("serve", "Serve renders and metrics over HTTP");
    serve_cmd->add_option("--scene", scene_path, "Input PLY with confidences")->required()->check(CLI::ExistingFile);
    serve_cmd->add_option("--cameras", cameras_path, "Camera JSON")->check(CLI::ExistingFile);
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));
    add_config(serve_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    common.seed_given = seed_opt->count() > 0;

    try {
        const io::AppConfig cfg = load_app_config(common);
        const auto& settings = cfg.render;
        const std::vector<io::CameraEntry> entries =
            cameras_path.empty() ? std::vector<io::CameraEntry>{} : io::load_cameras(cameras_path);

        if (fit2d->parsed()) {
            const Image img = read_image(target);
            const auto result = train::fit_2d(img, n_splats, cfg.train, settings);
            io::save_ply(result.scene, &result.field, out_path);
            if (!history_path.empty()) io::write_text(history_path, io::history_csv(result.history));
            const Image render = raster::render_scene(result.scene, nullptr, result.field.confidences(), settings).image;
            out << "psnr " << io::format_metric(compress::psnr(render, img)) << "  ";
            print_summary(out, result.scene, result.field);
            out << "seed " << cfg.train.seed << "  config " << io::config_hash(cfg) << '\n';
        } else if (fitc->parsed()) {
            const auto ply = io::load_ply(scene_path, cfg.ply);
            const auto views = build_views(ply.scene, entries, target, self_supervised, settings, err);
            const auto result = train::fit_confidence(ply.scene, views, cfg.train, settings, ply.field);
            io::save_ply(result.scene, &result.field, out_path, {false, cfg.ply});
            if (!history_path.empty()) io::write_text(history_path, io::history_csv(result.history));
            print_summary(out, result.scene, result.field);
            out << "seed " << cfg.train.seed << "  config " << io::config_hash(cfg) << '\n';
        } else if (prune_cmd->parsed()) {
            const auto ply = io::load_ply(scene_path, cfg.ply);
            const auto pruned = compress::prune(ply.scene, require_field(ply, scene_path), tau);
            if (pruned.scene.empty()) throw DataError("prune at tau " + io::format_metric(tau) + " keeps no splats");
            io::save_ply(pruned.scene, &pruned.field, out_path, {convenience, cfg.ply});
            out << "kept " << pruned.scene.size() << " of " << ply.scene.size() << '\n';
        } else if (sweep_cmd->parsed()) {
            std::vector<double> taus;
            try {
                taus = parse_tau_range(taus_text);
            } catch (const std::invalid_argument& e) {
                err << "--taus: " << e.what() << '\n' << sweep_cmd->help();
                return kUsage;
            }
            const auto ply = io::load_ply(scene_path, cfg.ply);
            const auto field = require_field(ply, scene_path);
            const auto views = build_views(ply.scene, entries, target, false, settings, err);
            const auto rows = compress::sweep(ply.scene, field, views, taus, settings);
            const std::string csv = io::sweep_csv(rows);
            if (!csv_path.empty()) io::write_text(csv_path, csv);
            if (!report_path.empty()) {
                io::ReportMeta meta{scene_path,
                                    ply.scene.size(),
                                    ply.scene.color_kind == ColorKind::Sh ? ply.scene.sh_degree : 0,
                                    mode_name(ply.scene),
                                    io::config_hash(cfg),
                                    cfg.train.seed};
                io::write_text(report_path, io::sweep_report(rows, meta).dump(2) + "\n");
            }
            out << csv;
        } else if (render_cmd->parsed()) {
            const auto ply = io::load_ply(scene_path, cfg.ply);
            const Camera* cam = nullptr;
            if (ply.scene.mode == SceneMode::ThreeD) {
                if (entries.empty()) throw DataError("a 3D scene needs --cameras");
                for (const auto& e : entries) {
                    if (e.camera.id == camera_id) cam = &e.camera;
                }
                if (cam == nullptr) throw DataError("unknown camera id " + std::to_string(camera_id));
            }
            SplatSet scene = ply.scene;
            std::vector<double> conf(scene.size(), 1.0);
            if (ply.field) {
                auto pruned = compress::prune(ply.scene, *ply.field, tau);
                scene = std::move(pruned.scene);
                conf = pruned.field.confidences();
            }
            const Image img = heatmap ? raster::render_heatmap(scene, cam, conf, settings)
                                      : raster::render_scene(scene, cam, conf, settings).image;
            write_image(img, out_path);
            out << "rendered " << scene.size() << " splats to " << out_path << '\n';
        } else if (serve_cmd->parsed()) {
            const auto ply = io::load_ply(scene_path, cfg.ply);
            auto targets = camera_targets(entries);
            serve::SceneService service(ply.scene, require_field(ply, scene_path), cameras_of(entries),
                                        targets ? std::move(*targets) : std::vector<Image>{}, settings);
            serve::HttpServer server(service);
            const int bound = server.bind(host, port);
            out << "listening on http://" << host << ':' << bound << std::endl;
            server.run();
        }
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}

}  // namespace confsplat::cli
