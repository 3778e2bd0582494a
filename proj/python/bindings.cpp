#include "confsplat/betaconf.hpp"
#include "confsplat/compress.hpp"
#include "confsplat/io.hpp"
#include "confsplat/losses.hpp"
#include "confsplat/raster.hpp"
#include "confsplat/train.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

namespace py = pybind11;
using namespace confsplat;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// (H, W, 3) float array <-> Image.
Image to_image(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ContractError("expected an (H, W, 3) array");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.data.data(), a.data(), img.data.size() * sizeof(double));
    return img;
}

Array from_image(const Image& img) {
    Array out({static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width), py::ssize_t{3}});
    std::memcpy(out.mutable_data(), img.data.data(), img.data.size() * sizeof(double));
    return out;
}

const Camera* camera_ptr(const std::optional<Camera>& cam) { return cam ? &*cam : nullptr; }

}  // namespace

PYBIND11_MODULE(_confsplat, m) {
    m.doc() = "Confidence-modulated Gaussian splatting: fitting, pruning and rendering.";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

    // Beta confidence numerics.
    m.def("softplus", &betaconf::softplus);
    m.def("digamma", &betaconf::digamma);
    m.def("trigamma", &betaconf::trigamma);
    m.def("confidence", [](double ra, double rb) { return betaconf::confidence(ra, rb).value; }, py::arg("raw_alpha"),
          py::arg("raw_beta"));
    m.def("beta_entropy", [](double a, double b) { return betaconf::beta_entropy({a, b}); }, py::arg("alpha"),
          py::arg("beta"));
    m.def("beta_entropy_grad", [](double a, double b) { return betaconf::beta_entropy_grad({a, b}); },
          py::arg("alpha"), py::arg("beta"));
    m.attr("RAW_CONFIDENCE_INIT") = kRawConfidenceInit;

    py::enum_<SceneMode>(m, "SceneMode").value("TwoD", SceneMode::TwoD).value("ThreeD", SceneMode::ThreeD);

    py::class_<SplatSet>(m, "SplatSet")
        .def("__len__", &SplatSet::size)
        .def_readonly("mode", &SplatSet::mode)
        .def_readonly("sh_degree", &SplatSet::sh_degree)
        .def_readonly("canvas_width", &SplatSet::canvas_width)
        .def_readonly("canvas_height", &SplatSet::canvas_height)
        .def_property_readonly("positions",
                               [](const SplatSet& s) {
                                   Array out({static_cast<py::ssize_t>(s.size()), py::ssize_t{3}});
                                   auto v = out.mutable_unchecked<2>();
                                   for (std::size_t i = 0; i < s.size(); ++i)
                                       for (int a = 0; a < 3; ++a) v(i, a) = s.splats[i].position[a];
                                   return out;
                               })
        .def_property_readonly("opacity_logits", [](const SplatSet& s) {
            std::vector<double> out;
            for (const auto& sp : s.splats) out.push_back(sp.opacity_logit);
            return out;
        });

    py::class_<ConfidenceField>(m, "ConfidenceField")
        .def(py::init<>())
        .def(py::init([](std::vector<double> ra, std::vector<double> rb) {
                 ConfidenceField f{std::move(ra), std::move(rb)};
                 f.validate(f.raw_alpha.size());
                 return f;
             }),
             py::arg("raw_alpha"), py::arg("raw_beta"))
        .def_static("uniform", &ConfidenceField::uniform, py::arg("n"), py::arg("raw") = kRawConfidenceInit)
        .def("__len__", &ConfidenceField::size)
        .def_readwrite("raw_alpha", &ConfidenceField::raw_alpha)
        .def_readwrite("raw_beta", &ConfidenceField::raw_beta)
        .def("confidences", &ConfidenceField::confidences);

    py::class_<Camera>(m, "Camera")
        .def(py::init<>())
        .def_readwrite("id", &Camera::id)
        .def_readwrite("fx", &Camera::fx)
        .def_readwrite("fy", &Camera::fy)
        .def_readwrite("cx", &Camera::cx)
        .def_readwrite("cy", &Camera::cy)
        .def_readwrite("width", &Camera::width)
        .def_readwrite("height", &Camera::height)
        .def_property(
            "translation", [](const Camera& c) { return std::vector<double>{c.translation.x(), c.translation.y(), c.translation.z()}; },
            [](Camera& c, const std::vector<double>& t) {
                if (t.size() != 3) throw ContractError("translation needs 3 values");
                c.translation = {t[0], t[1], t[2]};
            });
    m.def("load_cameras", [](const std::filesystem::path& path) {
        std::vector<Camera> out;
        for (const auto& e : io::load_cameras(path)) out.push_back(e.camera);
        return out;
    });

    py::class_<raster::RenderSettings>(m, "RenderSettings")
        .def(py::init<>())
        .def_readwrite("background", &raster::RenderSettings::background)
        .def_readwrite("alpha_min", &raster::RenderSettings::alpha_min)
        .def_readwrite("alpha_max", &raster::RenderSettings::alpha_max)
        .def_readwrite("transmittance_floor", &raster::RenderSettings::transmittance_floor);

    py::class_<LossWeights>(m, "LossWeights")
        .def(py::init<>())
        .def_readwrite("lambda_sparse", &LossWeights::lambda_sparse)
        .def_readwrite("lambda_entropy", &LossWeights::lambda_entropy)
        .def_readwrite("lambda_saliency", &LossWeights::lambda_saliency)
        .def_readwrite("recon_ssim_mix", &LossWeights::recon_ssim_mix);

    py::class_<SaliencyConfig>(m, "SaliencyConfig")
        .def(py::init<>())
        .def_readwrite("pairs_per_step", &SaliencyConfig::pairs_per_step)
        .def_readwrite("quantile", &SaliencyConfig::quantile)
        .def_readwrite("ema_decay", &SaliencyConfig::ema_decay);

    py::class_<train::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("iterations", &train::TrainConfig::iterations)
        .def_readwrite("lr_confidence", &train::TrainConfig::lr_confidence)
        .def_readwrite("lr_position", &train::TrainConfig::lr_position)
        .def_readwrite("lr_scale", &train::TrainConfig::lr_scale)
        .def_readwrite("lr_rotation", &train::TrainConfig::lr_rotation)
        .def_readwrite("lr_color", &train::TrainConfig::lr_color)
        .def_readwrite("lr_opacity", &train::TrainConfig::lr_opacity)
        .def_readwrite("lr_final_ratio", &train::TrainConfig::lr_final_ratio)
        .def_readwrite("weights", &train::TrainConfig::weights)
        .def_readwrite("saliency", &train::TrainConfig::saliency)
        .def_readwrite("seed", &train::TrainConfig::seed)
        .def_readwrite("snapshot_every", &train::TrainConfig::snapshot_every)
        .def_readwrite("cameras_per_step", &train::TrainConfig::cameras_per_step);

    m.def("load_config", [](const std::filesystem::path& path) {
        const auto cfg = io::load_config(path);
        return py::make_tuple(cfg.train, cfg.render);
    });

    py::class_<train::HistoryEntry>(m, "HistoryEntry")
        .def_readonly("iteration", &train::HistoryEntry::iteration)
        .def_property_readonly("total", [](const train::HistoryEntry& h) { return h.loss.total; })
        .def_property_readonly("recon", [](const train::HistoryEntry& h) { return h.loss.recon; })
        .def_readonly("active", &train::HistoryEntry::active)
        .def_readonly("mean_confidence", &train::HistoryEntry::mean_confidence);

    py::class_<train::FitResult>(m, "FitResult")
        .def_readonly("scene", &train::FitResult::scene)
        .def_readonly("field", &train::FitResult::field)
        .def_readonly("history", &train::FitResult::history);

    m.def(
        "fit_2d",
        [](const Array& target, std::size_t n, const train::TrainConfig& cfg, const raster::RenderSettings& st) {
            const Image img = to_image(target);
            py::gil_scoped_release release;
            return train::fit_2d(img, n, cfg, st);
        },
        py::arg("target"), py::arg("n_splats"), py::arg("config") = train::TrainConfig{},
        py::arg("settings") = raster::RenderSettings{});

    m.def(
        "fit_confidence",
        [](const SplatSet& scene, const std::vector<Camera>& cameras, const std::vector<Array>& targets,
           const train::TrainConfig& cfg, const raster::RenderSettings& st) {
            std::vector<compress::View> views;
            if (targets.empty()) {
                views = compress::self_supervised_views(scene, cameras, st);
            } else {
                if (targets.size() != std::max<std::size_t>(cameras.size(), 1))
                    throw ContractError("fit_confidence: one target per camera");
                for (std::size_t k = 0; k < targets.size(); ++k) {
                    std::optional<Camera> cam;
                    if (!cameras.empty()) cam = cameras[k];
                    views.push_back({cam, to_image(targets[k])});
                }
            }
            py::gil_scoped_release release;
            return train::fit_confidence(scene, views, cfg, st);
        },
        py::arg("scene"), py::arg("cameras") = std::vector<Camera>{}, py::arg("targets") = std::vector<Array>{},
        py::arg("config") = train::TrainConfig{}, py::arg("settings") = raster::RenderSettings{});

    m.def(
        "render",
        [](const SplatSet& scene, const ConfidenceField& field, const std::optional<Camera>& cam,
           const raster::RenderSettings& st) {
            return from_image(raster::render_scene(scene, camera_ptr(cam), field.confidences(), st).image);
        },
        py::arg("scene"), py::arg("field"), py::arg("camera") = std::nullopt,
        py::arg("settings") = raster::RenderSettings{});

    m.def(
        "render_heatmap",
        [](const SplatSet& scene, const ConfidenceField& field, const std::optional<Camera>& cam,
           const raster::RenderSettings& st) {
            return from_image(raster::render_heatmap(scene, camera_ptr(cam), field.confidences(), st));
        },
        py::arg("scene"), py::arg("field"), py::arg("camera") = std::nullopt,
        py::arg("settings") = raster::RenderSettings{});

    m.def(
        "prune",
        [](const SplatSet& scene, const ConfidenceField& field, double tau) {
            auto r = compress::prune(scene, field, tau);
            return py::make_tuple(std::move(r.scene), std::move(r.field), std::move(r.kept_indices));
        },
        py::arg("scene"), py::arg("field"), py::arg("tau"));

    m.def("psnr", [](const Array& a, const Array& b) { return compress::psnr(to_image(a), to_image(b)); });
    m.def("ssim", [](const Array& a, const Array& b) { return compress::ssim(to_image(a), to_image(b)); });
    m.def("sqr", &compress::sqr, py::arg("num_splats"), py::arg("psnr_db"), py::arg("scale"));
    m.def("sqr_scale", &compress::sqr_scale, py::arg("original_count"));
    m.def("acs", py::overload_cast<const ConfidenceField&>(&compress::acs));
    m.def("count_active", &compress::count_active);

    py::class_<SweepRow>(m, "SweepRow")
        .def_readonly("tau", &SweepRow::tau)
        .def_readonly("kept", &SweepRow::kept)
        .def_readonly("psnr", &SweepRow::psnr)
        .def_readonly("ssim", &SweepRow::ssim)
        .def_readonly("sqr", &SweepRow::sqr)
        .def_readonly("acs", &SweepRow::acs);

    m.def(
        "sweep",
        [](const SplatSet& scene, const ConfidenceField& field, const std::vector<double>& taus,
           const std::vector<Camera>& cameras, const std::vector<Array>& targets, const raster::RenderSettings& st) {
            std::vector<compress::View> views;
            if (targets.empty()) {
                views = compress::self_supervised_views(scene, cameras, st);
            } else {
                if (targets.size() != std::max<std::size_t>(cameras.size(), 1))
                    throw ContractError("sweep: one target per camera");
                for (std::size_t k = 0; k < targets.size(); ++k) {
                    std::optional<Camera> cam;
                    if (!cameras.empty()) cam = cameras[k];
                    views.push_back({cam, to_image(targets[k])});
                }
            }
            return compress::sweep(scene, field, views, taus, st);
        },
        py::arg("scene"), py::arg("field"), py::arg("taus"), py::arg("cameras") = std::vector<Camera>{},
        py::arg("targets") = std::vector<Array>{}, py::arg("settings") = raster::RenderSettings{});

    m.def(
        "load_ply",
        [](const std::filesystem::path& path) {
            auto p = io::load_ply(path);
            return py::make_tuple(std::move(p.scene), p.field ? py::cast(std::move(*p.field)) : py::none());
        },
        py::arg("path"));
    m.def(
        "save_ply",
        [](const SplatSet& scene, const std::optional<ConfidenceField>& field, const std::filesystem::path& path) {
            io::save_ply(scene, field ? &*field : nullptr, path);
        },
        py::arg("scene"), py::arg("field"), py::arg("path"));

    m.def("read_image", [](const std::string& path) { return from_image(read_image(path)); });
    m.def("write_image", [](const Array& a, const std::string& path) { write_image(to_image(a), path); });
}
