#include "confsplat/io.hpp"

#include <Eigen/SVD>

#include <fstream>

namespace confsplat::io {

namespace {

using nlohmann::json;

// Rotations within this drift of orthonormal are repaired; beyond it they are rejected.
constexpr double kRotationRepairTolerance = 1e-3;

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw DataError("camera JSON: " + path + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end()) schema_error(path + "." + key, "missing required field");
    return *it;
}

double number(const json& obj, const std::string& key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number()) schema_error(path + "." + key, "expected a number");
    return v.get<double>();
}

int positive_int(const json& obj, const std::string& key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number_integer() || v.get<long long>() < 1) schema_error(path + "." + key, "expected a positive integer");
    return v.get<int>();
}

std::vector<double> number_array(const json& obj, const std::string& key, std::size_t size, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_array() || v.size() != size) {
        schema_error(path + "." + key, "expected an array of " + std::to_string(size) + " numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < size; ++i) {
        if (!v[i].is_number()) schema_error(path + "." + key + "[" + std::to_string(i) + "]", "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

}  // namespace

std::vector<CameraEntry> parse_cameras(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_array()) schema_error("$", "expected an array of camera objects");
    std::vector<CameraEntry> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string path = "$[" + std::to_string(i) + "]";
        const json& obj = doc[i];
        if (!obj.is_object()) schema_error(path, "expected an object");
        CameraEntry entry;
        Camera& cam = entry.camera;
        const json& id = require(obj, "id", path);
        if (!id.is_number_integer()) schema_error(path + ".id", "expected an integer");
        cam.id = id.get<int>();
        cam.width = positive_int(obj, "width", path);
        cam.height = positive_int(obj, "height", path);
        cam.fx = number(obj, "fx", path);
        cam.fy = number(obj, "fy", path);
        cam.cx = number(obj, "cx", path);
        cam.cy = number(obj, "cy", path);
        if (!(cam.fx > 0.0)) schema_error(path + ".fx", "must be positive");
        if (!(cam.fy > 0.0)) schema_error(path + ".fy", "must be positive");
        const auto r = number_array(obj, "rotation", 9, path);
        const auto t = number_array(obj, "translation", 3, path);
        Eigen::Matrix3d rot;
        rot << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
        const double drift = (rot * rot.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
        if (drift > kRotationRepairTolerance) {
            schema_error(path + ".rotation", "not a rotation (orthonormality drift " + std::to_string(drift) + ")");
        }
        if (drift > 0.0) {
            Eigen::JacobiSVD<Eigen::Matrix3d> svd(rot, Eigen::ComputeFullU | Eigen::ComputeFullV);
            rot = svd.matrixU() * svd.matrixV().transpose();
        }
        if (rot.determinant() < 0.0) schema_error(path + ".rotation", "has negative determinant");
        cam.rotation = rot;
        cam.translation = {t[0], t[1], t[2]};
        if (const auto it = obj.find("image"); it != obj.end() && !it->is_null()) {
            if (!it->is_string()) schema_error(path + ".image", "expected a string path");
            entry.image = base_dir / it->get<std::string>();
        }
        out.push_back(std::move(entry));
    }
    return out;
}

std::vector<CameraEntry> load_cameras(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw DataError("camera JSON: " + path.string() + ": " + e.what());
    }
    return parse_cameras(doc, path.parent_path());
}

nlohmann::json cameras_to_json(std::span<const CameraEntry> cameras) {
    json out = json::array();
    for (const auto& entry : cameras) {
        const Camera& c = entry.camera;
        json obj{{"id", c.id},  {"width", c.width}, {"height", c.height}, {"fx", c.fx},
                 {"fy", c.fy},  {"cx", c.cx},       {"cy", c.cy}};
        json rot = json::array();
        for (int r = 0; r < 3; ++r) {
            for (int k = 0; k < 3; ++k) rot.push_back(c.rotation(r, k));
        }
        obj["rotation"] = rot;
        obj["translation"] = {c.translation.x(), c.translation.y(), c.translation.z()};
        if (entry.image) obj["image"] = entry.image->generic_string();
        out.push_back(obj);
    }
    return out;
}

void save_cameras(std::span<const CameraEntry> cameras, const std::filesystem::path& path) {
    write_text(path, cameras_to_json(cameras).dump(2) + "\n");
}

}  // namespace confsplat::io
