#include "confsplat/io.hpp"

#include "confsplat/betaconf.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace confsplat::io {

namespace {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

constexpr std::string_view kModeComment = "confsplat_mode";
constexpr std::string_view kCanvasComment = "confsplat_canvas";

enum class Format { BinaryLittleEndian, Ascii };

struct Header {
    Format format = Format::BinaryLittleEndian;
    std::size_t vertex_count = 0;
    std::vector<std::string> properties;
    std::vector<int> property_bytes;  // 4 for float, 8 for double
    std::size_t data_offset = 0;
    bool two_d = false;
    int canvas_width = 0;
    int canvas_height = 0;
};

std::vector<std::string> split_words(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

Header parse_header(std::string_view bytes) {
    Header h;
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const std::size_t end = bytes.find('\n', pos);
        if (end == std::string_view::npos) {
            throw DataError("PLY: malformed header (missing end_header) at byte " + std::to_string(pos));
        }
        std::string line(bytes.substr(pos, end - pos));
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next_line() != "ply") throw DataError("PLY: malformed header (missing 'ply' magic) at byte 0");

    bool in_vertex = false;
    bool seen_vertex = false;
    bool seen_format = false;
    for (;;) {
        const std::size_t line_start = pos;
        const auto words = split_words(next_line());
        if (words.empty()) continue;
        const std::string& kw = words[0];
        if (kw == "end_header") break;
        if (kw == "format") {
            if (words.size() < 2) throw DataError("PLY: malformed format line at byte " + std::to_string(line_start));
            if (words[1] == "binary_little_endian") {
                h.format = Format::BinaryLittleEndian;
            } else if (words[1] == "ascii") {
                h.format = Format::Ascii;
            } else {
                throw DataError("PLY: unsupported format '" + words[1] + "' at byte " + std::to_string(line_start));
            }
            seen_format = true;
        } else if (kw == "comment" || kw == "obj_info") {
            if (words.size() >= 3 && words[1] == kModeComment && words[2] == "2d") h.two_d = true;
            if (words.size() >= 4 && words[1] == kCanvasComment) {
                h.canvas_width = std::stoi(words[2]);
                h.canvas_height = std::stoi(words[3]);
            }
        } else if (kw == "element") {
            if (words.size() != 3) throw DataError("PLY: malformed element line at byte " + std::to_string(line_start));
            if (seen_vertex && in_vertex) in_vertex = false;
            if (words[1] == "vertex") {
                if (seen_vertex) throw DataError("PLY: duplicate vertex element");
                seen_vertex = true;
                in_vertex = true;
                h.vertex_count = std::stoull(words[2]);
            } else if (!seen_vertex) {
                throw DataError("PLY: unknown property layout (element '" + words[1] + "' before vertex)");
            }
        } else if (kw == "property") {
            if (!in_vertex) continue;  // trailing elements are ignored
            if (words.size() != 3) {
                throw DataError("PLY: unknown property layout (line at byte " + std::to_string(line_start) + ")");
            }
            int size = 0;
            if (words[1] == "float" || words[1] == "float32") {
                size = 4;
            } else if (words[1] == "double" || words[1] == "float64") {
                size = 8;
            } else {
                throw DataError("PLY: unknown property layout (type '" + words[1] + "' for '" + words[2] + "')");
            }
            h.properties.push_back(words[2]);
            h.property_bytes.push_back(size);
        } else {
            throw DataError("PLY: malformed header line '" + kw + "' at byte " + std::to_string(line_start));
        }
    }
    if (!seen_format) throw DataError("PLY: malformed header (no format line)");
    if (!seen_vertex) throw DataError("PLY: malformed header (no vertex element)");
    h.data_offset = pos;
    return h;
}

// Maps each recognised property to its column; rejects anything else.
struct Layout {
    int x = -1, y = -1, z = -1;
    int dc[3] = {-1, -1, -1};
    std::vector<int> rest;
    int opacity = -1;
    int scale[3] = {-1, -1, -1};
    int rot[4] = {-1, -1, -1, -1};
    int raw_alpha = -1, raw_beta = -1;
    int sh_degree = 0;
};

Layout resolve_layout(const Header& h, const PlyNames& names) {
    Layout l;
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < h.properties.size(); ++i) {
        if (!index.emplace(h.properties[i], static_cast<int>(i)).second) {
            throw DataError("PLY: unknown property layout (duplicate property '" + h.properties[i] + "')");
        }
    }
    auto take = [&](const std::string& name, bool required) {
        const auto it = index.find(name);
        if (it == index.end()) {
            if (required) throw DataError("PLY: unknown property layout (missing '" + name + "')");
            return -1;
        }
        const int col = it->second;
        index.erase(it);
        return col;
    };
    l.x = take("x", true);
    l.y = take("y", true);
    l.z = take("z", true);
    for (const char* nname : {"nx", "ny", "nz"}) take(nname, false);
    for (int c = 0; c < 3; ++c) l.dc[c] = take("f_dc_" + std::to_string(c), true);
    for (int k = 0;; ++k) {
        const int col = take("f_rest_" + std::to_string(k), false);
        if (col < 0) break;
        l.rest.push_back(col);
    }
    switch (l.rest.size()) {
        case 0: l.sh_degree = 0; break;
        case 9: l.sh_degree = 1; break;
        case 24: l.sh_degree = 2; break;
        case 45: l.sh_degree = 3; break;
        default:
            throw DataError("PLY: unknown property layout (" + std::to_string(l.rest.size()) +
                            " f_rest properties; expected 0, 9, 24 or 45)");
    }
    l.opacity = take("opacity", true);
    for (int c = 0; c < 3; ++c) l.scale[c] = take("scale_" + std::to_string(c), true);
    for (int c = 0; c < 4; ++c) l.rot[c] = take("rot_" + std::to_string(c), true);
    l.raw_alpha = take(names.raw_alpha, false);
    l.raw_beta = take(names.raw_beta, false);
    if ((l.raw_alpha < 0) != (l.raw_beta < 0)) {
        throw DataError("PLY: unknown property layout (only one of the confidence properties is present)");
    }
    take(names.confidence, false);  // derived value, recomputed on demand
    if (!index.empty()) {
        throw DataError("PLY: unknown property layout (unexpected property '" + index.begin()->first + "')");
    }
    return l;
}

std::vector<double> read_rows(std::string_view bytes, const Header& h) {
    const std::size_t cols = h.properties.size();
    std::vector<double> values(h.vertex_count * cols);
    if (h.format == Format::BinaryLittleEndian) {
        std::size_t row_bytes = 0;
        for (int b : h.property_bytes) row_bytes += static_cast<std::size_t>(b);
        std::size_t pos = h.data_offset;
        for (std::size_t v = 0; v < h.vertex_count; ++v) {
            if (pos + row_bytes > bytes.size()) {
                throw DataError("PLY: truncated data: vertex " + std::to_string(v) + " missing at byte offset " +
                                std::to_string(pos) + " (file has " + std::to_string(bytes.size()) + " bytes)");
            }
            for (std::size_t c = 0; c < cols; ++c) {
                if (h.property_bytes[c] == 4) {
                    float f;
                    std::memcpy(&f, bytes.data() + pos, 4);
                    values[v * cols + c] = f;
                    pos += 4;
                } else {
                    double d;
                    std::memcpy(&d, bytes.data() + pos, 8);
                    values[v * cols + c] = d;
                    pos += 8;
                }
            }
        }
        return values;
    }
    std::istringstream in{std::string(bytes.substr(h.data_offset))};
    for (std::size_t v = 0; v < h.vertex_count; ++v) {
        for (std::size_t c = 0; c < cols; ++c) {
            double d;
            if (!(in >> d)) {
                throw DataError("PLY: truncated data: vertex " + std::to_string(v) + " missing (ASCII body, value " +
                                std::to_string(c) + ")");
            }
            values[v * cols + c] = h.property_bytes[c] == 4 ? static_cast<double>(static_cast<float>(d)) : d;
        }
    }
    return values;
}

void put_float(std::string& out, double v) {
    const float f = static_cast<float>(v);
    char buf[4];
    std::memcpy(buf, &f, 4);
    out.append(buf, 4);
}

}  // namespace

PlyScene parse_ply(std::string_view bytes, const PlyNames& names) {
    const Header h = parse_header(bytes);
    const Layout l = resolve_layout(h, names);
    const std::vector<double> values = read_rows(bytes, h);
    const std::size_t cols = h.properties.size();

    PlyScene out;
    SplatSet& scene = out.scene;
    scene.mode = h.two_d ? SceneMode::TwoD : SceneMode::ThreeD;
    scene.color_kind = h.two_d ? ColorKind::Rgb : ColorKind::Sh;
    scene.sh_degree = h.two_d ? 0 : l.sh_degree;
    scene.canvas_width = h.canvas_width;
    scene.canvas_height = h.canvas_height;
    if (h.two_d && l.sh_degree != 0) throw DataError("PLY: 2D scenes must not carry higher-order SH");

    const int k_rest = sh_coeff_count(l.sh_degree) - 1;
    scene.splats.resize(h.vertex_count);
    if (l.raw_alpha >= 0) out.field = ConfidenceField{std::vector<double>(h.vertex_count), std::vector<double>(h.vertex_count)};
    for (std::size_t v = 0; v < h.vertex_count; ++v) {
        const double* row = values.data() + v * cols;
        Splat& s = scene.splats[v];
        s.position = {row[l.x], row[l.y], row[l.z]};
        s.log_scale = {row[l.scale[0]], row[l.scale[1]], row[l.scale[2]]};
        s.rotation = {row[l.rot[0]], row[l.rot[1]], row[l.rot[2]], row[l.rot[3]]};
        s.opacity_logit = row[l.opacity];
        if (h.two_d) {
            s.color = {raster::kShC0 * row[l.dc[0]] + 0.5, raster::kShC0 * row[l.dc[1]] + 0.5,
                       raster::kShC0 * row[l.dc[2]] + 0.5};
        } else {
            s.color.assign(static_cast<std::size_t>(3 * (k_rest + 1)), 0.0);
            for (int c = 0; c < 3; ++c) {
                s.color[static_cast<std::size_t>(c)] = row[l.dc[c]];
                // f_rest is channel-major: channel c, coefficient k at c * k_rest + (k - 1).
                for (int k = 1; k <= k_rest; ++k) {
                    s.color[static_cast<std::size_t>(3 * k + c)] = row[l.rest[static_cast<std::size_t>(c * k_rest + k - 1)]];
                }
            }
        }
        if (out.field) {
            out.field->raw_alpha[v] = row[l.raw_alpha];
            out.field->raw_beta[v] = row[l.raw_beta];
        }
    }
    return out;
}

PlyScene load_ply(const std::filesystem::path& path, const PlyNames& names) {
    try {
        return parse_ply(read_text(path), names);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string serialize_ply(const SplatSet& scene, const ConfidenceField* field, const PlySaveOptions& options) {
    if (scene.empty()) throw ContractError("save_ply: refusing to write an empty SplatSet");
    scene.validate();
    if (field) field->validate(scene.size());
    const bool two_d = scene.mode == SceneMode::TwoD;
    const int degree = scene.color_kind == ColorKind::Sh ? scene.sh_degree : 0;
    const int k_rest = sh_coeff_count(degree) - 1;

    std::string out;
    out += "ply\nformat binary_little_endian 1.0\n";
    if (two_d) {
        out += "comment " + std::string(kModeComment) + " 2d\n";
        out += "comment " + std::string(kCanvasComment) + " " + std::to_string(scene.canvas_width) + " " +
               std::to_string(scene.canvas_height) + "\n";
    }
    out += "element vertex " + std::to_string(scene.size()) + "\n";
    for (const char* p : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        out += "property float " + std::string(p) + "\n";
    }
    for (int i = 0; i < 3 * k_rest; ++i) out += "property float f_rest_" + std::to_string(i) + "\n";
    for (const char* p : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        out += "property float " + std::string(p) + "\n";
    }
    if (field) {
        out += "property float " + options.names.raw_alpha + "\n";
        out += "property float " + options.names.raw_beta + "\n";
        if (options.include_convenience_confidence) out += "property float " + options.names.confidence + "\n";
    }
    out += "end_header\n";

    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Splat& s = scene.splats[i];
        for (int c = 0; c < 3; ++c) put_float(out, s.position[c]);
        for (int c = 0; c < 3; ++c) put_float(out, 0.0);
        if (scene.color_kind == ColorKind::Rgb) {
            for (int c = 0; c < 3; ++c) put_float(out, (s.color[static_cast<std::size_t>(c)] - 0.5) / raster::kShC0);
        } else {
            for (int c = 0; c < 3; ++c) put_float(out, s.color[static_cast<std::size_t>(c)]);
            for (int c = 0; c < 3; ++c) {
                for (int k = 1; k <= k_rest; ++k) put_float(out, s.color[static_cast<std::size_t>(3 * k + c)]);
            }
        }
        put_float(out, s.opacity_logit);
        for (int c = 0; c < 3; ++c) put_float(out, s.log_scale[c]);
        for (int c = 0; c < 4; ++c) put_float(out, s.rotation[c]);
        if (field) {
            put_float(out, field->raw_alpha[i]);
            put_float(out, field->raw_beta[i]);
            if (options.include_convenience_confidence) {
                put_float(out, betaconf::confidence(field->raw_alpha[i], field->raw_beta[i]).value);
            }
        }
    }
    return out;
}

void save_ply(const SplatSet& scene, const ConfidenceField* field, const std::filesystem::path& path,
              const PlySaveOptions& options) {
    write_text(path, serialize_ply(scene, field, options));
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace confsplat::io
