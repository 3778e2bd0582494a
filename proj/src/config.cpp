#include "confsplat/io.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <openssl/evp.h>

#include <functional>
#include <map>
#include <sstream>
#include <utility>

namespace confsplat::io {

namespace {

using Setter = std::function<void(const toml::node&, const std::string&)>;
using Section = std::map<std::string, Setter>;

[[noreturn]] void config_error(const std::string& key_path, const std::string& what) {
    throw DataError("config: " + key_path + ": " + what);
}

Setter real(double& dst) {
    return [&dst](const toml::node& n, const std::string& path) {
        const auto v = n.value<double>();
        if (!v || !(n.is_floating_point() || n.is_integer())) config_error(path, "expected a number");
        dst = *v;
    };
}

Setter integer(int& dst) {
    return [&dst](const toml::node& n, const std::string& path) {
        if (!n.is_integer()) config_error(path, "expected an integer");
        dst = static_cast<int>(*n.value<std::int64_t>());
    };
}

Setter unsigned64(std::uint64_t& dst) {
    return [&dst](const toml::node& n, const std::string& path) {
        if (!n.is_integer() || *n.value<std::int64_t>() < 0) config_error(path, "expected a nonnegative integer");
        dst = static_cast<std::uint64_t>(*n.value<std::int64_t>());
    };
}

Setter boolean(bool& dst) {
    return [&dst](const toml::node& n, const std::string& path) {
        if (!n.is_boolean()) config_error(path, "expected true or false");
        dst = *n.value<bool>();
    };
}

Setter text(std::string& dst) {
    return [&dst](const toml::node& n, const std::string& path) {
        if (!n.is_string() || n.value<std::string>()->empty()) config_error(path, "expected a non-empty string");
        dst = *n.value<std::string>();
    };
}

void validate(const AppConfig& c) {
    auto wrap = [](const char* section, auto&& fn) {
        try {
            fn();
        } catch (const ContractError& e) {
            config_error(section, e.what());
        }
    };
    const auto& w = c.train.weights;
    const std::pair<const char*, double> lambdas[] = {
        {"loss.lambda_sparse", w.lambda_sparse},
        {"loss.lambda_entropy", w.lambda_entropy},
        {"loss.lambda_saliency", w.lambda_saliency},
    };
    for (const auto& [key, v] : lambdas) {
        if (!(v >= 0.0)) config_error(key, "must be nonnegative");
    }
    if (!(w.recon_ssim_mix >= 0.0 && w.recon_ssim_mix <= 1.0)) config_error("loss.recon_ssim_mix", "must lie in [0, 1]");
    for (int k = 0; k < 3; ++k) {
        if (!(c.render.background[k] >= 0.0 && c.render.background[k] <= 1.0)) {
            config_error("render.background", "channels must lie in [0, 1]");
        }
    }
    wrap("train", [&] { c.train.validate(); });
    wrap("render", [&] { c.render.validate(); });
}

}  // namespace

AppConfig parse_config(std::string_view text_in) {
    toml::table root;
    try {
        root = toml::parse(text_in);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << e.description() << " (line " << e.source().begin.line << ")";
        throw DataError("config: parse error: " + msg.str());
    }

    AppConfig cfg;
    auto& t = cfg.train;
    auto& r = cfg.render;
    std::string gumbel_mode = t.gumbel.mode == betaconf::GumbelMode::Additive ? "additive" : "multiplicative";

    std::map<std::string, Section> schema;
    schema["train"] = {
        {"iterations", integer(t.iterations)},
        {"lr_confidence", real(t.lr_confidence)},
        {"lr_position", real(t.lr_position)},
        {"lr_scale", real(t.lr_scale)},
        {"lr_rotation", real(t.lr_rotation)},
        {"lr_color", real(t.lr_color)},
        {"lr_opacity", real(t.lr_opacity)},
        {"lr_final_ratio", real(t.lr_final_ratio)},
        {"seed", unsigned64(t.seed)},
        {"snapshot_every", integer(t.snapshot_every)},
        {"cameras_per_step", integer(t.cameras_per_step)},
    };
    schema["loss"] = {
        {"lambda_sparse", real(t.weights.lambda_sparse)},
        {"lambda_entropy", real(t.weights.lambda_entropy)},
        {"lambda_saliency", real(t.weights.lambda_saliency)},
        {"recon_ssim_mix", real(t.weights.recon_ssim_mix)},
    };
    schema["saliency"] = {
        {"pairs_per_step", integer(t.saliency.pairs_per_step)},
        {"quantile", real(t.saliency.quantile)},
        {"ema_decay", real(t.saliency.ema_decay)},
    };
    schema["render"] = {
        {"background",
         [&r](const toml::node& n, const std::string& path) {
             const auto* arr = n.as_array();
             if (arr == nullptr || arr->size() != 3) config_error(path, "expected an array of 3 numbers");
             for (std::size_t k = 0; k < 3; ++k) {
                 const auto v = (*arr)[k].value<double>();
                 if (!v) config_error(path + "[" + std::to_string(k) + "]", "expected a number");
                 r.background[k] = *v;
             }
         }},
        {"alpha_min", real(r.alpha_min)},
        {"alpha_max", real(r.alpha_max)},
        {"transmittance_floor", real(r.transmittance_floor)},
        {"cov_dilation", real(r.cov_dilation)},
        {"near_plane", real(r.near_plane)},
    };
    schema["gumbel"] = {
        {"enabled", boolean(t.gumbel.enabled)},
        {"mode", text(gumbel_mode)},
        {"temperature", real(t.gumbel.temperature)},
    };
    schema["ply"] = {
        {"alpha_property", text(cfg.ply.raw_alpha)},
        {"beta_property", text(cfg.ply.raw_beta)},
        {"confidence_property", text(cfg.ply.confidence)},
    };

    for (auto&& [section_key, section_node] : root) {
        const std::string section(section_key.str());
        const auto it = schema.find(section);
        if (it == schema.end()) config_error(section, "unknown key");
        const auto* table = section_node.as_table();
        if (table == nullptr) config_error(section, "expected a table");
        for (auto&& [key, node] : *table) {
            const std::string path = section + "." + std::string(key.str());
            const auto setter = it->second.find(std::string(key.str()));
            if (setter == it->second.end()) config_error(path, "unknown key");
            setter->second(node, path);
        }
    }

    if (gumbel_mode == "additive") {
        t.gumbel.mode = betaconf::GumbelMode::Additive;
    } else if (gumbel_mode == "multiplicative") {
        t.gumbel.mode = betaconf::GumbelMode::Multiplicative;
    } else {
        config_error("gumbel.mode", "expected 'additive' or 'multiplicative'");
    }
    validate(cfg);
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
    try {
        return parse_config(read_text(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

nlohmann::json config_to_json(const AppConfig& c) {
    const auto& t = c.train;
    const auto& r = c.render;
    nlohmann::json j;
    j["train"] = {{"iterations", t.iterations},         {"lr_confidence", t.lr_confidence},
                  {"lr_position", t.lr_position},       {"lr_scale", t.lr_scale},
                  {"lr_rotation", t.lr_rotation},       {"lr_color", t.lr_color},
                  {"lr_opacity", t.lr_opacity},         {"lr_final_ratio", t.lr_final_ratio},
                  {"seed", t.seed},                     {"snapshot_every", t.snapshot_every},
                  {"cameras_per_step", t.cameras_per_step}};
    j["loss"] = {{"lambda_sparse", t.weights.lambda_sparse},
                 {"lambda_entropy", t.weights.lambda_entropy},
                 {"lambda_saliency", t.weights.lambda_saliency},
                 {"recon_ssim_mix", t.weights.recon_ssim_mix}};
    j["saliency"] = {{"pairs_per_step", t.saliency.pairs_per_step},
                     {"quantile", t.saliency.quantile},
                     {"ema_decay", t.saliency.ema_decay}};
    j["render"] = {{"background", {r.background[0], r.background[1], r.background[2]}},
                   {"alpha_min", r.alpha_min},
                   {"alpha_max", r.alpha_max},
                   {"transmittance_floor", r.transmittance_floor},
                   {"cov_dilation", r.cov_dilation},
                   {"near_plane", r.near_plane}};
    j["gumbel"] = {{"enabled", t.gumbel.enabled},
                   {"mode", t.gumbel.mode == betaconf::GumbelMode::Additive ? "additive" : "multiplicative"},
                   {"temperature", t.gumbel.temperature}};
    j["ply"] = {{"alpha_property", c.ply.raw_alpha},
                {"beta_property", c.ply.raw_beta},
                {"confidence_property", c.ply.confidence}};
    return j;
}

std::string config_hash(const AppConfig& config) { return sha256_hex(config_to_json(config).dump()); }

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

}  // namespace confsplat::io
