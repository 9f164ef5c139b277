#pragma once

// Network <-> JSON. Doubles are written in shortest round-trip form, so a
// save/load cycle reproduces every weight bit for bit.

#include <fstream>
#include <string>

#include "json.hpp"

#include "flatnet/errors.hpp"
#include "flatnet/net.hpp"

namespace flatnet {

inline constexpr const char* network_format_tag = "flatnet-network";
inline constexpr int network_format_version = 1;

inline nlohmann::json architecture_to_json(const Architecture& a) {
    return {{"input_width", a.input_width},
            {"hidden_widths", a.hidden_widths},
            {"activation", std::string(to_string(a.activation))}};
}

inline Architecture architecture_from_json(const nlohmann::json& j) {
    Architecture a;
    a.input_width = j.at("input_width").get<std::size_t>();
    a.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
    a.activation = parse_activation(j.at("activation").get<std::string>());
    a.validate();
    return a;
}

inline nlohmann::json network_to_json(const Network& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto v = net.layer(l);
        layers.push_back({{"rows", v.rows}, {"cols", v.cols}, {"weights", std::vector<double>(v.data.begin(), v.data.end())}});
    }
    return {{"format", network_format_tag},
            {"version", network_format_version},
            {"architecture", architecture_to_json(net.architecture())},
            {"layers", std::move(layers)}};
}

inline Network network_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != network_format_tag)
            throw InvalidArgument("not a flatnet network document");
        if (j.at("version").get<int>() != network_format_version)
            throw InvalidArgument("unsupported network format version");
        const auto arch = architecture_from_json(j.at("architecture"));
        const auto& layers = j.at("layers");
        if (layers.size() != arch.layer_count()) throw InvalidArgument("layer count does not match architecture");
        std::vector<double> params;
        params.reserve(arch.parameter_count());
        for (std::size_t l = 0; l < arch.layer_count(); ++l) {
            const auto& lj = layers[l];
            if (lj.at("rows").get<std::size_t>() != arch.rows(l) || lj.at("cols").get<std::size_t>() != arch.cols(l))
                throw InvalidArgument("layer " + std::to_string(l + 1) + " shape does not match architecture");
            const auto w = lj.at("weights").get<std::vector<double>>();
            if (w.size() != arch.layer_size(l))
                throw InvalidArgument("layer " + std::to_string(l + 1) + " has the wrong number of weights");
            params.insert(params.end(), w.begin(), w.end());
        }
        return Network(arch, std::move(params));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed network JSON: ") + e.what());
    }
}

inline void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write network file '" + path + "'");
    out << network_to_json(net).dump(1) << '\n';
    if (!out) throw IoError("failed writing network file '" + path + "'");
}

inline Network load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open network file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("cannot parse network file '" + path + "': " + e.what());
    }
    return network_from_json(j);
}

}  // namespace flatnet
