#include "nfx/train/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "nfx/errors.hpp"

namespace nfx {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'N', 'F', 'X', 'C'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const Model& model, const CheckpointInfo& info, const std::string& path) {
    json header;
    header["format_version"] = kVersion;
    header["config"] = json::parse(config_to_json(info.config));
    json table = json::array();
    for (const auto& p : model.params())
        table.push_back({{"name", p.name}, {"shape", p.value.shape}});
    header["params"] = table;
    header["sample_rate"] = model.spec().sample_rate;
    header["condition_names"] = info.condition_names;
    json ranges = json::array();
    for (const auto& [lo, hi] : info.condition_ranges) ranges.push_back({lo, hi});
    header["condition_ranges"] = ranges;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out.write(kMagic, 4);
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t header_len = header_text.size();
    out.write(reinterpret_cast<const char*>(&header_len), 8);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& p : model.params()) {
        for (double v : p.value.data) {
            const float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    if (!out) throw IoError("failed writing checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CorruptPayload(path + ": bad magic");
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (!in || version != kVersion)
        throw VersionMismatch(path + ": version " + std::to_string(version));
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), 8);
    if (!in) throw CorruptPayload(path + ": truncated header length");
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw CorruptPayload(path + ": truncated header");

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw CorruptPayload(path + ": header is not valid JSON: " + e.what());
    }

    LoadedCheckpoint loaded;
    try {
        loaded.info.config = config_from_json(header.at("config").dump());
        loaded.info.condition_names =
            header.at("condition_names").get<std::vector<std::string>>();
        for (const auto& r : header.at("condition_ranges"))
            loaded.info.condition_ranges.emplace_back(r[0].get<double>(), r[1].get<double>());
    } catch (const json::exception& e) {
        throw CorruptPayload(path + ": header fields: " + e.what());
    }

    loaded.model = Model::build(loaded.info.config.model, loaded.info.config.train.seed);

    // verify the parameter table and payload length before restoring
    const json& table = header.at("params");
    if (table.size() != loaded.model.params().size())
        throw CorruptPayload(path + ": parameter table size mismatch");
    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& p = loaded.model.params()[i];
        if (table[i].at("name").get<std::string>() != p.name)
            throw CorruptPayload(path + ": parameter order mismatch at '" + p.name + "'");
        if (table[i].at("shape").get<std::vector<int>>() != p.value.shape)
            throw CorruptPayload(path + ": shape mismatch at '" + p.name + "'");
        expected += p.value.size();
    }
    const auto payload_start = in.tellg();
    in.seekg(0, std::ios::end);
    const std::uint64_t payload_bytes = static_cast<std::uint64_t>(in.tellg() - payload_start);
    if (payload_bytes != expected * 4)
        throw CorruptPayload(path + ": payload is " + std::to_string(payload_bytes) +
                             " bytes, expected " + std::to_string(expected * 4));
    in.seekg(payload_start);
    for (auto& p : loaded.model.params()) {
        for (double& v : p.value.data) {
            float f;
            in.read(reinterpret_cast<char*>(&f), 4);
            v = static_cast<double>(f);
        }
    }
    if (!in) throw CorruptPayload(path + ": truncated payload");
    return loaded;
}

}  // namespace nfx
