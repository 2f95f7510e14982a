#include "nfx/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "nfx/errors.hpp"
#include "nfx/wav.hpp"

namespace nfx {

namespace fs = std::filesystem;
using nlohmann::json;

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "valid") return Split::valid;
    if (s == "test") return Split::test;
    throw SchemaError("unknown split '" + s + "'");
}

std::string split_to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "train";
}

std::string DatasetManifest::resolve(const std::string& path) const {
    fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / p).string();
}

namespace {

json require(const json& obj, const char* key, const std::string& ctx) {
    if (!obj.contains(key)) throw SchemaError(ctx + ": missing key '" + key + "'");
    return obj.at(key);
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }

    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();
    try {
        m.sample_rate = require(doc, "sample_rate", path).get<int>();
        for (const auto& name : require(doc, "condition_names", path))
            m.condition_names.push_back(name.get<std::string>());
        for (const auto& range : require(doc, "condition_ranges", path)) {
            if (!range.is_array() || range.size() != 2)
                throw SchemaError(path + ": condition_ranges entries must be [min, max]");
            m.condition_ranges.emplace_back(range[0].get<double>(), range[1].get<double>());
        }
        for (const auto& e : require(doc, "entries", path)) {
            DatasetManifest::Entry entry;
            entry.input_path = require(e, "input", path).get<std::string>();
            entry.target_path = require(e, "target", path).get<std::string>();
            for (const auto& v : require(e, "condition", path))
                entry.condition_raw.push_back(v.get<double>());
            entry.split = split_from_string(require(e, "split", path).get<std::string>());
            m.entries.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }

    if (m.sample_rate <= 0) throw SchemaError(path + ": sample_rate must be positive");
    if (m.condition_ranges.size() != m.condition_names.size())
        throw SchemaError(path + ": condition_ranges and condition_names length mismatch");
    for (std::size_t i = 0; i < m.condition_ranges.size(); ++i) {
        if (m.condition_ranges[i].first > m.condition_ranges[i].second)
            throw SchemaError(path + ": condition range " + std::to_string(i) + " has min > max");
        if (m.condition_ranges[i].first == m.condition_ranges[i].second) {
            // a fixed knob must actually be fixed across entries
            for (const auto& e : m.entries) {
                if (i < e.condition_raw.size() && e.condition_raw[i] != m.condition_ranges[i].first)
                    throw SchemaError(path + ": condition " + std::to_string(i) +
                                      " varies but has a degenerate range");
            }
        }
    }

    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto& e = m.entries[i];
        const std::string ctx = path + ": entry " + std::to_string(i);
        if (e.condition_raw.size() != m.condition_names.size())
            throw SchemaError(ctx + ": condition length " + std::to_string(e.condition_raw.size()) +
                              " != " + std::to_string(m.condition_names.size()));
        const auto [in_sr, in_len] = wav_info(m.resolve(e.input_path));
        const auto [tg_sr, tg_len] = wav_info(m.resolve(e.target_path));
        if (in_sr != m.sample_rate || tg_sr != m.sample_rate)
            throw SampleRateMismatch(ctx + ": file rate " + std::to_string(in_sr != m.sample_rate ? in_sr : tg_sr) +
                                     " != manifest rate " + std::to_string(m.sample_rate));
        if (in_len != tg_len)
            throw LengthMismatch(ctx + ": input " + std::to_string(in_len) + " samples, target " +
                                 std::to_string(tg_len));
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    json doc;
    doc["sample_rate"] = m.sample_rate;
    doc["condition_names"] = m.condition_names;
    json ranges = json::array();
    for (const auto& [lo, hi] : m.condition_ranges) ranges.push_back({lo, hi});
    doc["condition_ranges"] = ranges;
    json entries = json::array();
    for (const auto& e : m.entries) {
        entries.push_back({{"input", e.input_path},
                           {"target", e.target_path},
                           {"condition", e.condition_raw},
                           {"split", split_to_string(e.split)}});
    }
    doc["entries"] = entries;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path);
    out << doc.dump(2) << "\n";
}

ConditionVector normalize_condition(const DatasetManifest& m, const std::vector<double>& raw) {
    if (raw.size() != m.condition_names.size())
        throw ConditionDimMismatch("got " + std::to_string(raw.size()) + " values, manifest has " +
                                   std::to_string(m.condition_names.size()));
    ConditionVector cond;
    cond.values.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto [lo, hi] = m.condition_ranges[i];
        if (raw[i] < lo - 1e-9 || raw[i] > hi + 1e-9)
            throw OutOfRange("condition '" + m.condition_names[i] + "' = " + std::to_string(raw[i]) +
                             " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        if (lo == hi) {
            cond.values[i] = 0.0;
        } else {
            double v = -1.0 + 2.0 * (raw[i] - lo) / (hi - lo);
            if (v < -1.0) v = -1.0;
            if (v > 1.0) v = 1.0;
            cond.values[i] = v;
        }
    }
    return cond;
}

SegmentationResult segment_dataset(const DatasetManifest& m, Split split,
                                   std::size_t segment_len, std::size_t context_len,
                                   std::size_t hop) {
    if (segment_len < 1) throw Error("segment_dataset: segment_len must be >= 1");
    if (hop < 1) throw Error("segment_dataset: hop must be >= 1");

    bool any = false;
    for (const auto& e : m.entries) any = any || e.split == split;
    if (!any) throw EmptySplit("no entries with split " + split_to_string(split));

    SegmentationResult result;
    for (std::size_t ei = 0; ei < m.entries.size(); ++ei) {
        const auto& e = m.entries[ei];
        if (e.split != split) continue;
        const AudioBuffer input = read_wav(m.resolve(e.input_path));
        const AudioBuffer target = read_wav(m.resolve(e.target_path));
        if (input.size() < segment_len) {
            ++result.skipped_entries;
            continue;
        }
        const ConditionVector cond = normalize_condition(m, e.condition_raw);
        for (std::size_t start = 0; start + segment_len <= input.size(); start += hop) {
            Segment seg;
            seg.source_entry = ei;
            seg.condition = cond;
            seg.target.sample_rate = m.sample_rate;
            seg.target.samples.assign(target.samples.begin() + start,
                                      target.samples.begin() + start + segment_len);
            seg.input.sample_rate = m.sample_rate;
            seg.input.samples.resize(context_len + segment_len, 0.0);
            // context before sample 0 stays zero
            const std::size_t ctx_have = std::min(context_len, start);
            const std::size_t src = start - ctx_have;
            for (std::size_t i = 0; i < ctx_have + segment_len; ++i)
                seg.input.samples[context_len - ctx_have + i] = input.samples[src + i];
            result.segments.push_back(std::move(seg));
        }
    }
    return result;
}

}  // namespace nfx
