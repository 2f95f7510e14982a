#include "nfx/train/config.hpp"

#include <set>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "nfx/errors.hpp"

namespace nfx {

using nlohmann::json;

int TrainConfig::resolved_context_len() const {
    if (data.context_len >= 0) return data.context_len;
    if (is_cnn(model.backbone)) return static_cast<int>(receptive_field(model)) - 1;
    return std::min(256, data.segment_len);
}

int TrainConfig::resolved_hop() const { return data.hop > 0 ? data.hop : data.segment_len; }

namespace {

void ensure_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                 const std::string& path) {
    if (!node.IsMap()) throw SchemaError(path + ": expected a mapping");
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw UnknownKey(path + "." + key);
    }
}

template <typename T>
T get_or(const YAML::Node& node, const char* key, T fallback) {
    if (!node[key]) return fallback;
    return node[key].as<T>();
}

template <typename T>
T get_req(const YAML::Node& node, const char* key, const std::string& path) {
    if (!node[key]) throw SchemaError(path + ": missing required key '" + key + "'");
    return node[key].as<T>();
}

}  // namespace

TrainConfig parse_config(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::Exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    TrainConfig cfg;
    try {
        ensure_keys(root, {"model", "loss", "data", "train", "eval", "out_dir"}, path);

        const YAML::Node model = root["model"];
        if (!model) throw SchemaError(path + ": missing 'model'");
        ensure_keys(model,
                    {"backbone", "conditioning", "n_conds", "channels", "layers", "kernel",
                     "dilation_growth", "hidden_size", "sample_rate", "activation"},
                    "model");
        cfg.model.backbone = backbone_from_string(get_req<std::string>(model, "backbone", "model"));
        cfg.model.conditioning =
            conditioning_from_string(get_or<std::string>(model, "conditioning", "concat"));
        cfg.model.n_conds = get_or(model, "n_conds", 0);
        cfg.model.channels = get_or(model, "channels", 8);
        cfg.model.layers = get_or(model, "layers", 4);
        cfg.model.kernel = get_or(model, "kernel", 3);
        cfg.model.dilation_growth = get_or(model, "dilation_growth", 2);
        cfg.model.hidden_size = get_or(model, "hidden_size", 16);
        cfg.model.sample_rate = get_or(model, "sample_rate", 44100);
        const std::string act = get_or<std::string>(model, "activation", "tanh");
        if (act == "tanh")
            cfg.model.cnn_activation = nn::Act::tanh;
        else if (act == "prelu")
            cfg.model.cnn_activation = nn::Act::prelu;
        else
            throw SchemaError("model.activation: '" + act + "' (want tanh or prelu)");

        if (const YAML::Node loss = root["loss"]) {
            ensure_keys(loss, {"terms", "pre_emphasis", "mrstft_resolutions", "stft_complex"},
                        "loss");
            cfg.loss.terms.clear();
            if (const YAML::Node terms = loss["terms"]) {
                for (std::size_t i = 0; i < terms.size(); ++i) {
                    ensure_keys(terms[i], {"kind", "weight"},
                                "loss.terms[" + std::to_string(i) + "]");
                    LossSpec::Term t;
                    t.kind = loss_kind_from_string(
                        get_req<std::string>(terms[i], "kind", "loss.terms"));
                    t.weight = get_or(terms[i], "weight", 1.0);
                    cfg.loss.terms.push_back(t);
                }
            }
            if (cfg.loss.terms.empty()) cfg.loss.terms.push_back({LossKind::esr, 1.0});
            if (const YAML::Node pre = loss["pre_emphasis"]) {
                ensure_keys(pre, {"kind", "hp_coeff", "lp_coeff"}, "loss.pre_emphasis");
                const std::string kind = get_or<std::string>(pre, "kind", "none");
                if (kind == "none")
                    cfg.loss.pre_emphasis = PreEmphasisKind::none;
                else if (kind == "highpass")
                    cfg.loss.pre_emphasis = PreEmphasisKind::highpass;
                else if (kind == "lowpassed_highpass")
                    cfg.loss.pre_emphasis = PreEmphasisKind::lowpassed_highpass;
                else
                    throw SchemaError("loss.pre_emphasis.kind: '" + kind + "'");
                cfg.loss.hp_coeff = get_or(pre, "hp_coeff", 0.85);
                cfg.loss.lp_coeff = get_or(pre, "lp_coeff", 0.85);
            }
            if (const YAML::Node res = loss["mrstft_resolutions"]) {
                cfg.loss.mrstft_resolutions.clear();
                for (const auto& r : res) {
                    if (!r.IsSequence() || r.size() != 2)
                        throw SchemaError("loss.mrstft_resolutions: entries are [fft, hop]");
                    cfg.loss.mrstft_resolutions.emplace_back(r[0].as<int>(), r[1].as<int>());
                }
            }
            if (const YAML::Node sc = loss["stft_complex"]) {
                ensure_keys(sc, {"fft_size", "hop"}, "loss.stft_complex");
                cfg.loss.stft_complex_fft = get_or(sc, "fft_size", 1024);
                cfg.loss.stft_complex_hop = get_or(sc, "hop", 256);
            }
        } else {
            cfg.loss.terms = {{LossKind::esr, 1.0}};
        }

        const YAML::Node data = root["data"];
        if (!data) throw SchemaError(path + ": missing 'data'");
        ensure_keys(data, {"manifest", "segment_len", "context_len", "hop"}, "data");
        cfg.data.manifest = get_req<std::string>(data, "manifest", "data");
        cfg.data.segment_len = get_or(data, "segment_len", 4096);
        cfg.data.context_len = get_or(data, "context_len", -1);
        cfg.data.hop = get_or(data, "hop", -1);

        if (const YAML::Node train = root["train"]) {
            ensure_keys(train,
                        {"lr", "batch_size", "max_steps", "valid_every", "valid_segments",
                         "seed", "tbptt_len", "grad_clip_norm", "lr_decay_every",
                         "lr_decay_factor"},
                        "train");
            cfg.train.lr = get_or(train, "lr", 0.005);
            cfg.train.batch_size = get_or(train, "batch_size", 16);
            cfg.train.max_steps = get_or(train, "max_steps", 2000);
            cfg.train.valid_every = get_or(train, "valid_every", 100);
            cfg.train.valid_segments = get_or(train, "valid_segments", 64);
            cfg.train.seed = get_or<std::uint64_t>(train, "seed", 42);
            cfg.train.tbptt_len = get_or(train, "tbptt_len", 1024);
            cfg.train.grad_clip_norm = get_or(train, "grad_clip_norm", 0.0);
            cfg.train.lr_decay_every = get_or(train, "lr_decay_every", 0);
            cfg.train.lr_decay_factor = get_or(train, "lr_decay_factor", 1.0);
        }
        if (const YAML::Node eval = root["eval"]) {
            ensure_keys(eval, {"metrics"}, "eval");
            if (const YAML::Node metrics = eval["metrics"]) {
                cfg.eval_metrics.clear();
                for (const auto& mname : metrics) cfg.eval_metrics.push_back(mname.as<std::string>());
            }
        }
        cfg.out_dir = get_or<std::string>(root, "out_dir", "runs/run");
    } catch (const YAML::Exception& e) {
        throw SchemaError(path + ": " + e.what());
    }

    validate_spec(cfg.model);
    cfg.loss.validate();
    if (cfg.data.segment_len < 1) throw SchemaError("data.segment_len must be >= 1");
    if (!is_cnn(cfg.model.backbone) && cfg.train.tbptt_len < 1)
        throw SchemaError("train.tbptt_len must be >= 1 for the RNN family");
    if (cfg.train.batch_size < 1) throw SchemaError("train.batch_size must be >= 1");
    if (cfg.train.max_steps < 0) throw SchemaError("train.max_steps must be >= 0");
    if (cfg.train.valid_every < 1) throw SchemaError("train.valid_every must be >= 1");
    return cfg;
}

namespace {

json config_json(const TrainConfig& c) {
    json doc;
    doc["model"] = {{"backbone", backbone_to_string(c.model.backbone)},
                    {"conditioning", conditioning_to_string(c.model.conditioning)},
                    {"n_conds", c.model.n_conds},
                    {"channels", c.model.channels},
                    {"layers", c.model.layers},
                    {"kernel", c.model.kernel},
                    {"dilation_growth", c.model.dilation_growth},
                    {"hidden_size", c.model.hidden_size},
                    {"sample_rate", c.model.sample_rate},
                    {"activation", c.model.cnn_activation == nn::Act::prelu ? "prelu" : "tanh"}};
    json terms = json::array();
    for (const auto& t : c.loss.terms)
        terms.push_back({{"kind", loss_kind_to_string(t.kind)}, {"weight", t.weight}});
    json resolutions = json::array();
    for (const auto& [f, h] : c.loss.mrstft_resolutions) resolutions.push_back({f, h});
    const char* pre = c.loss.pre_emphasis == PreEmphasisKind::none
                          ? "none"
                          : (c.loss.pre_emphasis == PreEmphasisKind::highpass
                                 ? "highpass"
                                 : "lowpassed_highpass");
    doc["loss"] = {{"terms", terms},
                   {"pre_emphasis",
                    {{"kind", pre}, {"hp_coeff", c.loss.hp_coeff}, {"lp_coeff", c.loss.lp_coeff}}},
                   {"mrstft_resolutions", resolutions},
                   {"stft_complex",
                    {{"fft_size", c.loss.stft_complex_fft}, {"hop", c.loss.stft_complex_hop}}}};
    doc["data"] = {{"manifest", c.data.manifest},
                   {"segment_len", c.data.segment_len},
                   {"context_len", c.data.context_len},
                   {"hop", c.data.hop}};
    doc["train"] = {{"lr", c.train.lr},
                    {"batch_size", c.train.batch_size},
                    {"max_steps", c.train.max_steps},
                    {"valid_every", c.train.valid_every},
                    {"valid_segments", c.train.valid_segments},
                    {"seed", c.train.seed},
                    {"tbptt_len", c.train.tbptt_len},
                    {"grad_clip_norm", c.train.grad_clip_norm},
                    {"lr_decay_every", c.train.lr_decay_every},
                    {"lr_decay_factor", c.train.lr_decay_factor}};
    doc["eval"] = {{"metrics", c.eval_metrics}};
    doc["out_dir"] = c.out_dir;
    return doc;
}

}  // namespace

std::string config_to_json(const TrainConfig& config) { return config_json(config).dump(2); }

TrainConfig config_from_json(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config echo: ") + e.what());
    }
    TrainConfig c;
    try {
        const json& m = doc.at("model");
        c.model.backbone = backbone_from_string(m.at("backbone").get<std::string>());
        c.model.conditioning = conditioning_from_string(m.at("conditioning").get<std::string>());
        c.model.n_conds = m.at("n_conds").get<int>();
        c.model.channels = m.at("channels").get<int>();
        c.model.layers = m.at("layers").get<int>();
        c.model.kernel = m.at("kernel").get<int>();
        c.model.dilation_growth = m.at("dilation_growth").get<int>();
        c.model.hidden_size = m.at("hidden_size").get<int>();
        c.model.sample_rate = m.at("sample_rate").get<int>();
        c.model.cnn_activation =
            m.at("activation").get<std::string>() == "prelu" ? nn::Act::prelu : nn::Act::tanh;

        const json& l = doc.at("loss");
        c.loss.terms.clear();
        for (const auto& t : l.at("terms"))
            c.loss.terms.push_back({loss_kind_from_string(t.at("kind").get<std::string>()),
                                    t.at("weight").get<double>()});
        const std::string pre = l.at("pre_emphasis").at("kind").get<std::string>();
        c.loss.pre_emphasis = pre == "none" ? PreEmphasisKind::none
                              : pre == "highpass" ? PreEmphasisKind::highpass
                                                  : PreEmphasisKind::lowpassed_highpass;
        c.loss.hp_coeff = l.at("pre_emphasis").at("hp_coeff").get<double>();
        c.loss.lp_coeff = l.at("pre_emphasis").at("lp_coeff").get<double>();
        c.loss.mrstft_resolutions.clear();
        for (const auto& r : l.at("mrstft_resolutions"))
            c.loss.mrstft_resolutions.emplace_back(r[0].get<int>(), r[1].get<int>());
        c.loss.stft_complex_fft = l.at("stft_complex").at("fft_size").get<int>();
        c.loss.stft_complex_hop = l.at("stft_complex").at("hop").get<int>();

        const json& d = doc.at("data");
        c.data.manifest = d.at("manifest").get<std::string>();
        c.data.segment_len = d.at("segment_len").get<int>();
        c.data.context_len = d.at("context_len").get<int>();
        c.data.hop = d.at("hop").get<int>();

        const json& t = doc.at("train");
        c.train.lr = t.at("lr").get<double>();
        c.train.batch_size = t.at("batch_size").get<int>();
        c.train.max_steps = t.at("max_steps").get<int>();
        c.train.valid_every = t.at("valid_every").get<int>();
        c.train.valid_segments = t.at("valid_segments").get<int>();
        c.train.seed = t.at("seed").get<std::uint64_t>();
        c.train.tbptt_len = t.at("tbptt_len").get<int>();
        c.train.grad_clip_norm = t.at("grad_clip_norm").get<double>();
        c.train.lr_decay_every = t.at("lr_decay_every").get<int>();
        c.train.lr_decay_factor = t.at("lr_decay_factor").get<double>();

        c.eval_metrics = doc.at("eval").at("metrics").get<std::vector<std::string>>();
        c.out_dir = doc.at("out_dir").get<std::string>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config echo: ") + e.what());
    }
    return c;
}

}  // namespace nfx
