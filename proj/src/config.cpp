#include "osm/config.hpp"

#include <cstdio>
#include <fstream>

#include "osm/errors.hpp"
#include "osm/rng.hpp"

namespace osm {

using nlohmann::json;

void RunConfig::validate() const {
    data.validate();
    train.validate();
    if (model.leaky_alpha < 0.0) throw ValidationError("leaky_alpha must be nonnegative");
    resolve_specs(*this);  // width consistency
    if (out_dir.empty()) throw ValidationError("out_dir must not be empty");
}

ResolvedSpecs resolve_specs(const RunConfig& config) {
    ResolvedSpecs specs;
    const int d = config.data.dim;
    const int N = config.data.n_known;

    std::vector<int> e = config.model.encoder_widths;
    if (e.empty()) e = {d, 32, 16};
    if (e.front() != d)
        throw ValidationError("encoder input width " + std::to_string(e.front()) +
                              " must equal data dim " + std::to_string(d));
    std::vector<int> gw = config.model.generator_widths;
    if (gw.empty()) gw = {e.back(), 16};
    if (gw.front() != e.back())
        throw ValidationError("generator input width must equal encoder output width");
    std::vector<int> dw = config.model.discriminator_widths;
    if (dw.empty()) dw = {gw.back(), 16, N + 1};
    if (dw.front() != gw.back())
        throw ValidationError("discriminator input width must equal generator output width");
    if (dw.back() != N + 1)
        throw ValidationError("discriminator output width must be n_known+1 = " +
                              std::to_string(N + 1) + ", got " + std::to_string(dw.back()));

    specs.encoder.widths = e;
    specs.encoder.batchnorm.assign(specs.encoder.n_layers(), config.model.encoder_batchnorm);
    specs.encoder.leaky_alpha = config.model.leaky_alpha;
    specs.encoder.activate_output = false;

    // One FC followed by LeakyReLU and batch norm.
    specs.generator.widths = gw;
    specs.generator.batchnorm.assign(specs.generator.n_layers(),
                                     config.model.generator_batchnorm);
    specs.generator.leaky_alpha = config.model.leaky_alpha;
    specs.generator.activate_output = true;

    specs.discriminator.widths = dw;
    specs.discriminator.batchnorm.assign(specs.discriminator.n_layers(),
                                         config.model.discriminator_batchnorm);
    specs.discriminator.leaky_alpha = config.model.leaky_alpha;
    specs.discriminator.activate_output = false;

    specs.encoder.validate();
    specs.generator.validate();
    specs.discriminator.validate();
    return specs;
}

NetworkParams make_network(const RunConfig& config) {
    ResolvedSpecs specs = resolve_specs(config);
    return init_params(specs.encoder, specs.generator, specs.discriminator, config.data.n_known,
                       splitmix64(config.train.seed ^ 0x494E4954ull));
}

RunConfig default_config() { return RunConfig{}; }

namespace {

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const auto& k : allowed) known = known || it.key() == k;
        if (!known)
            throw ValidationError("unknown config key '" + where + it.key() + "'");
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("bad value for config key '" + where + key + "'");
    }
}

void read_optional(const json& j, const char* key, std::optional<double>& out,
                   const std::string& where) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
        return;
    }
    try {
        out = j.at(key).get<double>();
    } catch (const json::exception&) {
        throw ValidationError("bad value for config key '" + where + key + "'");
    }
}

}  // namespace

RunConfig config_from_json(const json& root) {
    const json* doc = &root;
    if (root.is_object() && root.contains("config") && root.at("config").is_object())
        doc = &root.at("config");  // manifest wrapper
    const json& j = *doc;
    if (!j.is_object()) throw ValidationError("config must be a JSON object");

    reject_unknown_keys(j, {"data", "model", "loss", "train", "out_dir"}, "");
    RunConfig cfg;

    if (j.contains("data")) {
        const json& d = j.at("data");
        reject_unknown_keys(d,
                            {"n_known", "n_unknown_subclasses", "dim", "samples_per_class",
                             "shift_rotation", "shift_translation", "noise_sigma",
                             "unknown_ratio", "class_separation", "guard_radius_sigmas", "seed"},
                            "data.");
        read_field(d, "n_known", cfg.data.n_known, "data.");
        read_field(d, "n_unknown_subclasses", cfg.data.n_unknown_subclasses, "data.");
        read_field(d, "dim", cfg.data.dim, "data.");
        read_field(d, "samples_per_class", cfg.data.samples_per_class, "data.");
        read_field(d, "shift_rotation", cfg.data.shift_rotation, "data.");
        read_field(d, "shift_translation", cfg.data.shift_translation, "data.");
        read_field(d, "noise_sigma", cfg.data.noise_sigma, "data.");
        read_field(d, "unknown_ratio", cfg.data.unknown_ratio, "data.");
        read_field(d, "class_separation", cfg.data.class_separation, "data.");
        read_field(d, "guard_radius_sigmas", cfg.data.guard_radius_sigmas, "data.");
        read_field(d, "seed", cfg.data.seed, "data.");
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown_keys(m,
                            {"encoder_widths", "generator_widths", "discriminator_widths",
                             "leaky_alpha", "encoder_batchnorm", "generator_batchnorm",
                             "discriminator_batchnorm"},
                            "model.");
        read_field(m, "encoder_widths", cfg.model.encoder_widths, "model.");
        read_field(m, "generator_widths", cfg.model.generator_widths, "model.");
        read_field(m, "discriminator_widths", cfg.model.discriminator_widths, "model.");
        read_field(m, "leaky_alpha", cfg.model.leaky_alpha, "model.");
        read_field(m, "encoder_batchnorm", cfg.model.encoder_batchnorm, "model.");
        read_field(m, "generator_batchnorm", cfg.model.generator_batchnorm, "model.");
        read_field(m, "discriminator_batchnorm", cfg.model.discriminator_batchnorm, "model.");
    }
    if (j.contains("loss")) {
        const json& l = j.at("loss");
        reject_unknown_keys(l,
                            {"lambda_s", "lambda_c", "lambda_t", "omega", "delta", "adv_lambda",
                             "literal_dist"},
                            "loss.");
        read_field(l, "lambda_s", cfg.train.weights.lambda_s, "loss.");
        read_field(l, "lambda_c", cfg.train.weights.lambda_c, "loss.");
        read_field(l, "lambda_t", cfg.train.weights.lambda_t, "loss.");
        read_field(l, "omega", cfg.train.weights.omega, "loss.");
        read_field(l, "delta", cfg.train.weights.delta, "loss.");
        read_field(l, "adv_lambda", cfg.train.weights.adv_lambda, "loss.");
        read_field(l, "literal_dist", cfg.train.weights.literal_dist, "loss.");
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown_keys(t,
                            {"lr_init", "weight_decay", "batch_size", "epochs_stage1",
                             "epochs_stage2", "reliability_threshold", "freeze_encoder", "seed",
                             "disable_sca", "disable_scm", "static_margin"},
                            "train.");
        read_field(t, "lr_init", cfg.train.lr_init, "train.");
        read_field(t, "weight_decay", cfg.train.weight_decay, "train.");
        read_field(t, "batch_size", cfg.train.batch_size, "train.");
        read_field(t, "epochs_stage1", cfg.train.epochs_stage1, "train.");
        read_field(t, "epochs_stage2", cfg.train.epochs_stage2, "train.");
        read_optional(t, "reliability_threshold", cfg.train.reliability_threshold, "train.");
        read_field(t, "freeze_encoder", cfg.train.freeze_encoder, "train.");
        read_field(t, "seed", cfg.train.seed, "train.");
        read_field(t, "disable_sca", cfg.train.disable_sca, "train.");
        read_field(t, "disable_scm", cfg.train.disable_scm, "train.");
        read_optional(t, "static_margin", cfg.train.static_margin, "train.");
    }
    read_field(j, "out_dir", cfg.out_dir, "");
    cfg.validate();
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["data"] = {{"n_known", cfg.data.n_known},
                 {"n_unknown_subclasses", cfg.data.n_unknown_subclasses},
                 {"dim", cfg.data.dim},
                 {"samples_per_class", cfg.data.samples_per_class},
                 {"shift_rotation", cfg.data.shift_rotation},
                 {"shift_translation", cfg.data.shift_translation},
                 {"noise_sigma", cfg.data.noise_sigma},
                 {"unknown_ratio", cfg.data.unknown_ratio},
                 {"class_separation", cfg.data.class_separation},
                 {"guard_radius_sigmas", cfg.data.guard_radius_sigmas},
                 {"seed", cfg.data.seed}};
    j["model"] = {{"encoder_widths", cfg.model.encoder_widths},
                  {"generator_widths", cfg.model.generator_widths},
                  {"discriminator_widths", cfg.model.discriminator_widths},
                  {"leaky_alpha", cfg.model.leaky_alpha},
                  {"encoder_batchnorm", cfg.model.encoder_batchnorm},
                  {"generator_batchnorm", cfg.model.generator_batchnorm},
                  {"discriminator_batchnorm", cfg.model.discriminator_batchnorm}};
    j["loss"] = {{"lambda_s", cfg.train.weights.lambda_s},
                 {"lambda_c", cfg.train.weights.lambda_c},
                 {"lambda_t", cfg.train.weights.lambda_t},
                 {"omega", cfg.train.weights.omega},
                 {"delta", cfg.train.weights.delta},
                 {"adv_lambda", cfg.train.weights.adv_lambda},
                 {"literal_dist", cfg.train.weights.literal_dist}};
    j["train"] = {{"lr_init", cfg.train.lr_init},
                  {"weight_decay", cfg.train.weight_decay},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs_stage1", cfg.train.epochs_stage1},
                  {"epochs_stage2", cfg.train.epochs_stage2},
                  {"reliability_threshold", cfg.train.reliability_threshold
                                                ? json(*cfg.train.reliability_threshold)
                                                : json(nullptr)},
                  {"freeze_encoder", cfg.train.freeze_encoder},
                  {"seed", cfg.train.seed},
                  {"disable_sca", cfg.train.disable_sca},
                  {"disable_scm", cfg.train.disable_scm},
                  {"static_margin", cfg.train.static_margin ? json(*cfg.train.static_margin)
                                                            : json(nullptr)}};
    j["out_dir"] = cfg.out_dir;
    return j;
}

uint64_t config_hash(const RunConfig& cfg) {
    std::string dump = config_to_json(cfg).dump();
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_hash_hex(const RunConfig& cfg) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    return buf;
}

}  // namespace osm
