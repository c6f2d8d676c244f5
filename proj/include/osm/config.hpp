#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "osm/data.hpp"
#include "osm/model.hpp"
#include "osm/trainer.hpp"

namespace osm {

// Network shape knobs. Width lists left empty are derived from the data
// config: E maps the input dim through one hidden layer to the feature width,
// G is a single activated layer, D maps features to the N+1 logits.
struct ModelConfig {
    std::vector<int> encoder_widths;        // empty -> {dim, 32, 16}
    std::vector<int> generator_widths;      // empty -> {encoder_out, 16}
    std::vector<int> discriminator_widths;  // empty -> {generator_out, 16, n_known + 1}
    double leaky_alpha = 0.01;
    bool encoder_batchnorm = true;
    bool generator_batchnorm = true;
    bool discriminator_batchnorm = false;   // batch stats in D blur the domain gap; off by default
};

// Everything one run needs; the JSON form of this document is the config
// file, the manifest payload and the reproducibility unit.
struct RunConfig {
    SyntheticConfig data;
    ModelConfig model;
    TrainConfig train;
    std::string out_dir = "out";

    void validate() const;
};

// Resolved MLP specs honoring the derivation rules above.
struct ResolvedSpecs {
    MlpSpec encoder, generator, discriminator;
};
ResolvedSpecs resolve_specs(const RunConfig& config);

NetworkParams make_network(const RunConfig& config);

RunConfig default_config();

// Strict parse: unknown keys anywhere are rejected with the offending path.
// A document wrapped as {"config": {...}} (a manifest) is unwrapped first.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);
nlohmann::json config_to_json(const RunConfig& config);

// FNV-1a over the canonical dump; embedded in manifests.
uint64_t config_hash(const RunConfig& config);
std::string config_hash_hex(const RunConfig& config);

}  // namespace osm
