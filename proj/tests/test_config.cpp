#include <doctest.h>

#include "osm/config.hpp"
#include "osm/errors.hpp"

using namespace osm;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("defaults round trip through json") {
    RunConfig def = default_config();
    json j = config_to_json(def);
    RunConfig back = config_from_json(j);
    CHECK(config_to_json(back).dump() == j.dump());
    CHECK(config_hash(back) == config_hash(def));
}

TEST_CASE("unknown keys are rejected with their path") {
    json j = config_to_json(default_config());
    j["data"]["typo_field"] = 1;
    try {
        config_from_json(j);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("data.typo_field") != std::string::npos);
    }

    json top = config_to_json(default_config());
    top["banana"] = true;
    CHECK_THROWS_AS(config_from_json(top), ValidationError);
}

TEST_CASE("manifest wrapper is unwrapped") {
    RunConfig def = default_config();
    json manifest;
    manifest["command"] = "generate";
    manifest["config"] = config_to_json(def);
    manifest["config_hash"] = config_hash_hex(def);
    RunConfig back = config_from_json(manifest);
    CHECK(config_to_json(back).dump() == config_to_json(def).dump());
}

TEST_CASE("validation failures name the offending field") {
    json j = config_to_json(default_config());
    j["data"]["unknown_ratio"] = 1.5;
    try {
        config_from_json(j);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("unknown_ratio") != std::string::npos);
    }

    json j2 = config_to_json(default_config());
    j2["train"]["batch_size"] = 1;
    CHECK_THROWS_AS(config_from_json(j2), ValidationError);

    json j3 = config_to_json(default_config());
    j3["model"]["discriminator_widths"] = {16, 3};  // n_known+1 is 5 by default
    CHECK_THROWS_AS(config_from_json(j3), ValidationError);
}

TEST_CASE("nulls resolve to the documented defaults") {
    RunConfig def = default_config();
    CHECK(!def.train.reliability_threshold.has_value());
    CHECK(def.train.resolved_threshold(4) == doctest::Approx(1.0 / 5.0));
    CHECK(!def.train.static_margin.has_value());

    json j = config_to_json(def);
    CHECK(j["train"]["reliability_threshold"].is_null());
    j["train"]["reliability_threshold"] = 0.6;
    RunConfig back = config_from_json(j);
    CHECK(back.train.resolved_threshold(4) == 0.6);
}

TEST_CASE("hash is sensitive to any field change") {
    RunConfig a = default_config();
    RunConfig b = a;
    b.train.seed += 1;
    CHECK(config_hash(a) != config_hash(b));
    RunConfig c = a;
    c.data.noise_sigma += 1e-9;
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("resolved specs derive widths from the data config") {
    RunConfig cfg = default_config();
    ResolvedSpecs specs = resolve_specs(cfg);
    CHECK(specs.encoder.widths.front() == cfg.data.dim);
    CHECK(specs.generator.widths.front() == specs.encoder.widths.back());
    CHECK(specs.discriminator.widths.back() == cfg.data.n_known + 1);
    CHECK(specs.generator.activate_output);       // one FC + LeakyReLU + BN
    CHECK(!specs.discriminator.activate_output);  // plain logits
}

}  // TEST_SUITE
