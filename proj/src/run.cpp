#include "osm/run.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "osm/errors.hpp"

namespace osm {

namespace fs = std::filesystem;
using nlohmann::json;

TrainOutcome run_training(const RunConfig& config, const Dataset& source,
                          const Dataset& target) {
    config.validate();
    if (source.dim != config.data.dim || target.dim != config.data.dim)
        throw ValidationError("dataset dim does not match config dim");
    TrainOutcome out;
    out.params = make_network(config);
    out.stage1_trace = pretrain_stage1(config.train, out.params, source);
    Stage2Result s2 = train_stage2(config.train, out.params, source, target);
    out.bank = std::move(s2.bank);
    out.has_bank = s2.has_bank;
    out.stage2_trace = std::move(s2.trace);
    return out;
}

json metrics_to_json(const MetricsRecord& rec) {
    json per_class = json::array();
    for (double v : rec.per_class)
        per_class.push_back(std::isnan(v) ? json(nullptr) : json(v));
    return json{{"os", rec.os},           {"os_star", rec.os_star}, {"all", rec.all},
                {"unk", rec.unk},         {"per_class", per_class}, {"confusion", rec.confusion},
                {"epoch", rec.epoch}};
}

namespace {

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << body;
    if (!out) throw IoError("write failed: " + path);
}

void write_manifest(const RunConfig& config, const std::string& command,
                    const std::string& path, json extra = json::object()) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = config_to_json(config);
    manifest["config_hash"] = config_hash_hex(config);
    for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
    write_text(path, manifest.dump(2) + "\n");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_stage1_trace(const std::vector<double>& trace, const std::string& path) {
    std::string body = "epoch,cls_loss\n";
    for (size_t e = 0; e < trace.size(); ++e)
        body += std::to_string(e) + "," + fmt(trace[e]) + "\n";
    write_text(path, body);
}

void write_stage2_trace(const std::vector<EpochRecord>& trace, const std::string& path) {
    std::string body =
        "epoch,lr,loss_cls,loss_adv,loss_cct,loss_cca,loss_con,loss_total,"
        "mean_centroid_dist,os,os_star,all,unk\n";
    for (const auto& r : trace) {
        body += std::to_string(r.epoch) + "," + fmt(r.lr) + "," + fmt(r.cls) + "," + fmt(r.adv) +
                "," + fmt(r.cct) + "," + fmt(r.cca) + "," + fmt(r.con) + "," + fmt(r.total) +
                "," + fmt(r.mean_centroid_dist) + "," + fmt(r.metrics.os) + "," +
                fmt(r.metrics.os_star) + "," + fmt(r.metrics.all) + "," + fmt(r.metrics.unk) +
                "\n";
    }
    write_text(path, body);
}

// One training run with full artifact output under dir.
MetricsRecord train_into(const RunConfig& config, const Dataset& source, const Dataset& target,
                         const std::string& dir) {
    fs::create_directories(dir);
    TrainOutcome outcome = run_training(config, source, target);
    save_checkpoint(dir + "/checkpoint.json", outcome.params,
                    outcome.has_bank ? &outcome.bank : nullptr);
    write_stage1_trace(outcome.stage1_trace, dir + "/stage1_trace.csv");
    write_stage2_trace(outcome.stage2_trace, dir + "/trace.csv");
    dump_embeddings(outcome.params, source, target, dir + "/embeddings.csv");
    MetricsRecord final = outcome.final_metrics();
    write_text(dir + "/metrics.json", metrics_to_json(final).dump(2) + "\n");
    return final;
}

}  // namespace

RunConfig with_seed_offset(const RunConfig& config, int offset) {
    RunConfig c = config;
    c.train.seed = config.train.seed + static_cast<uint64_t>(offset);
    c.data.seed = config.data.seed + static_cast<uint64_t>(offset);
    return c;
}

void cmd_generate(const RunConfig& config, const std::string& out_dir) {
    config.validate();
    fs::create_directories(out_dir);
    auto [source, target] = generate_pair(config.data);
    save_csv(source, out_dir + "/source.csv");
    save_csv(target, out_dir + "/target.csv");
    write_manifest(config, "generate", out_dir + "/manifest.json");
}

void cmd_train(const RunConfig& config, const std::string& out_dir,
               const std::string& data_dir, int n_seeds) {
    config.validate();
    if (n_seeds < 1) throw ValidationError("--seeds must be >= 1");
    fs::create_directories(out_dir);

    Dataset source, target;
    bool from_files = false;
    if (!data_dir.empty()) {
        source = load_csv(data_dir + "/source.csv");
        target = load_csv(data_dir + "/target.csv");
        from_files = true;
    }

    json runs = json::array();
    std::vector<MetricsRecord> finals;
    for (int i = 0; i < n_seeds; ++i) {
        RunConfig run_cfg = with_seed_offset(config, i);
        Dataset src_i = source, tgt_i = target;
        if (!from_files) {
            auto pair = generate_pair(run_cfg.data);
            src_i = std::move(pair.first);
            tgt_i = std::move(pair.second);
        }
        std::string dir = n_seeds == 1 ? out_dir : out_dir + "/seed_" + std::to_string(i);
        MetricsRecord final = train_into(run_cfg, src_i, tgt_i, dir);
        finals.push_back(final);
        json entry = metrics_to_json(final);
        entry["train_seed"] = run_cfg.train.seed;
        entry["data_seed"] = run_cfg.data.seed;
        runs.push_back(std::move(entry));
    }

    if (n_seeds > 1) {
        double os = 0, os_star = 0, all = 0, unk = 0;
        for (const auto& m : finals) {
            os += m.os;
            os_star += m.os_star;
            all += m.all;
            unk += m.unk;
        }
        json agg;
        agg["runs"] = runs;
        agg["mean"] = {{"os", os / n_seeds},
                       {"os_star", os_star / n_seeds},
                       {"all", all / n_seeds},
                       {"unk", unk / n_seeds}};
        write_text(out_dir + "/metrics.json", agg.dump(2) + "\n");
    }
    write_manifest(config, "train", out_dir + "/manifest.json",
                   json{{"seeds", n_seeds}, {"data_dir", data_dir}});
}

MetricsRecord cmd_eval(const std::string& checkpoint_path, const std::string& target_csv,
                       const std::string& out_path) {
    NetworkParams params;
    CentroidBank bank;
    bool has_bank = false;
    load_checkpoint(checkpoint_path, params, &bank, &has_bank);
    Dataset target = load_csv(target_csv);
    if (target.dim != params.encoder.in_dim())
        throw ValidationError("dataset dim " + std::to_string(target.dim) +
                              " does not match checkpoint input width " +
                              std::to_string(params.encoder.in_dim()));
    MetricsRecord rec = evaluate(params, target);
    if (!out_path.empty()) write_text(out_path, metrics_to_json(rec).dump(2) + "\n");
    return rec;
}

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "omega") return SweepAxis::Omega;
    if (name == "static_margin") return SweepAxis::StaticMargin;
    if (name == "unknown_ratio") return SweepAxis::UnknownRatio;
    if (name == "threshold") return SweepAxis::Threshold;
    throw ValidationError("unknown sweep axis '" + name +
                          "' (expected omega|static_margin|unknown_ratio|threshold)");
}

namespace {

const char* axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Omega: return "omega";
        case SweepAxis::StaticMargin: return "static_margin";
        case SweepAxis::UnknownRatio: return "unknown_ratio";
        case SweepAxis::Threshold: return "threshold";
    }
    return "?";
}

RunConfig apply_axis(const RunConfig& base, SweepAxis axis, double value) {
    RunConfig c = base;
    switch (axis) {
        case SweepAxis::Omega: c.train.weights.omega = value; break;
        case SweepAxis::StaticMargin: c.train.static_margin = value; break;
        case SweepAxis::UnknownRatio: c.data.unknown_ratio = value; break;
        case SweepAxis::Threshold: c.train.reliability_threshold = value; break;
    }
    return c;
}

}  // namespace

void cmd_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values,
               int n_seeds, const std::string& out_dir) {
    config.validate();
    if (values.empty()) throw ValidationError("sweep values must not be empty");
    if (n_seeds < 1) throw ValidationError("--seeds must be >= 1");
    fs::create_directories(out_dir);

    std::string body = "axis,value,seed,os,os_star,all,unk\n";
    for (double value : values) {
        for (int i = 0; i < n_seeds; ++i) {
            RunConfig run_cfg = with_seed_offset(apply_axis(config, axis, value), i);
            run_cfg.validate();
            auto [source, target] = generate_pair(run_cfg.data);
            TrainOutcome outcome = run_training(run_cfg, source, target);
            const MetricsRecord& m = outcome.final_metrics();
            body += std::string(axis_name(axis)) + "," + fmt(value) + "," +
                    std::to_string(run_cfg.train.seed) + "," + fmt(m.os) + "," +
                    fmt(m.os_star) + "," + fmt(m.all) + "," + fmt(m.unk) + "\n";
        }
    }
    write_text(out_dir + "/sweep_results.csv", body);
    write_manifest(config, "sweep", out_dir + "/manifest.json",
                   json{{"axis", axis_name(axis)}, {"values", values}, {"seeds", n_seeds}});
}

}  // namespace osm
