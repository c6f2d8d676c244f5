#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "osm/errors.hpp"
#include "osm/run.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    bool has_seed = false;
    uint64_t seed = 0;
};

osm::RunConfig resolve_config(const CommonOpts& opts) {
    osm::RunConfig cfg =
        opts.config_path.empty() ? osm::default_config() : osm::load_config_file(opts.config_path);
    if (opts.has_seed) {
        cfg.train.seed = opts.seed;
        cfg.data.seed = opts.seed;
    }
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    return cfg;
}

void apply_ablation(osm::RunConfig& cfg, const std::string& ablate) {
    if (ablate.empty()) return;
    if (ablate == "no-sca") {
        cfg.train.disable_sca = true;
    } else if (ablate == "no-scm") {
        cfg.train.disable_scm = true;
    } else if (ablate == "ada-only") {
        cfg.train.disable_sca = true;
        cfg.train.disable_scm = true;
    } else {
        throw osm::ValidationError("--ablate must be one of no-sca, no-scm, ada-only");
    }
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> values;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        size_t pos = 0;
        double v = std::stod(cur, &pos);
        if (pos != cur.size()) throw osm::ValidationError("bad sweep value '" + cur + "'");
        values.push_back(v);
        cur.clear();
    };
    for (char c : csv) {
        if (c == ',')
            flush();
        else if (!isspace(static_cast<unsigned char>(c)))
            cur.push_back(c);
    }
    flush();
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-set domain adaptation trainer (adversarial alignment + semantic "
                 "categorical alignment + semantic contrastive mapping)"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string ablate, data_dir, checkpoint, target_csv, metrics_out, axis_name, values_csv;
    int n_seeds = 1;
    bool print_defaults = false;
    double static_margin = -1.0;
    double omega = -1.0;
    bool has_static_margin = false, has_omega = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "JSON config file");
        cmd->add_option("--out", opts.out_dir, "output directory (overrides config out_dir)");
        cmd->add_option("--seed", opts.seed, "override both data and train seeds")
            ->each([&](const std::string&) { opts.has_seed = true; });
    };

    CLI::App* gen = app.add_subcommand("generate", "write source.csv/target.csv + manifest");
    add_common(gen);

    CLI::App* train = app.add_subcommand("train", "run both training stages");
    add_common(train);
    train->add_option("--data", data_dir,
                      "directory with source.csv/target.csv (default: generate from config)");
    train->add_option("--ablate", ablate, "no-sca | no-scm | ada-only");
    train->add_option("--static-margin", static_margin, "constant margin instead of adaptive")
        ->each([&](const std::string&) { has_static_margin = true; });
    train->add_option("--omega", omega, "cosine reweight exponent")
        ->each([&](const std::string&) { has_omega = true; });
    train->add_option("--seeds", n_seeds, "number of runs; metrics reported per run and mean");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a target CSV");
    eval->add_option("--checkpoint", checkpoint, "checkpoint.json path")->required();
    eval->add_option("--data", target_csv, "target CSV path")->required();
    eval->add_option("--out", metrics_out, "write metrics JSON here as well");

    CLI::App* sweep = app.add_subcommand("sweep", "train across one hyperparameter axis");
    add_common(sweep);
    sweep->add_option("--axis", axis_name, "omega | static_margin | unknown_ratio | threshold")
        ->required();
    sweep->add_option("--values", values_csv, "comma-separated values")->required();
    sweep->add_option("--seeds", n_seeds, "runs per value");
    sweep->add_option("--ablate", ablate, "no-sca | no-scm | ada-only");

    CLI::App* cfg_cmd = app.add_subcommand("config", "config utilities");
    cfg_cmd->add_flag("--print-defaults", print_defaults, "dump the default config JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (gen->parsed()) {
            osm::RunConfig cfg = resolve_config(opts);
            osm::cmd_generate(cfg, cfg.out_dir);
            std::cout << "wrote " << cfg.out_dir << "/source.csv, target.csv, manifest.json\n";
        } else if (train->parsed()) {
            osm::RunConfig cfg = resolve_config(opts);
            apply_ablation(cfg, ablate);
            if (has_static_margin) cfg.train.static_margin = static_margin;
            if (has_omega) cfg.train.weights.omega = omega;
            osm::cmd_train(cfg, cfg.out_dir, data_dir, n_seeds);
            std::cout << "training done; outputs in " << cfg.out_dir << "\n";
        } else if (eval->parsed()) {
            osm::MetricsRecord rec = osm::cmd_eval(checkpoint, target_csv, metrics_out);
            std::cout << osm::metrics_to_json(rec).dump(2) << "\n";
            std::printf("OS %.1f%%  OS* %.1f%%  ALL %.1f%%  UNK %.1f%%\n", 100.0 * rec.os,
                        100.0 * rec.os_star, 100.0 * rec.all, 100.0 * rec.unk);
        } else if (sweep->parsed()) {
            osm::RunConfig cfg = resolve_config(opts);
            apply_ablation(cfg, ablate);
            osm::cmd_sweep(cfg, osm::sweep_axis_from_name(axis_name), parse_values(values_csv),
                           n_seeds, cfg.out_dir);
            std::cout << "sweep done; results in " << cfg.out_dir << "/sweep_results.csv\n";
        } else if (cfg_cmd->parsed()) {
            if (print_defaults)
                std::cout << osm::config_to_json(osm::default_config()).dump(2) << "\n";
            else
                std::cout << cfg_cmd->help();
        }
    } catch (const osm::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
