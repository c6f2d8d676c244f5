#pragma once

#include <string>
#include <vector>

#include "osm/config.hpp"
#include "osm/trainer.hpp"

namespace osm {

// Full two-stage training on in-memory datasets; pure apart from stderr notes.
struct TrainOutcome {
    NetworkParams params;
    CentroidBank bank;
    bool has_bank = false;
    std::vector<double> stage1_trace;
    std::vector<EpochRecord> stage2_trace;

    const MetricsRecord& final_metrics() const { return stage2_trace.back().metrics; }
};

TrainOutcome run_training(const RunConfig& config, const Dataset& source,
                          const Dataset& target);

nlohmann::json metrics_to_json(const MetricsRecord& rec);

// Filesystem commands backing the CLI. Each writes a manifest with the
// resolved config and its hash next to its outputs.
void cmd_generate(const RunConfig& config, const std::string& out_dir);

// Trains once per seed (seed index i shifts both data and train seeds by i).
// n_seeds == 1 writes flat outputs; more seeds write per-seed subdirectories
// plus an aggregate metrics.json with per-run records and the mean.
void cmd_train(const RunConfig& config, const std::string& out_dir,
               const std::string& data_dir, int n_seeds);

MetricsRecord cmd_eval(const std::string& checkpoint_path, const std::string& target_csv,
                       const std::string& out_path);

enum class SweepAxis { Omega, StaticMargin, UnknownRatio, Threshold };
SweepAxis sweep_axis_from_name(const std::string& name);

void cmd_sweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values,
               int n_seeds, const std::string& out_dir);

// Applies a seed offset the way multi-seed runs do.
RunConfig with_seed_offset(const RunConfig& config, int offset);

}  // namespace osm
