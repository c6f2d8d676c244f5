#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "osm/centroids.hpp"
#include "osm/data.hpp"
#include "osm/eval.hpp"
#include "osm/losses.hpp"
#include "osm/model.hpp"

namespace osm {

struct TrainConfig {
    double lr_init = 1e-3;
    double weight_decay = 1e-6;
    int batch_size = 64;
    int epochs_stage1 = 60;
    int epochs_stage2 = 60;
    // Reliable-sample cutoff; unset means 1/(N+1). Comparison is strict, so
    // with the default only exactly-uniform predictions are filtered out.
    std::optional<double> reliability_threshold;
    LossWeights weights;
    bool disable_sca = false;          // drops L_cct and L_cca
    bool disable_scm = false;          // drops L_con
    std::optional<double> static_margin;  // replaces the adaptive margins when set
    bool freeze_encoder = true;        // stage 2 treats E as fixed feature extraction
    uint64_t seed = 1;

    void validate() const;
    double resolved_threshold(int n_known) const;
    bool ada_only() const { return disable_sca && disable_scm; }
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    long step = 0;
    std::vector<Matrix> m, v;  // parallel to the binding order
};

// Decoupled weight decay (param *= 1 - lr*wd) followed by a bias-corrected
// Adam update. step is the 1-based update count.
void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step,
                 const AdamConfig& cfg, double lr, double weight_decay);

void adam_step(const std::vector<ParamBinding>& bindings, AdamState& state, double lr,
               double weight_decay);

// lr_init * (1 + cos(pi * step / total_steps)) / 2
double cosine_lr(long step, long total_steps, double lr_init);

struct PseudoLabels {
    std::vector<int> labels;     // argmax over N+1 classes, ties toward lowest index
    std::vector<char> reliable;  // max softmax probability strictly above the threshold
};

PseudoLabels pseudo_label(const Matrix& logits, double threshold);

// Source-only supervised pretraining (stage 1). Returns the per-epoch mean
// classification loss.
std::vector<double> pretrain_stage1(const TrainConfig& config, NetworkParams& params,
                                    const Dataset& source);

// Everything one optimization step treats as data rather than as a function
// of the parameters: source labels, pseudo-labels and their reliability, the
// EMA blend weights and previous centroids, batch membership per class, the
// post-update bank and the margins. Computing these mutates the bank.
struct StepInputs {
    std::vector<int> labels_s;
    PseudoLabels pseudo;
    bool has_bank = false;
    LocalCentroids lc_s, lc_t;
    BankUpdate update;
    Matrix bank_c_s;  // post-update, constants for L_cct / L_con
    Matrix bank_c_t;
    MarginVector margins;
    ScmWeights scm;
};

StepInputs compute_step_inputs(const TrainConfig& config, int n_known,
                               const Matrix& feats_s, const Matrix& feats_t,
                               const Matrix& logits_t, const std::vector<int>& labels_s,
                               CentroidBank* bank);

// The per-iteration objective, assembled from forwards plus frozen step
// inputs. Shared between the training loop and the gradient-check harness so
// both differentiate the same function.
struct LossBundle {
    Node* cls = nullptr;
    Node* adv = nullptr;
    Node* cct = nullptr;
    Node* cca = nullptr;
    Node* con = nullptr;
    Node* total = nullptr;
    bool scm_skipped = false;
};

LossBundle build_step_losses(Graph& g, const TrainConfig& config, int n_known,
                             ForwardResult& fwd_s, ForwardResult& fwd_t,
                             const StepInputs& in);

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;        // at the last update of the epoch
    double cls = 0.0, adv = 0.0, cct = 0.0, cca = 0.0, con = 0.0, total = 0.0;
    double mean_centroid_dist = 0.0;  // NaN when no bank is maintained
    MetricsRecord metrics;
};

struct Stage2Result {
    CentroidBank bank;
    bool has_bank = false;
    std::vector<EpochRecord> trace;
};

// Joint stage-2 optimization: per epoch the bank is recomputed from scratch,
// then per iteration paired batches are drawn, targets pseudo-labeled, the
// bank EMA-updated, margins refreshed and the total objective stepped.
Stage2Result train_stage2(const TrainConfig& config, NetworkParams& params,
                          const Dataset& source, const Dataset& target);

}  // namespace osm
