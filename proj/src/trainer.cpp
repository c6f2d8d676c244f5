#include "osm/trainer.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <string>

#include "osm/errors.hpp"
#include "osm/rng.hpp"

namespace osm {

namespace {

// Distinct shuffle streams per purpose.
constexpr uint64_t kStage1Salt = 0x5331ull;
constexpr uint64_t kStage2SourceSalt = 0x535243ull;
constexpr uint64_t kStage2TargetSalt = 0x544754ull;

Matrix row_of(const Matrix& m, int row) {
    Matrix r(1, m.cols);
    for (int j = 0; j < m.cols; ++j) r(0, j) = m(row, j);
    return r;
}

}  // namespace

void TrainConfig::validate() const {
    if (lr_init <= 0.0) throw ValidationError("lr_init must be positive");
    if (weight_decay < 0.0) throw ValidationError("weight_decay must be nonnegative");
    if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
    if (epochs_stage1 < 1) throw ValidationError("epochs_stage1 must be >= 1");
    if (epochs_stage2 < 1) throw ValidationError("epochs_stage2 must be >= 1");
    if (reliability_threshold &&
        !(*reliability_threshold >= 0.0 && *reliability_threshold < 1.0))
        throw ValidationError("reliability_threshold must be in [0,1)");
    if (static_margin && *static_margin < 0.0)
        throw ValidationError("static_margin must be nonnegative");
    weights.validate();
}

double TrainConfig::resolved_threshold(int n_known) const {
    return reliability_threshold ? *reliability_threshold : 1.0 / (n_known + 1);
}

void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step,
                 const AdamConfig& cfg, double lr, double weight_decay) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (size_t i = 0; i < param.size(); ++i) {
        param.a[i] *= 1.0 - lr * weight_decay;
        double g = grad.a[i];
        m.a[i] = cfg.beta1 * m.a[i] + (1.0 - cfg.beta1) * g;
        v.a[i] = cfg.beta2 * v.a[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = m.a[i] / bc1;
        double vhat = v.a[i] / bc2;
        param.a[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

void adam_step(const std::vector<ParamBinding>& bindings, AdamState& state, double lr,
               double weight_decay) {
    if (state.m.empty()) {
        for (const auto& b : bindings) {
            state.m.emplace_back(b.store->rows, b.store->cols);
            state.v.emplace_back(b.store->rows, b.store->cols);
        }
    }
    if (state.m.size() != bindings.size())
        throw ContractError("adam_step: binding count changed mid-training");
    ++state.step;
    for (size_t i = 0; i < bindings.size(); ++i)
        adam_update(*bindings[i].store, bindings[i].node->grad, state.m[i], state.v[i],
                    state.step, state.cfg, lr, weight_decay);
}

double cosine_lr(long step, long total_steps, double lr_init) {
    if (step < 0 || step > total_steps) throw ContractError("cosine_lr: step out of range");
    return lr_init * (1.0 + std::cos(M_PI * static_cast<double>(step) / total_steps)) / 2.0;
}

PseudoLabels pseudo_label(const Matrix& logits, double threshold) {
    PseudoLabels out;
    out.labels.resize(logits.rows);
    out.reliable.resize(logits.rows);
    for (int i = 0; i < logits.rows; ++i) {
        double mx = logits(i, 0);
        for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, logits(i, j));
        double z = 0.0;
        for (int j = 0; j < logits.cols; ++j) z += std::exp(logits(i, j) - mx);
        int best = 0;
        double best_p = std::exp(logits(i, 0) - mx) / z;
        for (int j = 1; j < logits.cols; ++j) {
            double p = std::exp(logits(i, j) - mx) / z;
            if (p > best_p) {
                best_p = p;
                best = j;
            }
        }
        out.labels[i] = best;
        out.reliable[i] = best_p > threshold ? 1 : 0;
    }
    return out;
}

namespace {

void require_finite(double v, const char* component) {
    if (!std::isfinite(v))
        throw RuntimeFailure(std::string("training diverged: ") + component +
                             " loss is not finite");
}

}  // namespace

std::vector<double> pretrain_stage1(const TrainConfig& config, NetworkParams& params,
                                    const Dataset& source) {
    config.validate();
    if (source.size() == 0) throw ContractError("pretrain_stage1: empty source set");
    const uint64_t shuffle_seed = splitmix64(config.seed ^ kStage1Salt);
    const long iters_per_epoch =
        static_cast<long>(batch_iter(source.size(), config.batch_size, shuffle_seed, 0).size());
    const long total_steps = iters_per_epoch * config.epochs_stage1;

    AdamState adam;
    std::vector<double> trace;
    long gstep = 0;
    for (int epoch = 0; epoch < config.epochs_stage1; ++epoch) {
        auto batches = batch_iter(source.size(), config.batch_size, shuffle_seed, epoch);
        double loss_sum = 0.0;
        for (const auto& batch : batches) {
            Graph g;
            ForwardPlan plan(g, Mode::Train);
            Node& x = g.constant(features_matrix(source, batch));
            ForwardResult fw = network_forward(plan, params, x);
            Node& loss = cls_loss(g, *fw.logits, labels_at(source, batch), params.n_known);
            require_finite(loss.value(0, 0), "stage-1 cls");
            g.backward(loss);
            adam_step(plan.bindings(), adam, cosine_lr(gstep, total_steps, config.lr_init),
                      config.weight_decay);
            ++gstep;
            loss_sum += loss.value(0, 0);
        }
        trace.push_back(loss_sum / static_cast<double>(batches.size()));
    }
    return trace;
}

StepInputs compute_step_inputs(const TrainConfig& config, int n_known,
                               const Matrix& feats_s, const Matrix& feats_t,
                               const Matrix& logits_t, const std::vector<int>& labels_s,
                               CentroidBank* bank) {
    StepInputs in;
    in.labels_s = labels_s;
    in.pseudo = pseudo_label(logits_t, config.resolved_threshold(n_known));
    in.has_bank = bank != nullptr;
    if (!in.has_bank) return in;

    in.lc_s = local_centroids(feats_s, labels_s, n_known);
    in.lc_t = local_centroids(feats_t, in.pseudo.labels, n_known);
    in.update = update_bank(*bank, in.lc_s, in.lc_t);
    in.bank_c_s = bank->c_s;
    in.bank_c_t = bank->c_t;
    if (config.static_margin)
        in.margins.m.assign(n_known, *config.static_margin);
    else
        in.margins = adaptive_margins(*bank, config.weights.literal_dist);
    if (!config.disable_scm)
        in.scm = scm_weights(feats_t, in.pseudo.labels, in.pseudo.reliable, in.bank_c_s,
                             config.weights.omega);
    return in;
}

LossBundle build_step_losses(Graph& g, const TrainConfig& config, int n_known,
                             ForwardResult& fwd_s, ForwardResult& fwd_t,
                             const StepInputs& in) {
    LossBundle out;
    if (in.has_bank && !config.disable_sca) {
        out.cct = &contrastive_center_loss(g, *fwd_s.features, in.labels_s, in.bank_c_s,
                                           config.weights.delta);
        std::vector<Node*> cs_nodes, ct_nodes;
        for (int k = 0; k < n_known; ++k) {
            if (in.update.src_present[k]) {
                Node& local = g.col_mean(g.select_rows(*fwd_s.features, in.lc_s.members[k]));
                cs_nodes.push_back(
                    &blended_centroid(g, local, in.update.rho_s[k], in.update.prev_c_s, k));
            } else {
                cs_nodes.push_back(&g.constant(row_of(in.bank_c_s, k)));
            }
            if (in.update.tgt_present[k]) {
                Node& local = g.col_mean(g.select_rows(*fwd_t.features, in.lc_t.members[k]));
                ct_nodes.push_back(
                    &blended_centroid(g, local, in.update.rho_t[k], in.update.prev_c_t, k));
            } else {
                ct_nodes.push_back(&g.constant(row_of(in.bank_c_t, k)));
            }
        }
        out.cca = &cca_loss(g, cs_nodes, ct_nodes);
    }
    if (in.has_bank && !config.disable_scm) {
        out.con = scm_loss(g, *fwd_t.features, in.pseudo.labels, in.pseudo.reliable, in.bank_c_s,
                           in.margins, in.scm, config.weights.literal_dist);
        out.scm_skipped = out.con == nullptr;
    }
    out.cls = &cls_loss(g, *fwd_s.logits, in.labels_s, n_known);
    out.adv = &adv_loss(g, *fwd_t.logits);
    out.total = &total_loss(g, *out.cls, *out.adv, out.cct, out.cca, out.con, config.weights);
    return out;
}

Stage2Result train_stage2(const TrainConfig& config, NetworkParams& params,
                          const Dataset& source, const Dataset& target) {
    config.validate();
    if (source.size() == 0 || target.size() == 0)
        throw ContractError("train_stage2: empty dataset");
    const int N = params.n_known;
    const bool need_bank = !config.ada_only();
    const uint64_t seed_src = splitmix64(config.seed ^ kStage2SourceSalt);
    const uint64_t seed_tgt = splitmix64(config.seed ^ kStage2TargetSalt);

    const long iters_per_epoch = static_cast<long>(std::min(
        batch_iter(source.size(), config.batch_size, seed_src, 0).size(),
        batch_iter(target.size(), config.batch_size, seed_tgt, 0).size()));
    const long total_steps = iters_per_epoch * config.epochs_stage2;

    Stage2Result result;
    result.has_bank = need_bank;
    AdamState adam;
    long gstep = 0;

    for (int epoch = 0; epoch < config.epochs_stage2; ++epoch) {
        if (need_bank) result.bank = init_bank(params, source, target);

        auto batches_s = batch_iter(source.size(), config.batch_size, seed_src, epoch);
        auto batches_t = batch_iter(target.size(), config.batch_size, seed_tgt, epoch);

        EpochRecord rec;
        rec.epoch = epoch;
        int scm_skips = 0;

        for (long it = 0; it < iters_per_epoch; ++it) {
            Graph g;
            ForwardPlan plan(g, Mode::Train);
            const auto& batch_s = batches_s[it];
            const auto& batch_t = batches_t[it];

            Node& xs = g.constant(features_matrix(source, batch_s));
            Node& xt = g.constant(features_matrix(target, batch_t));
            ForwardResult fs = network_forward(plan, params, xs, -1.0, config.freeze_encoder);
            ForwardResult ft = network_forward(plan, params, xt, config.weights.adv_lambda,
                                               config.freeze_encoder);

            StepInputs in = compute_step_inputs(config, N, fs.features->value,
                                                ft.features->value, ft.logits->value,
                                                labels_at(source, batch_s),
                                                need_bank ? &result.bank : nullptr);
            LossBundle losses = build_step_losses(g, config, N, fs, ft, in);
            if (losses.scm_skipped) ++scm_skips;

            require_finite(losses.cls->value(0, 0), "cls");
            require_finite(losses.adv->value(0, 0), "adv");
            if (losses.cct) require_finite(losses.cct->value(0, 0), "cct");
            if (losses.cca) require_finite(losses.cca->value(0, 0), "cca");
            if (losses.con) require_finite(losses.con->value(0, 0), "con");

            g.backward(*losses.total);
            rec.lr = cosine_lr(gstep, total_steps, config.lr_init);
            adam_step(plan.bindings(), adam, rec.lr, config.weight_decay);
            ++gstep;

            rec.cls += losses.cls->value(0, 0);
            rec.adv += losses.adv->value(0, 0);
            rec.cct += losses.cct ? losses.cct->value(0, 0) : 0.0;
            rec.cca += losses.cca ? losses.cca->value(0, 0) : 0.0;
            rec.con += losses.con ? losses.con->value(0, 0) : 0.0;
            rec.total += losses.total->value(0, 0);
        }

        double inv = 1.0 / static_cast<double>(iters_per_epoch);
        rec.cls *= inv;
        rec.adv *= inv;
        rec.cct *= inv;
        rec.cca *= inv;
        rec.con *= inv;
        rec.total *= inv;
        rec.mean_centroid_dist = need_bank ? mean_centroid_distance(result.bank)
                                           : std::numeric_limits<double>::quiet_NaN();
        rec.metrics = evaluate(params, target);
        rec.metrics.epoch = epoch;
        if (scm_skips > 0)
            std::cerr << "note: epoch " << epoch << ": contrastive mapping skipped in "
                      << scm_skips << " iterations (no reliable samples)\n";
        result.trace.push_back(std::move(rec));
    }
    return result;
}

}  // namespace osm
