#include <doctest.h>

#include <cmath>

#include "osm/errors.hpp"
#include "osm/run.hpp"
#include "osm/trainer.hpp"
#include "testutil.hpp"

using namespace osm;
using osm::test::random_matrix;

namespace {

SyntheticConfig tiny_data() {
    SyntheticConfig c;
    c.n_known = 3;
    c.n_unknown_subclasses = 1;
    c.dim = 4;
    c.samples_per_class = 24;
    c.shift_rotation = 0.3;
    c.noise_sigma = 0.5;
    c.unknown_ratio = 0.4;
    c.seed = 5;
    return c;
}

RunConfig tiny_run() {
    RunConfig cfg;
    cfg.data = tiny_data();
    cfg.model.encoder_widths = {4, 8, 6};
    cfg.model.generator_widths = {6, 5};
    cfg.train.batch_size = 16;
    cfg.train.epochs_stage1 = 4;
    cfg.train.epochs_stage2 = 3;
    cfg.train.lr_init = 2e-3;
    cfg.train.seed = 3;
    return cfg;
}

bool mlp_equal(const Mlp& a, const Mlp& b) {
    for (size_t i = 0; i < a.layers.size(); ++i) {
        if (!bitwise_equal(a.layers[i].w, b.layers[i].w)) return false;
        if (!bitwise_equal(a.layers[i].b, b.layers[i].b)) return false;
        if (a.layers[i].has_bn &&
            (!bitwise_equal(a.layers[i].bn.gamma, b.layers[i].bn.gamma) ||
             !bitwise_equal(a.layers[i].bn.beta, b.layers[i].bn.beta) ||
             !bitwise_equal(a.layers[i].bn.running_mean, b.layers[i].bn.running_mean) ||
             !bitwise_equal(a.layers[i].bn.running_var, b.layers[i].bn.running_var)))
            return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("pseudo_label thresholding and ties") {
    // uniform probabilities with threshold 1/(N+1): strictly-greater fails
    Matrix uniform(2, 4);
    PseudoLabels pl = pseudo_label(uniform, 0.25);
    CHECK(pl.reliable[0] == 0);
    CHECK(pl.reliable[1] == 0);

    // p = (0.7, 0.2, 0.1), threshold 1/3 -> label 0, reliable
    Matrix l = Matrix::from_rows({{std::log(0.7), std::log(0.2), std::log(0.1)}});
    PseudoLabels pl2 = pseudo_label(l, 1.0 / 3.0);
    CHECK(pl2.labels[0] == 0);
    CHECK(pl2.reliable[0] == 1);

    // argmax ties break toward the lowest class index
    Matrix tie = Matrix::from_rows({{2.0, 2.0, 0.0}});
    PseudoLabels pl3 = pseudo_label(tie, 0.1);
    CHECK(pl3.labels[0] == 0);
}

TEST_CASE("cosine_lr ramp") {
    CHECK(cosine_lr(0, 100, 0.5) == doctest::Approx(0.5));
    CHECK(cosine_lr(100, 100, 0.5) == doctest::Approx(0.0));
    CHECK(cosine_lr(50, 100, 0.5) == doctest::Approx(0.25));
    CHECK_THROWS_AS(cosine_lr(101, 100, 0.5), ContractError);
}

TEST_CASE("adam fixed points and decay") {
    AdamConfig cfg;
    Matrix p = Matrix::from_rows({{2.0}});
    Matrix g(1, 1);
    Matrix m(1, 1), v(1, 1);

    // zero gradient, zero weight decay -> unchanged
    adam_update(p, g, m, v, 1, cfg, 0.1, 0.0);
    CHECK(p(0, 0) == 2.0);

    // zero gradient with decay -> shrink by exactly (1 - lr*wd)
    adam_update(p, g, m, v, 2, cfg, 0.1, 0.01);
    CHECK(p(0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));
}

TEST_CASE("adam single step matches a scripted oracle") {
    Rng rng(41);
    AdamConfig cfg;
    for (int trial = 0; trial < 200; ++trial) {
        double theta = rng.uniform(-3, 3);
        double grad = rng.uniform(-2, 2);
        double lr = rng.uniform(1e-4, 1e-1);
        double wd = rng.uniform(0.0, 1e-2);

        Matrix p = Matrix::from_rows({{theta}});
        Matrix g = Matrix::from_rows({{grad}});
        Matrix m(1, 1), v(1, 1);
        adam_update(p, g, m, v, 1, cfg, lr, wd);

        // scripted: decoupled decay, then bias-corrected Adam
        double expect = theta * (1.0 - lr * wd);
        double m1 = (1 - cfg.beta1) * grad;
        double v1 = (1 - cfg.beta2) * grad * grad;
        double mhat = m1 / (1 - cfg.beta1);
        double vhat = v1 / (1 - cfg.beta2);
        expect -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        CHECK(std::fabs(p(0, 0) - expect) < 1e-12);
    }
}

TEST_CASE("stage 1 learns separable blobs and is deterministic") {
    SyntheticConfig dc;
    dc.n_known = 2;
    dc.n_unknown_subclasses = 1;
    dc.dim = 4;
    dc.samples_per_class = 30;
    dc.noise_sigma = 0.4;
    dc.unknown_ratio = 0.3;
    dc.seed = 21;
    auto [source, target] = generate_pair(dc);

    RunConfig cfg;
    cfg.data = dc;
    cfg.train.batch_size = 10;
    cfg.train.epochs_stage1 = 25;
    cfg.train.lr_init = 2e-3;
    cfg.train.seed = 8;

    NetworkParams params = make_network(cfg);
    auto trace = pretrain_stage1(cfg.train, params, source);
    CHECK(trace.size() == 25);
    CHECK(trace.back() < trace.front());  // loss went down

    // frozen expectation: source train accuracy after default epochs
    std::vector<int> preds = predict(params, all_features(source));
    int correct = 0;
    for (int i = 0; i < source.size(); ++i)
        correct += preds[i] == source.samples[i].label ? 1 : 0;
    CHECK(static_cast<double>(correct) / source.size() >= 0.95);

    // same seed, same result
    NetworkParams params2 = make_network(cfg);
    auto trace2 = pretrain_stage1(cfg.train, params2, source);
    CHECK(trace == trace2);
    CHECK(mlp_equal(params.discriminator, params2.discriminator));
}

TEST_CASE("zero stage-1 epochs is a configuration error") {
    RunConfig cfg = tiny_run();
    cfg.train.epochs_stage1 = 0;
    auto [source, target] = generate_pair(cfg.data);
    NetworkParams params = make_network(with_seed_offset(cfg, 0));
    CHECK_THROWS_AS(pretrain_stage1(cfg.train, params, source), ValidationError);
}

TEST_CASE("divergence aborts with the offending component named") {
    RunConfig cfg = tiny_run();
    cfg.train.lr_init = 1e300;  // guaranteed overflow
    cfg.train.epochs_stage1 = 3;
    auto [source, target] = generate_pair(cfg.data);
    NetworkParams params = make_network(cfg);
    try {
        pretrain_stage1(cfg.train, params, source);
        // if stage 1 somehow survives, stage 2 must blow up
        train_stage2(cfg.train, params, source, target);
        FAIL("expected RuntimeFailure");
    } catch (const RuntimeFailure& e) {
        CHECK(std::string(e.what()).find("not finite") != std::string::npos);
    }
}

TEST_CASE("stage 2 is deterministic and keeps a frozen encoder frozen") {
    RunConfig cfg = tiny_run();
    auto [source, target] = generate_pair(cfg.data);

    NetworkParams params = make_network(cfg);
    pretrain_stage1(cfg.train, params, source);
    NetworkParams encoder_snapshot = params;

    Stage2Result a = train_stage2(cfg.train, params, source, target);
    CHECK(mlp_equal(encoder_snapshot.encoder, params.encoder));  // freeze_encoder default

    NetworkParams params2 = make_network(cfg);
    pretrain_stage1(cfg.train, params2, source);
    Stage2Result b = train_stage2(cfg.train, params2, source, target);

    REQUIRE(a.trace.size() == b.trace.size());
    for (size_t e = 0; e < a.trace.size(); ++e) {
        CHECK(a.trace[e].total == b.trace[e].total);
        CHECK(a.trace[e].metrics.os == b.trace[e].metrics.os);
    }
    CHECK(bitwise_equal(a.bank.c_s, b.bank.c_s));

    // learning rate trace is nonincreasing
    for (size_t e = 1; e < a.trace.size(); ++e) CHECK(a.trace[e].lr <= a.trace[e - 1].lr);
}

TEST_CASE("ablation flags equal zeroed weights bitwise") {
    RunConfig cfg = tiny_run();
    auto [source, target] = generate_pair(cfg.data);

    // one gradient step, captured under both formulations
    auto one_step_grads = [&](const TrainConfig& tc) {
        NetworkParams params = make_network(cfg);
        pretrain_stage1(tiny_run().train, params, source);

        CentroidBank bank = init_bank(params, source, target);
        auto bs = batch_iter(source.size(), tc.batch_size, 1, 0)[0];
        auto bt = batch_iter(target.size(), tc.batch_size, 2, 0)[0];

        Graph g;
        ForwardPlan plan(g, Mode::Train);
        Node& xs = g.constant(features_matrix(source, bs));
        Node& xt = g.constant(features_matrix(target, bt));
        ForwardResult fs = network_forward(plan, params, xs, -1.0, tc.freeze_encoder);
        ForwardResult ft =
            network_forward(plan, params, xt, tc.weights.adv_lambda, tc.freeze_encoder);
        StepInputs in = compute_step_inputs(tc, params.n_known, fs.features->value,
                                            ft.features->value, ft.logits->value,
                                            labels_at(source, bs), &bank);
        LossBundle losses = build_step_losses(g, tc, params.n_known, fs, ft, in);
        g.backward(*losses.total);
        std::vector<Matrix> grads;
        for (const auto& b : plan.bindings()) grads.push_back(b.node->grad);
        return grads;
    };

    TrainConfig flag_cfg = cfg.train;
    flag_cfg.disable_scm = true;
    TrainConfig zero_cfg = cfg.train;
    zero_cfg.weights.lambda_t = 0.0;
    auto g_flag = one_step_grads(flag_cfg);
    auto g_zero = one_step_grads(zero_cfg);
    REQUIRE(g_flag.size() == g_zero.size());
    for (size_t i = 0; i < g_flag.size(); ++i) {
        REQUIRE(g_flag[i].size() == g_zero[i].size());
        for (size_t e = 0; e < g_flag[i].size(); ++e)
            CHECK(g_flag[i].a[e] == g_zero[i].a[e]);
    }

    TrainConfig sca_flag = cfg.train;
    sca_flag.disable_sca = true;
    TrainConfig sca_zero = cfg.train;
    sca_zero.weights.lambda_s = 0.0;
    sca_zero.weights.lambda_c = 0.0;
    auto g_sca_flag = one_step_grads(sca_flag);
    auto g_sca_zero = one_step_grads(sca_zero);
    for (size_t i = 0; i < g_sca_flag.size(); ++i)
        for (size_t e = 0; e < g_sca_flag[i].size(); ++e)
            CHECK(g_sca_flag[i].a[e] == g_sca_zero[i].a[e]);
}

TEST_CASE("ada-only trajectory equals all-lambdas-zero trajectory") {
    RunConfig cfg = tiny_run();
    cfg.train.epochs_stage2 = 2;
    auto [source, target] = generate_pair(cfg.data);

    auto run_with = [&](const TrainConfig& tc) {
        NetworkParams params = make_network(cfg);
        pretrain_stage1(cfg.train, params, source);
        return train_stage2(tc, params, source, target);
    };

    TrainConfig ada = cfg.train;
    ada.disable_sca = true;
    ada.disable_scm = true;
    TrainConfig zeros = cfg.train;
    zeros.weights.lambda_s = zeros.weights.lambda_c = zeros.weights.lambda_t = 0.0;

    Stage2Result a = run_with(ada);
    Stage2Result z = run_with(zeros);
    REQUIRE(a.trace.size() == z.trace.size());
    for (size_t e = 0; e < a.trace.size(); ++e) {
        CHECK(a.trace[e].metrics.os == z.trace[e].metrics.os);
        CHECK(a.trace[e].metrics.all == z.trace[e].metrics.all);
        CHECK(a.trace[e].cls == z.trace[e].cls);
        CHECK(a.trace[e].adv == z.trace[e].adv);
    }
}

TEST_CASE("static margin replaces the adaptive rule") {
    RunConfig cfg = tiny_run();
    cfg.train.static_margin = 7.5;
    auto [source, target] = generate_pair(cfg.data);
    NetworkParams params = make_network(cfg);
    pretrain_stage1(cfg.train, params, source);

    CentroidBank bank = init_bank(params, source, target);
    Matrix fs = eval_features(params, features_matrix(source, {0, 1, 2, 3}));
    Matrix ftf, ftl;
    eval_forward_values(params, features_matrix(target, {0, 1, 2, 3}), ftf, ftl);
    StepInputs in = compute_step_inputs(cfg.train, params.n_known, fs, ftf, ftl,
                                        labels_at(source, {0, 1, 2, 3}), &bank);
    for (double m : in.margins.m) CHECK(m == 7.5);
}

}  // TEST_SUITE
