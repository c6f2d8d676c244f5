#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "osm/errors.hpp"
#include "osm/eval.hpp"
#include "osm/run.hpp"
#include "testutil.hpp"

using namespace osm;

namespace {

using Confusion = std::vector<std::vector<long>>;

// Scripted metrics straight from the definitions.
struct OracleMetrics {
    double os, os_star, all, unk;
};

OracleMetrics oracle_metrics(const Confusion& c) {
    int n = static_cast<int>(c.size());
    int N = n - 1;
    OracleMetrics o{};
    double known = 0;
    long total = 0, correct = 0;
    for (int k = 0; k < n; ++k) {
        long rs = 0;
        for (long v : c[k]) rs += v;
        total += rs;
        correct += c[k][k];
        double acc = static_cast<double>(c[k][k]) / rs;
        if (k < N)
            known += acc;
        else
            o.unk = acc;
    }
    o.os_star = known / N;
    o.os = (known + o.unk) / n;
    o.all = static_cast<double>(correct) / total;
    return o;
}

Confusion random_confusion(Rng& rng, int n_classes, bool all_present) {
    Confusion c(n_classes, std::vector<long>(n_classes, 0));
    for (int i = 0; i < n_classes; ++i)
        for (int j = 0; j < n_classes; ++j) c[i][j] = static_cast<long>(rng.next_below(50));
    if (all_present)
        for (int i = 0; i < n_classes; ++i) c[i][i] += 1;  // nonzero row sums
    return c;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("perfect predictor scores 100 everywhere") {
    Confusion c = {{10, 0, 0}, {0, 7, 0}, {0, 0, 5}};
    MetricsRecord r = metrics_from_confusion(c);
    CHECK(r.os == 1.0);
    CHECK(r.os_star == 1.0);
    CHECK(r.all == 1.0);
    CHECK(r.unk == 1.0);
}

TEST_CASE("everything-unknown predictor, half known half unknown") {
    // N = 2 known classes, 25 + 25 known, 50 unknown, all predicted unknown
    Confusion c = {{0, 0, 25}, {0, 0, 25}, {0, 0, 50}};
    MetricsRecord r = metrics_from_confusion(c);
    CHECK(r.unk == 1.0);
    CHECK(r.os_star == 0.0);
    CHECK(r.os == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(r.all == 0.5);
}

TEST_CASE("handcrafted confusion matches the scripted oracle") {
    Confusion c = {{8, 1, 1}, {2, 6, 2}, {1, 1, 8}};
    MetricsRecord r = metrics_from_confusion(c);
    OracleMetrics o = oracle_metrics(c);
    CHECK(std::fabs(r.os - o.os) < 1e-10);
    CHECK(std::fabs(r.os_star - o.os_star) < 1e-10);
    CHECK(std::fabs(r.all - o.all) < 1e-10);
    CHECK(std::fabs(r.unk - o.unk) < 1e-10);
}

TEST_CASE("metric identities hold on random confusion matrices") {
    Rng rng(404);
    for (int trial = 0; trial < 1000; ++trial) {
        int n_classes = 2 + static_cast<int>(rng.next_below(5));
        int N = n_classes - 1;
        Confusion c = random_confusion(rng, n_classes, true);
        MetricsRecord r = metrics_from_confusion(c);

        // exact by construction
        CHECK(r.os == (N * r.os_star + r.unk) / (N + 1));
        CHECK(r.unk == r.per_class[N]);

        // means agree with the definition to rounding
        double mean_all = 0, mean_known = 0;
        for (int k = 0; k <= N; ++k) mean_all += r.per_class[k];
        for (int k = 0; k < N; ++k) mean_known += r.per_class[k];
        CHECK(std::fabs(r.os - mean_all / (N + 1)) < 1e-12);
        CHECK(std::fabs(r.os_star - mean_known / N) < 1e-12);
    }
}

TEST_CASE("zero-member classes are excluded from the means") {
    Confusion c = {{5, 0, 0}, {0, 0, 0}, {0, 0, 5}};  // class 1 absent
    MetricsRecord r = metrics_from_confusion(c);
    CHECK(std::isnan(r.per_class[1]));
    CHECK(r.os_star == 1.0);  // mean over the present known class only
    CHECK(r.os == 1.0);
    CHECK(r.all == 1.0);
}

TEST_CASE("evaluate is invariant to sample order and rejects empty sets") {
    RunConfig cfg;
    cfg.data.n_known = 3;
    cfg.data.n_unknown_subclasses = 1;
    cfg.data.dim = 4;
    cfg.data.samples_per_class = 12;
    cfg.data.unknown_ratio = 0.4;
    cfg.data.seed = 31;
    cfg.model.encoder_widths = {4, 6};
    cfg.model.generator_widths = {6, 4};
    auto [source, target] = generate_pair(cfg.data);
    NetworkParams params = make_network(cfg);

    MetricsRecord a = evaluate(params, target);
    Dataset reversed = target;
    std::reverse(reversed.samples.begin(), reversed.samples.end());
    MetricsRecord b = evaluate(params, reversed);
    CHECK(a.os == b.os);
    CHECK(a.all == b.all);
    CHECK(a.confusion == b.confusion);

    Dataset empty;
    empty.dim = 4;
    CHECK_THROWS_AS(evaluate(params, empty), ContractError);
}

TEST_CASE("embedding dump shape, determinism and content") {
    RunConfig cfg;
    cfg.data.n_known = 2;
    cfg.data.n_unknown_subclasses = 1;
    cfg.data.dim = 4;
    cfg.data.samples_per_class = 6;
    cfg.data.unknown_ratio = 0.4;
    cfg.data.seed = 77;
    cfg.model.encoder_widths = {4, 5};
    cfg.model.generator_widths = {5, 3};
    auto [source, target] = generate_pair(cfg.data);
    NetworkParams params = make_network(cfg);

    auto dir = std::filesystem::temp_directory_path() / "osm_eval_tests";
    std::filesystem::create_directories(dir);
    std::string p1 = (dir / "emb1.csv").string();
    std::string p2 = (dir / "emb2.csv").string();
    dump_embeddings(params, source, target, p1);
    dump_embeddings(params, source, target, p2);

    std::ifstream f1(p1), f2(p2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);  // re-dump with the same model is identical

    // row count = |source| + |target| + header
    long rows = std::count(s1.begin(), s1.end(), '\n');
    CHECK(rows == source.size() + target.size() + 1);

    // spot-check: first data row's features equal the eval-mode forward bitwise
    Matrix feats, logits;
    eval_forward_values(params, all_features(source), feats, logits);
    std::istringstream stream(s1);
    std::string header, row;
    std::getline(stream, header);
    std::getline(stream, row);
    size_t pos = 0;
    for (int skip = 0; skip < 4; ++skip) pos = row.find(',', pos) + 1;
    for (int j = 0; j < params.feature_dim(); ++j) {
        size_t next = row.find(',', pos);
        double v = std::stod(row.substr(pos, next - pos));
        CHECK(v == feats(0, j));  // %.17g round trip is exact
        pos = next + 1;
    }
}

}  // TEST_SUITE
