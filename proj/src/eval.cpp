#include "osm/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "osm/errors.hpp"

namespace osm {

MetricsRecord metrics_from_confusion(const std::vector<std::vector<long>>& confusion) {
    const int n_classes = static_cast<int>(confusion.size());
    if (n_classes < 2) throw ContractError("metrics: need at least 2 classes");
    for (const auto& row : confusion)
        if (static_cast<int>(row.size()) != n_classes)
            throw ContractError("metrics: confusion matrix must be square");
    const int N = n_classes - 1;

    MetricsRecord rec;
    rec.confusion = confusion;
    rec.per_class.assign(n_classes, std::numeric_limits<double>::quiet_NaN());

    long total = 0, correct = 0;
    bool all_present = true;
    for (int k = 0; k < n_classes; ++k) {
        long row_sum = 0;
        for (int j = 0; j < n_classes; ++j) row_sum += confusion[k][j];
        total += row_sum;
        correct += confusion[k][k];
        if (row_sum > 0)
            rec.per_class[k] = static_cast<double>(confusion[k][k]) / row_sum;
        else
            all_present = false;
    }
    if (total == 0) throw ContractError("metrics: empty confusion matrix");
    rec.all = static_cast<double>(correct) / total;

    double known_sum = 0.0;
    int known_present = 0;
    for (int k = 0; k < N; ++k) {
        if (!std::isnan(rec.per_class[k])) {
            known_sum += rec.per_class[k];
            ++known_present;
        }
    }
    rec.os_star = known_present ? known_sum / known_present
                                : std::numeric_limits<double>::quiet_NaN();
    rec.unk = rec.per_class[N];

    if (all_present) {
        // Computed in this association so the identity with OS* and UNK is exact.
        rec.os = (N * rec.os_star + rec.unk) / (N + 1);
    } else {
        std::cerr << "warning: some classes have no ground-truth members; "
                     "they are excluded from the per-class means\n";
        double s = known_sum;
        int c = known_present;
        if (!std::isnan(rec.unk)) {
            s += rec.unk;
            ++c;
        }
        rec.os = c ? s / c : std::numeric_limits<double>::quiet_NaN();
    }
    return rec;
}

std::vector<int> predict(NetworkParams& params, const Matrix& x) {
    Matrix feats, logits;
    eval_forward_values(params, x, feats, logits);
    std::vector<int> preds(x.rows);
    for (int i = 0; i < x.rows; ++i) {
        int best = 0;
        for (int j = 1; j < logits.cols; ++j)
            if (logits(i, j) > logits(i, best)) best = j;
        preds[i] = best;
    }
    return preds;
}

MetricsRecord evaluate(NetworkParams& params, const Dataset& target) {
    if (target.size() == 0) throw ContractError("evaluate: empty target set");
    const int N = params.n_known;
    std::vector<int> preds = predict(params, all_features(target));
    std::vector<std::vector<long>> confusion(N + 1, std::vector<long>(N + 1, 0));
    for (int i = 0; i < target.size(); ++i) {
        int truth = eval_label(target.samples[i].label, N);
        ++confusion[truth][preds[i]];
    }
    return metrics_from_confusion(confusion);
}

void dump_embeddings(NetworkParams& params, const Dataset& source, const Dataset& target,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    const int N = params.n_known;
    const int fdim = params.feature_dim();
    out << "domain,true_label,eval_label,pseudo_label";
    for (int j = 0; j < fdim; ++j) out << ",f" << j;
    out << "\n";
    char buf[64];
    for (const Dataset* ds : {&source, &target}) {
        if (ds->size() == 0) continue;
        Matrix feats, logits;
        eval_forward_values(params, all_features(*ds), feats, logits);
        for (int i = 0; i < ds->size(); ++i) {
            int best = 0;
            for (int j = 1; j < logits.cols; ++j)
                if (logits(i, j) > logits(i, best)) best = j;
            const auto& s = ds->samples[i];
            out << (s.domain == Domain::Source ? "source" : "target") << ',' << s.label << ','
                << eval_label(s.label, N) << ',' << best;
            for (int j = 0; j < fdim; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", feats(i, j));
                out << ',' << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace osm
