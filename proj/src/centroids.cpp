#include "osm/centroids.hpp"

#include <cmath>
#include <iostream>

#include "osm/errors.hpp"

namespace osm {

double rho(const double* u, const double* v, int d) {
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (int j = 0; j < d; ++j) {
        uu += u[j] * u[j];
        vv += v[j] * v[j];
        uv += u[j] * v[j];
    }
    double nu = std::sqrt(uu), nv = std::sqrt(vv);
    if (nu < 1e-12 || nv < 1e-12) return 0.5;  // no directional information
    double cosv = uv / (nu * nv);
    if (cosv > 1.0) cosv = 1.0;
    if (cosv < -1.0) cosv = -1.0;
    return (cosv + 1.0) / 2.0;
}

double rho_rows(const Matrix& a, int row_a, const Matrix& b, int row_b) {
    if (a.cols != b.cols) throw ContractError("rho: dimension mismatch");
    return rho(a.row_ptr(row_a), b.row_ptr(row_b), a.cols);
}

LocalCentroids local_centroids(const Matrix& features, const std::vector<int>& labels,
                               int n_classes) {
    if (static_cast<int>(labels.size()) != features.rows)
        throw ContractError("local_centroids: one label per row required");
    LocalCentroids lc;
    lc.mean = Matrix(n_classes, features.cols);
    lc.present.assign(n_classes, 0);
    lc.count.assign(n_classes, 0);
    lc.members.assign(n_classes, {});
    for (int i = 0; i < features.rows; ++i) {
        int k = labels[i];
        if (k < 0 || k >= n_classes) continue;  // unknown pseudo-labels have no centroid
        lc.members[k].push_back(i);
        ++lc.count[k];
        for (int j = 0; j < features.cols; ++j) lc.mean(k, j) += features(i, j);
    }
    for (int k = 0; k < n_classes; ++k) {
        if (lc.count[k] > 0) {
            lc.present[k] = 1;
            for (int j = 0; j < features.cols; ++j) lc.mean(k, j) /= lc.count[k];
        }
    }
    return lc;
}

CentroidBank init_bank(NetworkParams& params, const Dataset& source, const Dataset& target) {
    const int N = params.n_known;
    Matrix fs, ls, ft, lt;
    eval_forward_values(params, all_features(source), fs, ls);
    eval_forward_values(params, all_features(target), ft, lt);

    std::vector<int> src_labels(source.size());
    for (int i = 0; i < source.size(); ++i) src_labels[i] = source.samples[i].label;

    // Target grouping uses the model's own predictions as pseudo-labels.
    std::vector<int> tgt_pseudo(target.size());
    for (int i = 0; i < target.size(); ++i) {
        int best = 0;
        for (int j = 1; j < lt.cols; ++j)
            if (lt(i, j) > lt(i, best)) best = j;
        tgt_pseudo[i] = best;
    }

    LocalCentroids src = local_centroids(fs, src_labels, N);
    LocalCentroids tgt = local_centroids(ft, tgt_pseudo, N);

    CentroidBank bank;
    bank.c_s = Matrix(N, params.feature_dim());
    bank.c_t = Matrix(N, params.feature_dim());
    bank.iteration = 0;
    for (int k = 0; k < N; ++k) {
        if (!src.present[k])
            throw ContractError("init_bank: source class " + std::to_string(k) +
                                " has no samples");
        for (int j = 0; j < bank.c_s.cols; ++j) bank.c_s(k, j) = src.mean(k, j);
        if (tgt.present[k]) {
            for (int j = 0; j < bank.c_t.cols; ++j) bank.c_t(k, j) = tgt.mean(k, j);
        } else {
            // No pseudo-members: seed from the source side.
            std::cerr << "note: target class " << k
                      << " has no pseudo-labeled samples; centroid copied from source\n";
            for (int j = 0; j < bank.c_t.cols; ++j) bank.c_t(k, j) = bank.c_s(k, j);
        }
    }
    return bank;
}

BankUpdate update_bank(CentroidBank& bank, const LocalCentroids& src, const LocalCentroids& tgt) {
    const int N = bank.c_s.rows, d = bank.c_s.cols;
    BankUpdate up;
    up.prev_c_s = bank.c_s;
    up.prev_c_t = bank.c_t;
    up.rho_s.assign(N, 0.0);
    up.rho_t.assign(N, 0.0);
    up.src_present.assign(N, 0);
    up.tgt_present.assign(N, 0);

    for (int k = 0; k < N; ++k) {
        if (src.present[k]) {
            double r = rho_rows(src.mean, k, up.prev_c_s, k);
            up.rho_s[k] = r;
            up.src_present[k] = 1;
            for (int j = 0; j < d; ++j)
                bank.c_s(k, j) = r * src.mean(k, j) + (1.0 - r) * up.prev_c_s(k, j);
        }
        if (tgt.present[k]) {
            // Target weight measured against the source centroid.
            double r = rho_rows(tgt.mean, k, up.prev_c_s, k);
            up.rho_t[k] = r;
            up.tgt_present[k] = 1;
            for (int j = 0; j < d; ++j)
                bank.c_t(k, j) = r * tgt.mean(k, j) + (1.0 - r) * up.prev_c_t(k, j);
        }
    }
    ++bank.iteration;
    return up;
}

double mean_centroid_distance(const CentroidBank& bank) {
    double total = 0.0;
    for (int k = 0; k < bank.c_s.rows; ++k) {
        double s = 0.0;
        for (int j = 0; j < bank.c_s.cols; ++j) {
            double dd = bank.c_s(k, j) - bank.c_t(k, j);
            s += dd * dd;
        }
        total += std::sqrt(s);
    }
    return bank.c_s.rows ? total / bank.c_s.rows : 0.0;
}

}  // namespace osm
