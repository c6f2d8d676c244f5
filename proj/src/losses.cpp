#include "osm/losses.hpp"

#include <cmath>
#include <string>

#include "osm/errors.hpp"

namespace osm {

void LossWeights::validate() const {
    if (lambda_s < 0 || lambda_c < 0 || lambda_t < 0)
        throw ValidationError("loss weights must be nonnegative");
    if (omega < 0) throw ValidationError("omega must be nonnegative");
    if (delta <= 0) throw ValidationError("delta must be positive");
    if (adv_lambda < 0) throw ValidationError("adv_lambda must be nonnegative");
}

namespace {

// 0^0 == 1 so omega = 0 turns reweighting off exactly.
double pow_weight(double base, double omega) {
    if (omega == 0.0) return 1.0;
    return std::pow(base, omega);
}

// Column k: squared Euclidean distance from every row of features to
// centroids[k].
Node& dist2_to_centroids(Graph& g, Node& features, const Matrix& centroids) {
    std::vector<Node*> cols;
    cols.reserve(centroids.rows);
    for (int k = 0; k < centroids.rows; ++k) {
        Matrix row(1, centroids.cols);
        for (int j = 0; j < centroids.cols; ++j) row(0, j) = centroids(k, j);
        Node& diff = g.sub_rowvec(features, g.constant(std::move(row)));
        cols.push_back(&g.row_sum(g.square(diff)));
    }
    return g.hstack(cols);
}

}  // namespace

Node& cls_loss(Graph& g, Node& logits, const std::vector<int>& labels, int n_known) {
    if (static_cast<int>(labels.size()) != logits.rows())
        throw ContractError("cls_loss: one label per row required");
    for (int y : labels)
        if (y < 0 || y >= n_known)
            throw ContractError("cls_loss: label " + std::to_string(y) +
                                " outside known classes [0," + std::to_string(n_known) +
                                ") — unknowns never appear in the source");
    Node& picked = g.pick_cols(g.log_softmax_rows(logits), labels);
    return g.scale(g.mean(picked), -1.0);
}

Node& adv_loss(Graph& g, Node& logits) {
    const int unknown_col = logits.cols() - 1;
    std::vector<int> idx(logits.rows(), unknown_col);
    Node& p = g.pick_cols(g.softmax_rows(logits), idx);
    Node& log_p = g.log_clamped(p);
    Node& log_1mp = g.log_clamped(g.affine(p, -1.0, 1.0));
    return g.mean(g.affine(g.add(log_p, log_1mp), -0.5, 0.0));
}

Node& ada_objective(Graph& g, Node& logits_s, const std::vector<int>& labels_s, int n_known,
                    Node& logits_t_grl) {
    return g.add(cls_loss(g, logits_s, labels_s, n_known), adv_loss(g, logits_t_grl));
}

Node& contrastive_center_loss(Graph& g, Node& features, const std::vector<int>& labels,
                              const Matrix& centroids, double delta) {
    const int n_classes = centroids.rows;
    if (n_classes < 2)
        throw ContractError("contrastive_center_loss: needs >= 2 classes for the denominator");
    if (static_cast<int>(labels.size()) != features.rows())
        throw ContractError("contrastive_center_loss: one label per row required");
    for (int y : labels)
        if (y < 0 || y >= n_classes)
            throw ContractError("contrastive_center_loss: label out of range");
    Node& d2 = dist2_to_centroids(g, features, centroids);
    Node& own = g.pick_cols(d2, labels);
    Node& others = g.affine(g.sub(g.row_sum(d2), own), 1.0, delta);
    return g.scale(g.mean(g.div(own, others)), 0.5);
}

Node& cca_loss(Graph& g, const std::vector<Node*>& c_s, const std::vector<Node*>& c_t) {
    if (c_s.size() != c_t.size() || c_s.empty())
        throw ContractError("cca_loss: centroid lists must pair up");
    Node* acc = nullptr;
    for (size_t k = 0; k < c_s.size(); ++k) {
        Node& term = g.sum(g.square(g.sub(*c_s[k], *c_t[k])));
        acc = acc ? &g.add(*acc, term) : &term;
    }
    return *acc;
}

double cca_value(const CentroidBank& bank) {
    double total = 0.0;
    for (int k = 0; k < bank.c_s.rows; ++k)
        for (int j = 0; j < bank.c_s.cols; ++j) {
            double d = bank.c_s(k, j) - bank.c_t(k, j);
            total += d * d;
        }
    return total;
}

Node& blended_centroid(Graph& g, Node& local, double rho_weight, const Matrix& prev,
                       int prev_row) {
    Matrix prev_part(1, prev.cols);
    for (int j = 0; j < prev.cols; ++j) prev_part(0, j) = (1.0 - rho_weight) * prev(prev_row, j);
    return g.add(g.scale(local, rho_weight), g.constant(std::move(prev_part)));
}

MarginVector adaptive_margins(const CentroidBank& bank, bool literal_dist) {
    const int N = bank.c_s.rows;
    MarginVector mv;
    mv.m.assign(N, 0.0);
    for (int k = 0; k < N; ++k) {
        double acc = 0.0;
        for (int j = 0; j < N; ++j) {
            if (j == k) continue;
            double d2 = 0.0;
            for (int c = 0; c < bank.c_s.cols; ++c) {
                double d = bank.c_t(j, c) - bank.c_s(k, c);
                d2 += d * d;
            }
            acc += literal_dist ? d2 : std::sqrt(d2);
        }
        mv.m[k] = acc / N;
    }
    return mv;
}

ScmWeights scm_weights(const Matrix& features_t, const std::vector<int>& pseudo_labels,
                       const std::vector<char>& reliable, const Matrix& source_centroids,
                       double omega) {
    const int m = features_t.rows;
    const int N = source_centroids.rows;
    ScmWeights w;
    w.known.assign(m, 0.0);
    w.unknown = Matrix(m, N);
    for (int i = 0; i < m; ++i) {
        if (!reliable[i]) continue;
        if (pseudo_labels[i] < N) {
            double r = rho(features_t.row_ptr(i), source_centroids.row_ptr(pseudo_labels[i]),
                           source_centroids.cols);
            w.known[i] = pow_weight(1.0 - r, omega);
        } else {
            for (int k = 0; k < N; ++k) {
                double r = rho(features_t.row_ptr(i), source_centroids.row_ptr(k),
                               source_centroids.cols);
                w.unknown(i, k) = pow_weight(r, omega);
            }
        }
    }
    return w;
}

Node* scm_loss(Graph& g, Node& features_t, const std::vector<int>& pseudo_labels,
               const std::vector<char>& reliable, const Matrix& source_centroids,
               const MarginVector& margins, const ScmWeights& weights, bool literal_dist) {
    const int m = features_t.rows();
    const int N = source_centroids.rows;
    if (static_cast<int>(pseudo_labels.size()) != m ||
        static_cast<int>(reliable.size()) != m)
        throw ContractError("scm_loss: pseudo labels and mask must cover the batch");
    if (static_cast<int>(margins.m.size()) != N)
        throw ContractError("scm_loss: one margin per known class required");

    std::vector<int> known_rows, unknown_rows;
    for (int i = 0; i < m; ++i) {
        if (!reliable[i]) continue;
        if (pseudo_labels[i] < N)
            known_rows.push_back(i);
        else
            unknown_rows.push_back(i);
    }
    const int n_reliable = static_cast<int>(known_rows.size() + unknown_rows.size());
    if (n_reliable == 0) return nullptr;

    Node& d2 = dist2_to_centroids(g, features_t, source_centroids);
    // dist as used inside the energies: the norm by default, the squared norm
    // in literal mode. Squaring it below yields the energy either way.
    Node& dist = literal_dist ? d2 : g.sqrt_clamped(d2);

    Node* acc = nullptr;
    if (!known_rows.empty()) {
        std::vector<int> labels;
        Matrix w(static_cast<int>(known_rows.size()), 1);
        for (size_t i = 0; i < known_rows.size(); ++i) {
            labels.push_back(pseudo_labels[known_rows[i]]);
            w(static_cast<int>(i), 0) = weights.known[known_rows[i]];
        }
        Node& own_dist = g.pick_cols(g.select_rows(dist, known_rows), labels);
        Node& pulled = g.mul(g.square(own_dist), g.constant(std::move(w)));
        acc = &g.sum(pulled);
    }
    if (!unknown_rows.empty()) {
        Matrix w(static_cast<int>(unknown_rows.size()), N);
        for (size_t i = 0; i < unknown_rows.size(); ++i)
            for (int k = 0; k < N; ++k) w(static_cast<int>(i), k) = weights.unknown(unknown_rows[i], k);
        Matrix margin_row(1, N);
        for (int k = 0; k < N; ++k) margin_row(0, k) = margins.m[k];
        Node& du = g.select_rows(dist, unknown_rows);
        // max(0, M^k - d): negate the distances and add the margins back.
        Node& gap = g.relu_leaky(g.add_rowvec(g.scale(du, -1.0), g.constant(std::move(margin_row))),
                                 0.0);
        Node& hinge = g.mul(g.square(gap), g.constant(std::move(w)));
        Node& per_sample = g.scale(g.row_sum(hinge), 1.0 / N);
        Node& term = g.sum(per_sample);
        acc = acc ? &g.add(*acc, term) : &term;
    }
    return &g.scale(*acc, 1.0 / n_reliable);
}

Node& total_loss(Graph& g, Node& cls, Node& adv, Node* cct, Node* cca, Node* con,
                 const LossWeights& w) {
    Node* acc = &g.add(cls, adv);
    if (cct) acc = &g.add(*acc, g.scale(*cct, w.lambda_s));
    if (cca) acc = &g.add(*acc, g.scale(*cca, w.lambda_c));
    if (con) acc = &g.add(*acc, g.scale(*con, w.lambda_t));
    return *acc;
}

}  // namespace osm
