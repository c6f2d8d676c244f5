#pragma once

#include <vector>

#include "osm/centroids.hpp"
#include "osm/graph.hpp"
#include "osm/matrix.hpp"

namespace osm {

struct LossWeights {
    double lambda_s = 1.0;     // contrastive-center term
    double lambda_c = 0.005;   // center-alignment term
    double lambda_t = 0.05;    // contrastive-mapping term
    double omega = 0.5;        // cosine reweight exponent; 0 disables (0^0 == 1)
    double delta = 1e-6;       // contrastive-center denominator guard
    double adv_lambda = 1.0;   // gradient-reversal multiplier
    bool literal_dist = false; // dist = squared norm inside D_k/D_u/M^k instead of the norm

    void validate() const;
};

struct MarginVector {
    std::vector<double> m;  // per known class, nonnegative
};

// Mean softmax cross-entropy over the batch; source labels must be known
// classes (never the unknown class).
Node& cls_loss(Graph& g, Node& logits, const std::vector<int>& labels, int n_known);

// Symmetric binary cross-entropy on the unknown-class probability:
// mean of -1/2 log p - 1/2 log(1-p), p = softmax(logits) at the last class.
Node& adv_loss(Graph& g, Node& logits);

// cls + adv. The adversarial minimax is realized by wiring the target
// features through grad_reverse before the discriminator (see
// network_forward); this just sums the two terms.
Node& ada_objective(Graph& g, Node& logits_s, const std::vector<int>& labels_s, int n_known,
                    Node& logits_t_grl);

// Ratio loss pulling each source sample to its class centroid and away from
// the others; centroids are constants. Averaged over the batch.
Node& contrastive_center_loss(Graph& g, Node& features, const std::vector<int>& labels,
                              const Matrix& centroids, double delta);

// Sum over classes of the squared distance between the (differentiable)
// source and target centroid nodes.
Node& cca_loss(Graph& g, const std::vector<Node*>& c_s, const std::vector<Node*>& c_t);

// Value-level variant straight off the bank, for reporting and oracles.
double cca_value(const CentroidBank& bank);

// rho * local + (1 - rho) * previous, with the historical part constant.
Node& blended_centroid(Graph& g, Node& local, double rho_weight, const Matrix& prev,
                       int prev_row);

// Per-class repulsion radii: M^k = (1/N) sum_{j != k} dist(c_t^j, c_s^k).
MarginVector adaptive_margins(const CentroidBank& bank, bool literal_dist);

// Cosine reweights for the contrastive mapping, computed from current values
// and treated as constants by the gradient: (1-rho)^omega for a sample pulled
// to its predicted class, rho^omega per class for a repelled unknown.
struct ScmWeights {
    std::vector<double> known;  // one per batch row; meaningful for reliable known rows
    Matrix unknown;             // m x N; meaningful for reliable unknown rows
};

ScmWeights scm_weights(const Matrix& features_t, const std::vector<int>& pseudo_labels,
                       const std::vector<char>& reliable, const Matrix& source_centroids,
                       double omega);

// Contrastive mapping over the reliable target samples: predicted-known
// samples are pulled to their source centroid, predicted-unknown samples are
// pushed beyond every class margin. Returns nullptr when no sample is
// reliable (the caller logs the skip).
Node* scm_loss(Graph& g, Node& features_t, const std::vector<int>& pseudo_labels,
               const std::vector<char>& reliable, const Matrix& source_centroids,
               const MarginVector& margins, const ScmWeights& weights, bool literal_dist);

// L_cls + L_adv + lambda_s L_cct + lambda_c L_cca + lambda_t L_con.
// Null components are simply absent (their weight is exactly zero).
Node& total_loss(Graph& g, Node& cls, Node& adv, Node* cct, Node* cca, Node* con,
                 const LossWeights& w);

}  // namespace osm
