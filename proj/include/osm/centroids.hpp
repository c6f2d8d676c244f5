#pragma once

#include <vector>

#include "osm/data.hpp"
#include "osm/matrix.hpp"
#include "osm/model.hpp"

namespace osm {

// Global per-class feature centroids for both domains. Only the N known
// classes have centroids; the unknown class deliberately has none.
struct CentroidBank {
    Matrix c_s;  // n_known x feature_dim
    Matrix c_t;
    long iteration = 0;
};

// Cosine affinity mapped to [0,1]: (cos(u,v)+1)/2. A vector with norm below
// 1e-12 carries no direction, so the result falls back to 0.5.
double rho(const double* u, const double* v, int d);
double rho_rows(const Matrix& a, int row_a, const Matrix& b, int row_b);

// Per-class means over one mini-batch. Classes absent from the batch are
// flagged not-present and skip their bank update.
struct LocalCentroids {
    Matrix mean;                 // n_classes x feature_dim (rows for absent classes are zero)
    std::vector<char> present;   // n_classes
    std::vector<int> count;      // n_classes
    std::vector<std::vector<int>> members;  // row indices per class
};

LocalCentroids local_centroids(const Matrix& features, const std::vector<int>& labels,
                               int n_classes);

// Centroids from full-dataset eval-mode forwards: source classes by true
// label, target classes by argmax pseudo-label. A target class with no
// pseudo-members copies the source centroid.
CentroidBank init_bank(NetworkParams& params, const Dataset& source, const Dataset& target);

// What one reweighted EMA update used, kept so the training step can rebuild
// the differentiable blend for the alignment loss.
struct BankUpdate {
    std::vector<double> rho_s, rho_t;
    std::vector<char> src_present, tgt_present;
    Matrix prev_c_s, prev_c_t;
};

// Reweighted EMA update: rho_s compares the source local centroid with the
// previous source centroid; rho_t compares the target local centroid with
// the previous *source* centroid.
BankUpdate update_bank(CentroidBank& bank, const LocalCentroids& src, const LocalCentroids& tgt);

// Mean over classes of || c_s^k - c_t^k ||, used for trace reporting.
double mean_centroid_distance(const CentroidBank& bank);

}  // namespace osm
