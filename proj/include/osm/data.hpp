#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "osm/matrix.hpp"

namespace osm {

enum class Domain { Source, Target };

struct LabeledSample {
    std::vector<double> features;
    int label = 0;  // raw class id; target unknowns carry ids >= n_known
    Domain domain = Domain::Source;
};

struct Dataset {
    int dim = 0;
    std::vector<LabeledSample> samples;

    int size() const { return static_cast<int>(samples.size()); }
};

// Paired source/target generator config. Known classes are Gaussian blobs with
// means on a circle of radius class_separation (first two feature dims); the
// target known blobs are the source blobs pushed through a rotation in the
// first two dims plus a translation. Unknown blobs exist only in the target.
struct SyntheticConfig {
    int n_known = 4;
    int n_unknown_subclasses = 2;
    int dim = 8;
    int samples_per_class = 200;
    double shift_rotation = 0.5;               // radians, first two dims
    std::vector<double> shift_translation;     // length dim; empty means zero
    double noise_sigma = 0.6;
    double unknown_ratio = 0.5;                // fraction of target that is unknown
    double class_separation = 4.0;             // circle radius for known means
    double guard_radius_sigmas = 3.0;          // unknown means kept this far from known means
    uint64_t seed = 17;

    void validate() const;
};

// Collapses raw labels to the N+1 evaluation classes: raw < n_known stays,
// anything else is the unknown class n_known.
inline int eval_label(int raw, int n_known) { return raw < n_known ? raw : n_known; }

std::pair<Dataset, Dataset> generate_pair(const SyntheticConfig& config);

// CSV with header `domain,label,f0,...,f{d-1}`, UTF-8, LF, %.17g floats.
// load(save(x)) == x bit-exactly.
void save_csv(const Dataset& ds, const std::string& path);
Dataset load_csv(const std::string& path);

// Per-epoch shuffled index batches. The final short batch is kept unless it
// has fewer than 2 samples (batch-norm needs at least 2).
std::vector<std::vector<int>> batch_iter(int n_samples, int batch_size, uint64_t seed, int epoch);

// Batch assembly helpers.
Matrix features_matrix(const Dataset& ds, const std::vector<int>& idx);
Matrix all_features(const Dataset& ds);
std::vector<int> labels_at(const Dataset& ds, const std::vector<int>& idx);

}  // namespace osm
