#pragma once

#include <string>
#include <vector>

#include "osm/data.hpp"
#include "osm/matrix.hpp"
#include "osm/model.hpp"

namespace osm {

// Open-set evaluation record over N+1 classes. per_class holds one accuracy
// per class (NaN when that class has no ground-truth members; such classes
// are excluded from the means). When every class is populated,
// OS == (N * OS_star + UNK) / (N+1) holds bitwise because OS is computed in
// exactly that association.
struct MetricsRecord {
    double os = 0.0;       // mean per-class accuracy over the N+1 classes
    double os_star = 0.0;  // mean per-class accuracy over the N known classes
    double all = 0.0;      // plain sample accuracy over the whole target set
    double unk = 0.0;      // accuracy on the unknown class
    std::vector<double> per_class;            // N+1 entries
    std::vector<std::vector<long>> confusion; // (N+1) x (N+1), [true][predicted]
    int epoch = -1;
};

MetricsRecord metrics_from_confusion(const std::vector<std::vector<long>>& confusion);

// Argmax over eval-mode logits; ties break toward the lowest class index.
std::vector<int> predict(NetworkParams& params, const Matrix& x);

MetricsRecord evaluate(NetworkParams& params, const Dataset& target);

// CSV dump of the feature layer for external plotting:
// domain,true_label,eval_label,pseudo_label,f0..f{m-1}
void dump_embeddings(NetworkParams& params, const Dataset& source, const Dataset& target,
                     const std::string& path);

}  // namespace osm
