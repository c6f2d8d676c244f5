#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "osm/graph.hpp"
#include "osm/matrix.hpp"

namespace osm {

enum class Mode { Train, Eval };

// Fully-connected stack description. Layer i maps widths[i] -> widths[i+1];
// hidden layers get LeakyReLU (and batch norm where flagged), the last layer
// too when activate_output is set. Layer order is FC -> LeakyReLU -> BN.
struct MlpSpec {
    std::vector<int> widths;
    std::vector<bool> batchnorm;  // one flag per layer; effective only where activated
    double leaky_alpha = 0.01;
    bool activate_output = false;

    int n_layers() const { return static_cast<int>(widths.size()) - 1; }
    int in_dim() const { return widths.front(); }
    int out_dim() const { return widths.back(); }
    bool layer_activated(int i) const { return i < n_layers() - 1 || activate_output; }
    void validate() const;
};

struct BatchNormState {
    Matrix gamma, beta;               // learned, 1 x width
    Matrix running_mean, running_var; // tracked, 1 x width
};

struct LinearLayer {
    Matrix w;  // in x out
    Matrix b;  // 1 x out
    bool activated = false;
    bool has_bn = false;
    BatchNormState bn;
};

struct Mlp {
    MlpSpec spec;
    std::vector<LinearLayer> layers;

    int in_dim() const { return spec.in_dim(); }
    int out_dim() const { return spec.out_dim(); }
};

// The E -> G -> D stack. D's output width is n_known + 1 (last class is
// "unknown"); G's output width is the feature dimension the centroid bank
// lives in.
struct NetworkParams {
    Mlp encoder, generator, discriminator;
    int n_known = 0;

    int feature_dim() const { return generator.out_dim(); }
};

NetworkParams init_params(const MlpSpec& encoder, const MlpSpec& generator,
                          const MlpSpec& discriminator, int n_known, uint64_t seed);

// Binds each parameter matrix to its graph node exactly once per graph, so a
// source and a target forward in the same step share parameter nodes and
// their gradients accumulate.
struct ParamBinding {
    Matrix* store;
    Node* node;
};

class ForwardPlan {
public:
    ForwardPlan(Graph& g, Mode mode) : graph_(&g), mode_(mode) {}

    Node& param(Matrix& m);
    Graph& graph() { return *graph_; }
    Mode mode() const { return mode_; }
    const std::vector<ParamBinding>& bindings() const { return bindings_; }

private:
    Graph* graph_;
    Mode mode_;
    std::vector<ParamBinding> bindings_;
    std::unordered_map<const Matrix*, Node*> cache_;
};

// One MLP. frozen=true runs the net in eval mode on detached parameters:
// no bindings are created and no gradient reaches it.
Node& mlp_forward(ForwardPlan& plan, Mlp& net, Node& x, bool frozen = false);

struct ForwardResult {
    Node* features = nullptr;  // G(E(x))
    Node* logits = nullptr;    // D(...), n_known+1 wide
};

// Full E -> G -> D pass. grl_lambda >= 0 inserts a gradient-reversal node
// between G and D (the adversarial target path); pass a negative value for
// the plain classification path.
ForwardResult network_forward(ForwardPlan& plan, NetworkParams& params, Node& x,
                              double grl_lambda = -1.0, bool freeze_encoder = false);

// Plain value-level eval forward (fresh graph internally).
Matrix eval_features(NetworkParams& params, const Matrix& x);
void eval_forward_values(NetworkParams& params, const Matrix& x, Matrix& features_out,
                         Matrix& logits_out);

// Versioned JSON checkpoint; 64-bit exact round trip.
struct CentroidBank;
void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const CentroidBank* bank);
void load_checkpoint(const std::string& path, NetworkParams& params, CentroidBank* bank,
                     bool* has_bank);

}  // namespace osm
