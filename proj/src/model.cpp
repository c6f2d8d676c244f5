#include "osm/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "osm/centroids.hpp"
#include "osm/errors.hpp"
#include "osm/rng.hpp"

namespace osm {

using nlohmann::json;

void MlpSpec::validate() const {
    if (widths.size() < 2) throw ValidationError("mlp spec needs at least one layer");
    for (int w : widths)
        if (w < 1) throw ValidationError("mlp widths must be positive");
    if (!batchnorm.empty() && batchnorm.size() != static_cast<size_t>(n_layers()))
        throw ValidationError("batchnorm flags must match layer count");
    if (leaky_alpha < 0.0) throw ValidationError("leaky_alpha must be nonnegative");
}

namespace {

Mlp build_mlp(const MlpSpec& spec, Rng& rng) {
    spec.validate();
    Mlp net;
    net.spec = spec;
    for (int i = 0; i < spec.n_layers(); ++i) {
        int in = spec.widths[i], out = spec.widths[i + 1];
        LinearLayer layer;
        layer.w = Matrix(in, out);
        double bound = std::sqrt(6.0 / in);  // He-style fan-in uniform
        for (auto& v : layer.w.a) v = rng.uniform(-bound, bound);
        layer.b = Matrix(1, out);
        layer.activated = spec.layer_activated(i);
        layer.has_bn = layer.activated && !spec.batchnorm.empty() && spec.batchnorm[i];
        if (layer.has_bn) {
            layer.bn.gamma = Matrix::full(1, out, 1.0);
            layer.bn.beta = Matrix(1, out);
            layer.bn.running_mean = Matrix(1, out);
            layer.bn.running_var = Matrix::full(1, out, 1.0);
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

constexpr double kBnMomentum = 0.9;
constexpr double kBnEps = 1e-5;

}  // namespace

NetworkParams init_params(const MlpSpec& encoder, const MlpSpec& generator,
                          const MlpSpec& discriminator, int n_known, uint64_t seed) {
    if (n_known < 2) throw ValidationError("n_known must be >= 2");
    if (encoder.out_dim() != generator.in_dim())
        throw ValidationError("width mismatch: encoder out " +
                              std::to_string(encoder.out_dim()) + " vs generator in " +
                              std::to_string(generator.in_dim()));
    if (generator.out_dim() != discriminator.in_dim())
        throw ValidationError("width mismatch: generator out " +
                              std::to_string(generator.out_dim()) + " vs discriminator in " +
                              std::to_string(discriminator.in_dim()));
    if (discriminator.out_dim() != n_known + 1)
        throw ValidationError("discriminator must output n_known+1=" +
                              std::to_string(n_known + 1) + " classes, got " +
                              std::to_string(discriminator.out_dim()));
    NetworkParams p;
    Rng rng(seed);
    p.encoder = build_mlp(encoder, rng);
    p.generator = build_mlp(generator, rng);
    p.discriminator = build_mlp(discriminator, rng);
    p.n_known = n_known;
    return p;
}

Node& ForwardPlan::param(Matrix& m) {
    auto it = cache_.find(&m);
    if (it != cache_.end()) return *it->second;
    Node& node = graph_->param(m);
    cache_.emplace(&m, &node);
    bindings_.push_back({&m, &node});
    return node;
}

Node& mlp_forward(ForwardPlan& plan, Mlp& net, Node& x, bool frozen) {
    if (x.cols() != net.in_dim())
        throw ContractError("forward: input width " + std::to_string(x.cols()) +
                            " does not match net input " + std::to_string(net.in_dim()));
    Graph& g = plan.graph();
    // Frozen nets run in eval mode on constants; running stats stay put and no
    // gradient can reach the parameters.
    const bool train = plan.mode() == Mode::Train && !frozen;
    Node* cur = &x;
    for (auto& layer : net.layers) {
        Node& w = frozen ? g.constant(layer.w) : plan.param(layer.w);
        Node& b = frozen ? g.constant(layer.b) : plan.param(layer.b);
        cur = &g.add_rowvec(g.matmul(*cur, w), b);
        if (layer.activated) {
            cur = &g.relu_leaky(*cur, net.spec.leaky_alpha);
            if (layer.has_bn) {
                Node& gamma = frozen ? g.constant(layer.bn.gamma) : plan.param(layer.bn.gamma);
                Node& beta = frozen ? g.constant(layer.bn.beta) : plan.param(layer.bn.beta);
                cur = &g.batch_norm(*cur, gamma, beta, layer.bn.running_mean,
                                    layer.bn.running_var, train, kBnMomentum, kBnEps);
            }
        }
    }
    return *cur;
}

ForwardResult network_forward(ForwardPlan& plan, NetworkParams& params, Node& x,
                              double grl_lambda, bool freeze_encoder) {
    Graph& g = plan.graph();
    Node& enc = mlp_forward(plan, params.encoder, x, freeze_encoder);
    // Detach after a frozen encoder so no backward work is wasted below it.
    Node& enc_in = freeze_encoder ? g.constant(enc.value) : enc;
    Node& feats = mlp_forward(plan, params.generator, enc_in);
    Node& d_in = grl_lambda >= 0.0 ? g.grad_reverse(feats, grl_lambda) : feats;
    Node& logits = mlp_forward(plan, params.discriminator, d_in);
    return {&feats, &logits};
}

void eval_forward_values(NetworkParams& params, const Matrix& x, Matrix& features_out,
                         Matrix& logits_out) {
    Graph g;
    ForwardPlan plan(g, Mode::Eval);
    Node& input = g.constant(x);
    ForwardResult res = network_forward(plan, params, input);
    features_out = res.features->value;
    logits_out = res.logits->value;
}

Matrix eval_features(NetworkParams& params, const Matrix& x) {
    Matrix f, l;
    eval_forward_values(params, x, f, l);
    return f;
}

// ---------------------------------------------------------------------------
// Checkpoint io

namespace {

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw IoError("checkpoint: expected matrix");
    Matrix m(static_cast<int>(j.size()), static_cast<int>(j[0].size()));
    for (int i = 0; i < m.rows; ++i) {
        if (static_cast<int>(j[i].size()) != m.cols)
            throw IoError("checkpoint: ragged matrix rows");
        for (int jj = 0; jj < m.cols; ++jj) m(i, jj) = j[i][jj].get<double>();
    }
    return m;
}

json mlp_to_json(const Mlp& net) {
    json spec;
    spec["widths"] = net.spec.widths;
    spec["batchnorm"] = net.spec.batchnorm;
    spec["leaky_alpha"] = net.spec.leaky_alpha;
    spec["activate_output"] = net.spec.activate_output;
    json layers = json::array();
    for (const auto& layer : net.layers) {
        json jl;
        jl["w"] = matrix_to_json(layer.w);
        jl["b"] = matrix_to_json(layer.b);
        if (layer.has_bn) {
            jl["bn"] = {{"gamma", matrix_to_json(layer.bn.gamma)},
                        {"beta", matrix_to_json(layer.bn.beta)},
                        {"running_mean", matrix_to_json(layer.bn.running_mean)},
                        {"running_var", matrix_to_json(layer.bn.running_var)}};
        }
        layers.push_back(std::move(jl));
    }
    return json{{"spec", spec}, {"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
    Mlp net;
    const json& spec = j.at("spec");
    net.spec.widths = spec.at("widths").get<std::vector<int>>();
    net.spec.batchnorm = spec.at("batchnorm").get<std::vector<bool>>();
    net.spec.leaky_alpha = spec.at("leaky_alpha").get<double>();
    net.spec.activate_output = spec.at("activate_output").get<bool>();
    net.spec.validate();
    int i = 0;
    for (const json& jl : j.at("layers")) {
        LinearLayer layer;
        layer.w = matrix_from_json(jl.at("w"));
        layer.b = matrix_from_json(jl.at("b"));
        layer.activated = net.spec.layer_activated(i);
        layer.has_bn = jl.contains("bn");
        if (layer.has_bn) {
            const json& bn = jl.at("bn");
            layer.bn.gamma = matrix_from_json(bn.at("gamma"));
            layer.bn.beta = matrix_from_json(bn.at("beta"));
            layer.bn.running_mean = matrix_from_json(bn.at("running_mean"));
            layer.bn.running_var = matrix_from_json(bn.at("running_var"));
        }
        net.layers.push_back(std::move(layer));
        ++i;
    }
    if (static_cast<int>(net.layers.size()) != net.spec.n_layers())
        throw IoError("checkpoint: layer count does not match spec");
    return net;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const CentroidBank* bank) {
    json j;
    j["format_version"] = 1;
    j["n_known"] = params.n_known;
    j["encoder"] = mlp_to_json(params.encoder);
    j["generator"] = mlp_to_json(params.generator);
    j["discriminator"] = mlp_to_json(params.discriminator);
    if (bank) {
        j["bank"] = {{"c_s", matrix_to_json(bank->c_s)},
                     {"c_t", matrix_to_json(bank->c_t)},
                     {"iteration", bank->iteration}};
    } else {
        j["bank"] = nullptr;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

void load_checkpoint(const std::string& path, NetworkParams& params, CentroidBank* bank,
                     bool* has_bank) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("checkpoint parse error in " + path + ": " + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1)
            throw IoError("unsupported checkpoint version in " + path);
        params.n_known = j.at("n_known").get<int>();
        params.encoder = mlp_from_json(j.at("encoder"));
        params.generator = mlp_from_json(j.at("generator"));
        params.discriminator = mlp_from_json(j.at("discriminator"));
        bool present = !j.at("bank").is_null();
        if (has_bank) *has_bank = present;
        if (bank && present) {
            bank->c_s = matrix_from_json(j.at("bank").at("c_s"));
            bank->c_t = matrix_from_json(j.at("bank").at("c_t"));
            bank->iteration = j.at("bank").at("iteration").get<long>();
        }
    } catch (const json::exception& e) {
        throw IoError("checkpoint schema error in " + path + ": " + e.what());
    }
}

}  // namespace osm
