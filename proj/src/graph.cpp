#include "osm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "osm/errors.hpp"
#include "osm/kernels.hpp"

namespace osm {

namespace {
constexpr double kLogEps = 1e-12;
constexpr double kSqrtEps = 1e-12;
}  // namespace

Node& Graph::make(Matrix value, std::vector<Node*> parents,
                  std::function<void(std::vector<Matrix>&)> fn) {
    auto node = std::make_unique<Node>();
    node->id = static_cast<int>(nodes_.size());
    node->grad = Matrix::zeros(value.rows, value.cols);
    node->value = std::move(value);
    node->parents = std::move(parents);
    node->backprop = std::move(fn);
    nodes_.push_back(std::move(node));
    return *nodes_.back();
}

Node& Graph::constant(Matrix v) { return make(std::move(v), {}, nullptr); }

Node& Graph::matmul(Node& a, Node& b) {
    if (a.cols() != b.rows())
        throw ContractError("matmul: inner dimensions differ, " + a.value.shape_str() + " * " +
                            b.value.shape_str());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Matrix out(m, n);
    kernels::matmul_nn(a.value.data(), b.value.data(), out.data(), m, k, n, false);
    return make(std::move(out), {&a, &b},
                [&a, &b, m, k, n, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    kernels::matmul_nt(go.data(), b.value.data(), g[a.id].data(), m, n, k, true);
                    kernels::matmul_tn(a.value.data(), go.data(), g[b.id].data(), k, m, n, true);
                });
}

Node& Graph::add(Node& a, Node& b) {
    require_same_shape(a.value, b.value, "add");
    Matrix out = a.value;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] += b.value.a[i];
    return make(std::move(out), {&a, &b},
                [&a, &b, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i) {
                        g[a.id].a[i] += go.a[i];
                        g[b.id].a[i] += go.a[i];
                    }
                });
}

Node& Graph::sub(Node& a, Node& b) {
    require_same_shape(a.value, b.value, "sub");
    Matrix out = a.value;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] -= b.value.a[i];
    return make(std::move(out), {&a, &b},
                [&a, &b, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i) {
                        g[a.id].a[i] += go.a[i];
                        g[b.id].a[i] -= go.a[i];
                    }
                });
}

Node& Graph::mul(Node& a, Node& b) {
    require_same_shape(a.value, b.value, "mul");
    Matrix out = a.value;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] *= b.value.a[i];
    return make(std::move(out), {&a, &b},
                [&a, &b, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i) {
                        g[a.id].a[i] += go.a[i] * b.value.a[i];
                        g[b.id].a[i] += go.a[i] * a.value.a[i];
                    }
                });
}

Node& Graph::div(Node& a, Node& b) {
    require_same_shape(a.value, b.value, "div");
    Matrix out = a.value;
    for (size_t i = 0; i < out.size(); ++i) out.a[i] /= b.value.a[i];
    return make(std::move(out), {&a, &b},
                [&a, &b, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i) {
                        double inv = 1.0 / b.value.a[i];
                        g[a.id].a[i] += go.a[i] * inv;
                        g[b.id].a[i] -= go.a[i] * a.value.a[i] * inv * inv;
                    }
                });
}

Node& Graph::add_rowvec(Node& x, Node& r) {
    if (r.rows() != 1 || r.cols() != x.cols())
        throw ContractError("add_rowvec: expected 1x" + std::to_string(x.cols()) + ", got " +
                            r.value.shape_str());
    Matrix out = x.value;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) += r.value(0, j);
    return make(std::move(out), {&x, &r},
                [&x, &r, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (int i = 0; i < go.rows; ++i)
                        for (int j = 0; j < go.cols; ++j) {
                            g[x.id](i, j) += go(i, j);
                            g[r.id](0, j) += go(i, j);
                        }
                });
}

Node& Graph::sub_rowvec(Node& x, Node& r) {
    if (r.rows() != 1 || r.cols() != x.cols())
        throw ContractError("sub_rowvec: expected 1x" + std::to_string(x.cols()) + ", got " +
                            r.value.shape_str());
    Matrix out = x.value;
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) -= r.value(0, j);
    return make(std::move(out), {&x, &r},
                [&x, &r, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (int i = 0; i < go.rows; ++i)
                        for (int j = 0; j < go.cols; ++j) {
                            g[x.id](i, j) += go(i, j);
                            g[r.id](0, j) -= go(i, j);
                        }
                });
}

Node& Graph::affine(Node& x, double alpha, double beta) {
    Matrix out = x.value;
    for (auto& v : out.a) v = alpha * v + beta;
    return make(std::move(out), {&x},
                [&x, alpha, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i) g[x.id].a[i] += alpha * go.a[i];
                });
}

Node& Graph::log_clamped(Node& x) {
    Matrix out = x.value;
    for (auto& v : out.a) v = std::log(std::max(v, kLogEps));
    return make(std::move(out), {&x},
                [&x, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i)
                        if (x.value.a[i] >= kLogEps) g[x.id].a[i] += go.a[i] / x.value.a[i];
                });
}

Node& Graph::expn(Node& x) {
    Matrix out = x.value;
    for (auto& v : out.a) v = std::exp(v);
    return make(std::move(out), {&x},
                [&x, this, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    const Matrix& ov = nodes_[id]->value;
                    for (size_t i = 0; i < go.size(); ++i) g[x.id].a[i] += go.a[i] * ov.a[i];
                });
}

Node& Graph::square(Node& x) {
    Matrix out = x.value;
    for (auto& v : out.a) v = v * v;
    return make(std::move(out), {&x},
                [&x, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i)
                        g[x.id].a[i] += 2.0 * x.value.a[i] * go.a[i];
                });
}

Node& Graph::sqrt_clamped(Node& x) {
    Matrix out = x.value;
    for (auto& v : out.a) v = std::sqrt(std::max(v, 0.0));
    return make(std::move(out), {&x},
                [&x, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i)
                        g[x.id].a[i] += go.a[i] * 0.5 / std::sqrt(std::max(x.value.a[i], kSqrtEps));
                });
}

Node& Graph::relu_leaky(Node& x, double alpha) {
    Matrix out = x.value;
    for (auto& v : out.a) v = v > 0.0 ? v : alpha * v;
    return make(std::move(out), {&x},
                [&x, alpha, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i)
                        g[x.id].a[i] += (x.value.a[i] > 0.0 ? 1.0 : alpha) * go.a[i];
                });
}

Node& Graph::sum(Node& x) {
    double s = 0.0;
    for (double v : x.value.a) s += v;
    Matrix out(1, 1);
    out(0, 0) = s;
    return make(std::move(out), {&x},
                [&x, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    double go = g[id](0, 0);
                    for (auto& v : g[x.id].a) v += go;
                });
}

Node& Graph::mean(Node& x) {
    double s = 0.0;
    for (double v : x.value.a) s += v;
    const double inv = 1.0 / static_cast<double>(x.value.size());
    Matrix out(1, 1);
    out(0, 0) = s * inv;
    return make(std::move(out), {&x},
                [&x, inv, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    double go = g[id](0, 0) * inv;
                    for (auto& v : g[x.id].a) v += go;
                });
}

Node& Graph::row_sum(Node& x) {
    Matrix out(x.rows(), 1);
    for (int i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < x.cols(); ++j) s += x.value(i, j);
        out(i, 0) = s;
    }
    return make(std::move(out), {&x},
                [&x, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (int i = 0; i < x.rows(); ++i)
                        for (int j = 0; j < x.cols(); ++j) g[x.id](i, j) += go(i, 0);
                });
}

Node& Graph::col_mean(Node& x) {
    const double inv = 1.0 / static_cast<double>(x.rows());
    Matrix out(1, x.cols());
    for (int j = 0; j < x.cols(); ++j) {
        double s = 0.0;
        for (int i = 0; i < x.rows(); ++i) s += x.value(i, j);
        out(0, j) = s * inv;
    }
    return make(std::move(out), {&x},
                [&x, inv, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (int i = 0; i < x.rows(); ++i)
                        for (int j = 0; j < x.cols(); ++j) g[x.id](i, j) += go(0, j) * inv;
                });
}

Node& Graph::softmax_rows(Node& x) {
    Matrix out = x.value;
    for (int i = 0; i < out.rows; ++i) {
        double mx = out(i, 0);
        for (int j = 1; j < out.cols; ++j) mx = std::max(mx, out(i, j));
        double z = 0.0;
        for (int j = 0; j < out.cols; ++j) {
            out(i, j) = std::exp(out(i, j) - mx);
            z += out(i, j);
        }
        for (int j = 0; j < out.cols; ++j) out(i, j) /= z;
    }
    return make(std::move(out), {&x},
                [&x, this, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    const Matrix& p = nodes_[id]->value;
                    for (int i = 0; i < p.rows; ++i) {
                        double dot = 0.0;
                        for (int j = 0; j < p.cols; ++j) dot += go(i, j) * p(i, j);
                        for (int j = 0; j < p.cols; ++j)
                            g[x.id](i, j) += p(i, j) * (go(i, j) - dot);
                    }
                });
}

Node& Graph::log_softmax_rows(Node& x) {
    Matrix out = x.value;
    for (int i = 0; i < out.rows; ++i) {
        double mx = out(i, 0);
        for (int j = 1; j < out.cols; ++j) mx = std::max(mx, out(i, j));
        double z = 0.0;
        for (int j = 0; j < out.cols; ++j) z += std::exp(out(i, j) - mx);
        double lz = mx + std::log(z);
        for (int j = 0; j < out.cols; ++j) out(i, j) -= lz;
    }
    return make(std::move(out), {&x},
                [&x, this, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    const Matrix& ls = nodes_[id]->value;
                    for (int i = 0; i < ls.rows; ++i) {
                        double gsum = 0.0;
                        for (int j = 0; j < ls.cols; ++j) gsum += go(i, j);
                        for (int j = 0; j < ls.cols; ++j)
                            g[x.id](i, j) += go(i, j) - std::exp(ls(i, j)) * gsum;
                    }
                });
}

Node& Graph::pick_cols(Node& x, std::vector<int> idx) {
    if (static_cast<int>(idx.size()) != x.rows())
        throw ContractError("pick_cols: need one index per row");
    for (int i : idx)
        if (i < 0 || i >= x.cols()) throw ContractError("pick_cols: index out of range");
    Matrix out(x.rows(), 1);
    for (int i = 0; i < x.rows(); ++i) out(i, 0) = x.value(i, idx[i]);
    return make(std::move(out), {&x},
                [&x, idx = std::move(idx), id = static_cast<int>(nodes_.size())](
                    std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (int i = 0; i < x.rows(); ++i) g[x.id](i, idx[i]) += go(i, 0);
                });
}

Node& Graph::hstack(const std::vector<Node*>& blocks) {
    if (blocks.empty()) throw ContractError("hstack: no blocks");
    int m = blocks[0]->rows();
    int n = 0;
    for (Node* b : blocks) {
        if (b->rows() != m) throw ContractError("hstack: row counts differ");
        n += b->cols();
    }
    Matrix out(m, n);
    int off = 0;
    for (Node* b : blocks) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < b->cols(); ++j) out(i, off + j) = b->value(i, j);
        off += b->cols();
    }
    std::vector<Node*> parents = blocks;
    return make(std::move(out), parents,
                [blocks = parents, m, id = static_cast<int>(nodes_.size())](
                    std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    int off = 0;
                    for (Node* b : blocks) {
                        for (int i = 0; i < m; ++i)
                            for (int j = 0; j < b->cols(); ++j)
                                g[b->id](i, j) += go(i, off + j);
                        off += b->cols();
                    }
                });
}

Node& Graph::select_rows(Node& x, std::vector<int> rows) {
    for (int r : rows)
        if (r < 0 || r >= x.rows()) throw ContractError("select_rows: row index out of range");
    Matrix out(static_cast<int>(rows.size()), x.cols());
    for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < x.cols(); ++j) out(static_cast<int>(i), j) = x.value(rows[i], j);
    return make(std::move(out), {&x},
                [&x, rows = std::move(rows), id = static_cast<int>(nodes_.size())](
                    std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < rows.size(); ++i)
                        for (int j = 0; j < x.cols(); ++j)
                            g[x.id](rows[i], j) += go(static_cast<int>(i), j);
                });
}

Node& Graph::grad_reverse(Node& x, double lambda) {
    if (lambda < 0.0) throw ContractError("grad_reverse: lambda must be nonnegative");
    Matrix out = x.value;
    return make(std::move(out), {&x},
                [&x, lambda, id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
                    const Matrix& go = g[id];
                    for (size_t i = 0; i < go.size(); ++i) g[x.id].a[i] -= lambda * go.a[i];
                });
}

Node& Graph::batch_norm(Node& x, Node& gamma, Node& beta, Matrix& running_mean,
                        Matrix& running_var, bool train, double momentum, double eps) {
    const int m = x.rows(), n = x.cols();
    if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
        throw ContractError("batch_norm: scale/shift must be 1x" + std::to_string(n));
    if (running_mean.cols != n || running_var.cols != n)
        throw ContractError("batch_norm: running state width mismatch");
    if (train && m < 2)
        throw ValidationError("batch_norm: train mode requires batch size >= 2, got " +
                              std::to_string(m));

    Matrix xhat(m, n);
    Matrix inv_std(1, n);
    if (train) {
        for (int j = 0; j < n; ++j) {
            double mu = 0.0;
            for (int i = 0; i < m; ++i) mu += x.value(i, j);
            mu /= m;
            double var = 0.0;
            for (int i = 0; i < m; ++i) {
                double d = x.value(i, j) - mu;
                var += d * d;
            }
            var /= m;
            inv_std(0, j) = 1.0 / std::sqrt(var + eps);
            for (int i = 0; i < m; ++i) xhat(i, j) = (x.value(i, j) - mu) * inv_std(0, j);
            running_mean(0, j) = momentum * running_mean(0, j) + (1.0 - momentum) * mu;
            running_var(0, j) = momentum * running_var(0, j) + (1.0 - momentum) * var;
        }
    } else {
        for (int j = 0; j < n; ++j) {
            inv_std(0, j) = 1.0 / std::sqrt(running_var(0, j) + eps);
            for (int i = 0; i < m; ++i)
                xhat(i, j) = (x.value(i, j) - running_mean(0, j)) * inv_std(0, j);
        }
    }
    Matrix out(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = gamma.value(0, j) * xhat(i, j) + beta.value(0, j);

    return make(
        std::move(out), {&x, &gamma, &beta},
        [&x, &gamma, &beta, xhat = std::move(xhat), inv_std = std::move(inv_std), train, m, n,
         id = static_cast<int>(nodes_.size())](std::vector<Matrix>& g) {
            const Matrix& go = g[id];
            for (int j = 0; j < n; ++j) {
                double dgamma = 0.0, dbeta = 0.0;
                for (int i = 0; i < m; ++i) {
                    dgamma += go(i, j) * xhat(i, j);
                    dbeta += go(i, j);
                }
                g[gamma.id](0, j) += dgamma;
                g[beta.id](0, j) += dbeta;
                if (train) {
                    // dxhat = go * gamma; fold the batch-statistic terms per column.
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (int i = 0; i < m; ++i) {
                        double dxh = go(i, j) * gamma.value(0, j);
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * xhat(i, j);
                    }
                    double scale = inv_std(0, j) / m;
                    for (int i = 0; i < m; ++i) {
                        double dxh = go(i, j) * gamma.value(0, j);
                        g[x.id](i, j) +=
                            scale * (m * dxh - sum_dxhat - xhat(i, j) * sum_dxhat_xhat);
                    }
                } else {
                    for (int i = 0; i < m; ++i)
                        g[x.id](i, j) += go(i, j) * gamma.value(0, j) * inv_std(0, j);
                }
            }
        });
}

void Graph::backward(Node& root) {
    if (root.rows() != 1 || root.cols() != 1)
        throw ContractError("backward: root must be scalar (1x1), got " + root.value.shape_str());

    const size_t limit = static_cast<size_t>(root.id) + 1;
    std::vector<char> reachable(limit, 0);
    std::vector<Node*> stack{&root};
    reachable[root.id] = 1;
    while (!stack.empty()) {
        Node* cur = stack.back();
        stack.pop_back();
        for (Node* p : cur->parents) {
            if (!reachable[p->id]) {
                reachable[p->id] = 1;
                stack.push_back(p);
            }
        }
    }

    // Pass-local gradient buffers so repeated backward calls accumulate
    // cleanly into Node::grad instead of compounding.
    std::vector<Matrix> gbuf(limit);
    for (size_t i = 0; i < limit; ++i)
        if (reachable[i]) gbuf[i] = Matrix::zeros(nodes_[i]->rows(), nodes_[i]->cols());
    gbuf[root.id](0, 0) = 1.0;

    for (size_t i = limit; i-- > 0;) {
        if (reachable[i] && nodes_[i]->backprop) nodes_[i]->backprop(gbuf);
    }
    for (size_t i = 0; i < limit; ++i) {
        if (!reachable[i]) continue;
        Matrix& dst = nodes_[i]->grad;
        const Matrix& src = gbuf[i];
        for (size_t t = 0; t < dst.size(); ++t) dst.a[t] += src.a[t];
    }
}

void Graph::zero_grad() {
    for (auto& n : nodes_) n->grad.fill(0.0);
}

}  // namespace osm
