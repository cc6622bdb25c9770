#include "hea/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace hea::nn {

Tensor Tensor::row(std::vector<double> data) {
    Tensor t;
    t.rows = 1;
    t.cols = data.size();
    t.v = std::move(data);
    return t;
}

std::string Tensor::shape_str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

void Node::ensure_grad() {
    if (grad.v.size() != val.v.size()) grad = Tensor(val.rows, val.cols, 0.0);
}

Var param(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = true;
    n->ensure_grad();
    return n;
}

Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    return n;
}

namespace {

Var make_op(Tensor val, std::vector<Var> parents) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    return n;
}

void topo_sort(const Var& root, std::vector<Node*>& order) {
    std::unordered_set<Node*> visited;
    // Iterative DFS; graphs can be deep for long training sequences.
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx == 0 && !visited.insert(node).second) {
            stack.pop_back();
            continue;
        }
        if (idx < node->parents.size()) {
            Node* next = node->parents[idx].get();
            ++idx;
            if (!visited.count(next)) stack.push_back({next, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

}  // namespace

void backward(const Var& root) {
    if (root->val.rows != 1 || root->val.cols != 1)
        throw ShapeError("backward requires a scalar root, got " +
                         root->val.shape_str());
    std::vector<Node*> order;
    topo_sort(root, order);
    for (Node* n : order)
        if (n != root.get()) n->ensure_grad();
    root->ensure_grad();
    root->grad.v[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn && (*it)->requires_grad) (*it)->backward_fn();
}

void zero_grad(const std::vector<Var>& params) {
    for (const auto& p : params) {
        p->ensure_grad();
        std::fill(p->grad.v.begin(), p->grad.v.end(), 0.0);
    }
}

Var matmul(const Var& a, const Var& b) {
    if (a->val.cols != b->val.rows)
        throw ShapeError("matmul shape mismatch " + a->val.shape_str() + " x " +
                         b->val.shape_str());
    const std::size_t n = a->val.rows, k = a->val.cols, m = b->val.cols;
    Tensor out(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = a->val.at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j)
                out.at(i, j) += av * b->val.at(p, j);
        }
    Var c = make_op(std::move(out), {a, b});
    Node* cn = c.get();
    c->backward_fn = [a, b, cn, n, k, m] {
        if (a->requires_grad) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    double g = cn->grad.at(i, j);
                    if (g == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p)
                        a->grad.at(i, p) += g * b->val.at(p, j);
                }
        }
        if (b->requires_grad) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double av = a->val.at(i, p);
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < m; ++j)
                        b->grad.at(p, j) += av * cn->grad.at(i, j);
                }
        }
    };
    return c;
}

Var add(const Var& a, const Var& b) {
    if (a->val.rows != b->val.rows || a->val.cols != b->val.cols)
        throw ShapeError("add shape mismatch " + a->val.shape_str() + " vs " +
                         b->val.shape_str());
    Tensor out = a->val;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->val.v[i];
    Var c = make_op(std::move(out), {a, b});
    Node* cn = c.get();
    c->backward_fn = [a, b, cn] {
        if (a->requires_grad)
            for (std::size_t i = 0; i < cn->grad.v.size(); ++i)
                a->grad.v[i] += cn->grad.v[i];
        if (b->requires_grad)
            for (std::size_t i = 0; i < cn->grad.v.size(); ++i)
                b->grad.v[i] += cn->grad.v[i];
    };
    return c;
}

Var add_scaled(const Var& a, const Var& b, double s) {
    if (a->val.rows != b->val.rows || a->val.cols != b->val.cols)
        throw ShapeError("add_scaled shape mismatch " + a->val.shape_str() +
                         " vs " + b->val.shape_str());
    Tensor out = a->val;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += s * b->val.v[i];
    Var c = make_op(std::move(out), {a, b});
    Node* cn = c.get();
    c->backward_fn = [a, b, cn, s] {
        if (a->requires_grad)
            for (std::size_t i = 0; i < cn->grad.v.size(); ++i)
                a->grad.v[i] += cn->grad.v[i];
        if (b->requires_grad)
            for (std::size_t i = 0; i < cn->grad.v.size(); ++i)
                b->grad.v[i] += s * cn->grad.v[i];
    };
    return c;
}

Var add_rowvec(const Var& m, const Var& bias) {
    if (bias->val.rows != 1 || bias->val.cols != m->val.cols)
        throw ShapeError("add_rowvec: bias " + bias->val.shape_str() +
                         " does not broadcast over " + m->val.shape_str());
    Tensor out = m->val;
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j)
            out.at(i, j) += bias->val.at(0, j);
    Var c = make_op(std::move(out), {m, bias});
    Node* cn = c.get();
    c->backward_fn = [m, bias, cn] {
        if (m->requires_grad)
            for (std::size_t i = 0; i < cn->grad.v.size(); ++i)
                m->grad.v[i] += cn->grad.v[i];
        if (bias->requires_grad)
            for (std::size_t i = 0; i < cn->grad.rows; ++i)
                for (std::size_t j = 0; j < cn->grad.cols; ++j)
                    bias->grad.at(0, j) += cn->grad.at(i, j);
    };
    return c;
}

Var scale(const Var& a, double s) {
    Tensor out = a->val;
    for (double& v : out.v) v *= s;
    Var c = make_op(std::move(out), {a});
    Node* cn = c.get();
    c->backward_fn = [a, cn, s] {
        if (a->requires_grad)
            for (std::size_t i = 0; i < cn->grad.v.size(); ++i)
                a->grad.v[i] += s * cn->grad.v[i];
    };
    return c;
}

Var transpose(const Var& a) {
    Tensor out(a->val.cols, a->val.rows);
    for (std::size_t i = 0; i < a->val.rows; ++i)
        for (std::size_t j = 0; j < a->val.cols; ++j)
            out.at(j, i) = a->val.at(i, j);
    Var c = make_op(std::move(out), {a});
    Node* cn = c.get();
    c->backward_fn = [a, cn] {
        if (!a->requires_grad) return;
        for (std::size_t i = 0; i < cn->grad.rows; ++i)
            for (std::size_t j = 0; j < cn->grad.cols; ++j)
                a->grad.at(j, i) += cn->grad.at(i, j);
    };
    return c;
}

Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) {
    if (c0 >= c1 || c1 > a->val.cols)
        throw ShapeError("slice_cols [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") out of range for " +
                         a->val.shape_str());
    Tensor out(a->val.rows, c1 - c0);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j)
            out.at(i, j) = a->val.at(i, c0 + j);
    Var c = make_op(std::move(out), {a});
    Node* cn = c.get();
    c->backward_fn = [a, cn, c0] {
        if (!a->requires_grad) return;
        for (std::size_t i = 0; i < cn->grad.rows; ++i)
            for (std::size_t j = 0; j < cn->grad.cols; ++j)
                a->grad.at(i, c0 + j) += cn->grad.at(i, j);
    };
    return c;
}

Var slice_rows(const Var& a, std::size_t r0, std::size_t r1) {
    if (r0 >= r1 || r1 > a->val.rows)
        throw ShapeError("slice_rows [" + std::to_string(r0) + "," +
                         std::to_string(r1) + ") out of range for " +
                         a->val.shape_str());
    Tensor out(r1 - r0, a->val.cols);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j)
            out.at(i, j) = a->val.at(r0 + i, j);
    Var c = make_op(std::move(out), {a});
    Node* cn = c.get();
    c->backward_fn = [a, cn, r0] {
        if (!a->requires_grad) return;
        for (std::size_t i = 0; i < cn->grad.rows; ++i)
            for (std::size_t j = 0; j < cn->grad.cols; ++j)
                a->grad.at(r0 + i, j) += cn->grad.at(i, j);
    };
    return c;
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    std::size_t rows = parts[0]->val.rows, cols = 0;
    for (const auto& p : parts) {
        if (p->val.rows != rows)
            throw ShapeError("concat_cols: row mismatch");
        cols += p->val.cols;
    }
    Tensor out(rows, cols);
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < p->val.cols; ++j)
                out.at(i, off + j) = p->val.at(i, j);
        off += p->val.cols;
    }
    Var c = make_op(std::move(out), parts);
    Node* cn = c.get();
    c->backward_fn = [parts, cn] {
        std::size_t off = 0;
        for (const auto& p : parts) {
            if (p->requires_grad)
                for (std::size_t i = 0; i < p->val.rows; ++i)
                    for (std::size_t j = 0; j < p->val.cols; ++j)
                        p->grad.at(i, j) += cn->grad.at(i, off + j);
            off += p->val.cols;
        }
    };
    return c;
}

Var softmax_rows(const Var& a, const std::vector<int>& mask) {
    if (!mask.empty() && mask.size() != a->val.cols)
        throw ShapeError("softmax_rows: mask length " +
                         std::to_string(mask.size()) + " vs cols " +
                         std::to_string(a->val.cols));
    auto valid = [&](std::size_t j) { return mask.empty() || mask[j] != 0; };
    Tensor out(a->val.rows, a->val.cols, 0.0);
    for (std::size_t i = 0; i < a->val.rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < a->val.cols; ++j)
            if (valid(j)) mx = std::max(mx, a->val.at(i, j));
        if (!std::isfinite(mx))
            throw ShapeError("softmax_rows: fully masked row " +
                             std::to_string(i));
        double sum = 0;
        for (std::size_t j = 0; j < a->val.cols; ++j)
            if (valid(j)) {
                out.at(i, j) = std::exp(a->val.at(i, j) - mx);
                sum += out.at(i, j);
            }
        for (std::size_t j = 0; j < a->val.cols; ++j)
            if (valid(j)) out.at(i, j) /= sum;
    }
    Var c = make_op(std::move(out), {a});
    Node* cn = c.get();
    std::vector<int> mask_copy = mask;
    c->backward_fn = [a, cn, mask_copy] {
        if (!a->requires_grad) return;
        auto valid = [&](std::size_t j) {
            return mask_copy.empty() || mask_copy[j] != 0;
        };
        for (std::size_t i = 0; i < cn->val.rows; ++i) {
            double dot = 0;
            for (std::size_t j = 0; j < cn->val.cols; ++j)
                if (valid(j)) dot += cn->grad.at(i, j) * cn->val.at(i, j);
            for (std::size_t j = 0; j < cn->val.cols; ++j)
                if (valid(j))
                    a->grad.at(i, j) +=
                        cn->val.at(i, j) * (cn->grad.at(i, j) - dot);
        }
    };
    return c;
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const std::size_t R = x->val.rows, C = x->val.cols;
    if (C < 2) throw ShapeError("layer_norm needs feature dimension >= 2");
    if (gamma->val.rows != 1 || gamma->val.cols != C || beta->val.rows != 1 ||
        beta->val.cols != C)
        throw ShapeError("layer_norm: gamma/beta must be 1x" +
                         std::to_string(C));
    Tensor out(R, C);
    std::vector<double> inv_sigma(R);
    Tensor xhat(R, C);
    for (std::size_t i = 0; i < R; ++i) {
        double mu = 0;
        for (std::size_t j = 0; j < C; ++j) mu += x->val.at(i, j);
        mu /= static_cast<double>(C);
        double var = 0;
        for (std::size_t j = 0; j < C; ++j) {
            double d = x->val.at(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(C);
        inv_sigma[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < C; ++j) {
            xhat.at(i, j) = (x->val.at(i, j) - mu) * inv_sigma[i];
            out.at(i, j) = xhat.at(i, j) * gamma->val.at(0, j) +
                           beta->val.at(0, j);
        }
    }
    Var c = make_op(std::move(out), {x, gamma, beta});
    Node* cn = c.get();
    auto xhat_p = std::make_shared<Tensor>(std::move(xhat));
    auto inv_sigma_p = std::make_shared<std::vector<double>>(std::move(inv_sigma));
    c->backward_fn = [x, gamma, beta, cn, xhat_p, inv_sigma_p] {
        const std::size_t R = cn->val.rows, C = cn->val.cols;
        for (std::size_t i = 0; i < R; ++i) {
            double mean_dxhat = 0, mean_dxhat_xhat = 0;
            for (std::size_t j = 0; j < C; ++j) {
                double dxhat = cn->grad.at(i, j) * gamma->val.at(0, j);
                mean_dxhat += dxhat;
                mean_dxhat_xhat += dxhat * xhat_p->at(i, j);
            }
            mean_dxhat /= static_cast<double>(C);
            mean_dxhat_xhat /= static_cast<double>(C);
            for (std::size_t j = 0; j < C; ++j) {
                double g = cn->grad.at(i, j);
                if (gamma->requires_grad)
                    gamma->grad.at(0, j) += g * xhat_p->at(i, j);
                if (beta->requires_grad) beta->grad.at(0, j) += g;
                if (x->requires_grad) {
                    double dxhat = g * gamma->val.at(0, j);
                    x->grad.at(i, j) +=
                        (*inv_sigma_p)[i] *
                        (dxhat - mean_dxhat - xhat_p->at(i, j) * mean_dxhat_xhat);
                }
            }
        }
    };
    return c;
}

Var gelu(const Var& x) {
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double a = 0.044715;
    Tensor out = x->val;
    for (double& v : out.v) {
        double t = std::tanh(k * (v + a * v * v * v));
        v = 0.5 * v * (1.0 + t);
    }
    Var c = make_op(std::move(out), {x});
    Node* cn = c.get();
    c->backward_fn = [x, cn] {
        if (!x->requires_grad) return;
        constexpr double k = 0.7978845608028654;
        constexpr double a = 0.044715;
        for (std::size_t i = 0; i < cn->grad.v.size(); ++i) {
            double v = x->val.v[i];
            double u = k * (v + a * v * v * v);
            double t = std::tanh(u);
            double du = k * (1.0 + 3.0 * a * v * v);
            double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
            x->grad.v[i] += cn->grad.v[i] * d;
        }
    };
    return c;
}

Var gather_rows(const Var& emb, const std::vector<int>& ids) {
    Tensor out(ids.size(), emb->val.cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= emb->val.rows)
            throw ShapeError("gather_rows: id " + std::to_string(ids[i]) +
                             " out of range for " + emb->val.shape_str());
        for (std::size_t j = 0; j < out.cols; ++j)
            out.at(i, j) = emb->val.at(static_cast<std::size_t>(ids[i]), j);
    }
    Var c = make_op(std::move(out), {emb});
    Node* cn = c.get();
    std::vector<int> ids_copy = ids;
    c->backward_fn = [emb, cn, ids_copy] {
        if (!emb->requires_grad) return;
        for (std::size_t i = 0; i < ids_copy.size(); ++i)
            for (std::size_t j = 0; j < cn->grad.cols; ++j)
                emb->grad.at(static_cast<std::size_t>(ids_copy[i]), j) +=
                    cn->grad.at(i, j);
    };
    return c;
}

Var broadcast_row(const Var& row, std::size_t n_rows) {
    if (row->val.rows != 1)
        throw ShapeError("broadcast_row expects 1xC, got " +
                         row->val.shape_str());
    Tensor out(n_rows, row->val.cols);
    for (std::size_t i = 0; i < n_rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j)
            out.at(i, j) = row->val.at(0, j);
    Var c = make_op(std::move(out), {row});
    Node* cn = c.get();
    c->backward_fn = [row, cn] {
        if (!row->requires_grad) return;
        for (std::size_t i = 0; i < cn->grad.rows; ++i)
            for (std::size_t j = 0; j < cn->grad.cols; ++j)
                row->grad.at(0, j) += cn->grad.at(i, j);
    };
    return c;
}

Var cross_entropy(const Var& logits, const std::vector<int>& targets,
                  const std::vector<std::size_t>& positions) {
    if (positions.empty())
        throw std::invalid_argument("cross_entropy: empty position set");
    if (targets.size() != positions.size())
        throw std::invalid_argument("cross_entropy: targets/positions mismatch");
    const std::size_t C = logits->val.cols;
    auto probs = std::make_shared<Tensor>(positions.size(), C);
    double loss = 0;
    for (std::size_t k = 0; k < positions.size(); ++k) {
        std::size_t r = positions[k];
        if (r >= logits->val.rows)
            throw ShapeError("cross_entropy: position out of range");
        int tgt = targets[k];
        if (tgt < 0 || static_cast<std::size_t>(tgt) >= C)
            throw std::invalid_argument("cross_entropy: target id out of range");
        double mx = logits->val.at(r, 0);
        for (std::size_t j = 1; j < C; ++j)
            mx = std::max(mx, logits->val.at(r, j));
        double sum = 0;
        for (std::size_t j = 0; j < C; ++j) {
            probs->at(k, j) = std::exp(logits->val.at(r, j) - mx);
            sum += probs->at(k, j);
        }
        for (std::size_t j = 0; j < C; ++j) probs->at(k, j) /= sum;
        loss -= std::log(probs->at(k, static_cast<std::size_t>(tgt)));
    }
    loss /= static_cast<double>(positions.size());
    Var c = make_op(Tensor(1, 1, loss), {logits});
    Node* cn = c.get();
    std::vector<int> tg = targets;
    std::vector<std::size_t> pos = positions;
    c->backward_fn = [logits, cn, probs, tg, pos] {
        if (!logits->requires_grad) return;
        double g = cn->grad.v[0] / static_cast<double>(pos.size());
        for (std::size_t k = 0; k < pos.size(); ++k)
            for (std::size_t j = 0; j < probs->cols; ++j) {
                double p = probs->at(k, j);
                double onehot = (static_cast<std::size_t>(tg[k]) == j) ? 1.0 : 0.0;
                logits->grad.at(pos[k], j) += g * (p - onehot);
            }
    };
    return c;
}

Var mse_loss(const Var& pred, const Tensor& target) {
    if (pred->val.rows != target.rows || pred->val.cols != target.cols)
        throw ShapeError("mse_loss shape mismatch " + pred->val.shape_str() +
                         " vs " + target.shape_str());
    const double n = static_cast<double>(pred->val.size());
    double loss = 0;
    for (std::size_t i = 0; i < pred->val.v.size(); ++i) {
        double d = pred->val.v[i] - target.v[i];
        loss += d * d;
    }
    loss /= n;
    Var c = make_op(Tensor(1, 1, loss), {pred});
    Node* cn = c.get();
    auto tgt = std::make_shared<Tensor>(target);
    c->backward_fn = [pred, cn, tgt] {
        if (!pred->requires_grad) return;
        double g = cn->grad.v[0];
        const double n = static_cast<double>(pred->val.size());
        for (std::size_t i = 0; i < pred->val.v.size(); ++i)
            pred->grad.v[i] +=
                g * 2.0 * (pred->val.v[i] - tgt->v[i]) / n;
    };
    return c;
}

double grad_check(const std::function<Var()>& loss_fn,
                  const std::vector<Var>& params, double eps) {
    zero_grad(params);
    Var loss = loss_fn();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p->grad.v);

    double max_rel = 0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (std::size_t i = 0; i < p->val.v.size(); ++i) {
            double orig = p->val.v[i];
            p->val.v[i] = orig + eps;
            double fp = loss_fn()->val.v[0];
            p->val.v[i] = orig - eps;
            double fm = loss_fn()->val.v[0];
            p->val.v[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw std::runtime_error("grad_check: non-finite loss");
            double numeric = (fp - fm) / (2.0 * eps);
            double a = analytic[pi][i];
            double rel = std::fabs(a - numeric) /
                         std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace hea::nn
