#pragma once
// Dense 64-bit float kernels with exact analytic gradients, composed on a
// recorded tape (reverse mode, no external autodiff), plus a central
// finite-difference gradient checker.
//
// All tensors are 2D row-major; vectors are 1xN, scalars 1x1.

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hea::nn {

class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Tensor {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), v(r * c, fill) {}
    static Tensor row(std::vector<double> data);

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    std::size_t size() const { return v.size(); }
    std::string shape_str() const;
};

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad;  // same shape, allocated lazily on backward
    std::vector<Var> parents;
    std::function<void()> backward_fn;  // accumulates into parents' grads
    bool requires_grad = false;

    void ensure_grad();
};

/// Leaf that participates in gradients.
Var param(Tensor t);
/// Leaf treated as a constant.
Var constant(Tensor t);

/// Reverse pass from a 1x1 root; seeds d(root)/d(root) = 1.
void backward(const Var& root);
void zero_grad(const std::vector<Var>& params);

// ---- primitives (each with its exact backward rule) ----

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);            // same shape
Var add_rowvec(const Var& m, const Var& bias);  // bias 1xC broadcast over rows
Var scale(const Var& a, double s);
Var transpose(const Var& a);
Var slice_cols(const Var& a, std::size_t c0, std::size_t c1);
Var slice_rows(const Var& a, std::size_t r0, std::size_t r1);
Var concat_cols(const std::vector<Var>& parts);

/// Row-wise masked softmax with max subtraction. mask[j] == 0 columns get
/// weight 0; every row must keep at least one valid column.
Var softmax_rows(const Var& a, const std::vector<int>& mask);

/// Per-row normalization over the feature axis, then scale/shift.
/// gamma/beta are 1xC. Epsilon sits inside the std-dev denominator.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta,
               double eps = 1e-5);

/// tanh-approximation GELU, elementwise.
Var gelu(const Var& x);

/// Rows of `emb` gathered by id; backward scatter-adds.
Var gather_rows(const Var& emb, const std::vector<int>& ids);

/// 1xC row broadcast to RxC; backward sums over rows.
Var broadcast_row(const Var& row, std::size_t n_rows);

/// Mean over the listed rows of -log softmax(logits_row)[target]; 1x1.
Var cross_entropy(const Var& logits, const std::vector<int>& targets,
                  const std::vector<std::size_t>& positions);

/// Mean squared difference against a constant target; 1x1.
Var mse_loss(const Var& pred, const Tensor& target);

Var add_scaled(const Var& a, const Var& b, double s);  // a + s*b, same shape

// ---- gradient checking ----

/// Central finite differences over every coordinate of every parameter.
/// Returns the max relative error (|a-n|) / max(1e-8, |a|+|n|).
double grad_check(const std::function<Var()>& loss_fn,
                  const std::vector<Var>& params, double eps = 1e-5);

}  // namespace hea::nn
