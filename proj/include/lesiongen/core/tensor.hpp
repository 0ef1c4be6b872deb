#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lesiongen::nn {

// Reverse-mode autodiff over dense float tensors. Graphs are built per sample
// (no batch dimension); data parallelism happens one level up, where per-sample
// gradients are reduced in index order so results do not depend on thread count.

class Tensor;

struct Node {
    std::vector<int> shape;
    std::vector<float> value;
    std::vector<float> grad;  // allocated lazily by backward()
    bool requires_grad = false;
    std::vector<Tensor> parents;
    std::function<void(Node&)> backprop;  // adds this->grad into parents
    std::vector<float> saved;             // op scratch kept for backward

    size_t numel() const { return value.size(); }
    void ensure_grad();
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    bool defined() const { return n_ != nullptr; }
    Node* node() const { return n_.get(); }
    const std::vector<int>& shape() const { return n_->shape; }
    size_t numel() const { return n_->numel(); }
    std::vector<float>& data() const { return n_->value; }
    std::vector<float>& grad() const { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }
    float item() const { return n_->value.at(0); }

private:
    std::shared_ptr<Node> n_;
};

// While a guard is alive, new ops record no parents/backward closures.
// Used for inference paths (sampling, evaluation).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// ---- construction ----
Tensor constant(std::vector<int> shape, float fill = 0.f);
Tensor from_vec(std::vector<int> shape, std::vector<float> values, bool requires_grad = false);
Tensor leaf(std::vector<int> shape, std::vector<float> values);  // requires_grad = true

// ---- elementwise / shape ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor axpby(float alpha, const Tensor& a, float beta, const Tensor& b);
Tensor scale(const Tensor& a, float alpha);
Tensor add_scalar(const Tensor& a, float c);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor silu(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor reshape(const Tensor& a, std::vector<int> shape);

// ---- CHW image ops ----
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor upsample_nearest(const Tensor& x, int factor);
Tensor avg_pool(const Tensor& x, int factor);
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  int groups, float eps = 1e-5f);
Tensor slice_channels(const Tensor& x, int c0, int c1);           // [c0, c1)
Tensor concat_channels(const Tensor& a, const Tensor& b);         // along axis 0 of CHW
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);     // bias shape [C]
Tensor chw_to_tokens(const Tensor& x);                            // [C,H,W] -> [H*W, C]
Tensor tokens_to_chw(const Tensor& t, int h, int w);              // inverse
Tensor global_avg_pool(const Tensor& x);                          // [C,H,W] -> [C]

// ---- conv-weight assembly (channel surgery keeps new slices as separate leaves) ----
// a: [Co, CiA, kh, kw], b: [Co, CiB, kh, kw] -> [Co, CiA+CiB, kh, kw]
Tensor concat_conv_in(const Tensor& a, const Tensor& b, int co, int ci_a, int ci_b, int kh, int kw);
// a: [CoA, Ci, kh, kw], b: [CoB, Ci, kh, kw] -> [CoA+CoB, Ci, kh, kw]; plain concat works for bias too
Tensor concat_axis0(const Tensor& a, const Tensor& b);

// ---- matrix ops (row-major 2-D) ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add_row_bias(const Tensor& x, const Tensor& bias);  // x [M,N] + bias [N] per row
Tensor softmax_rows(const Tensor& x);

// ---- losses (scalar outputs) ----
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor bce_with_logits_loss(const Tensor& logits, const Tensor& targets01);
Tensor soft_dice_loss(const Tensor& logits, const Tensor& targets01, float smooth);
Tensor softmax_cross_entropy(const Tensor& logits, int label);
Tensor mean_all(const Tensor& x);

// Run reverse-mode accumulation from a scalar root.
void backward(const Tensor& root);

}  // namespace lesiongen::nn
