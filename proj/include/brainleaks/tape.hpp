#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "brainleaks/tensor.hpp"

namespace brainleaks {

// Reverse-mode differentiation over a flat record of op nodes. Nodes are
// appended in execution order, so inputs always precede their consumers and
// the backward pass is a single reverse sweep that visits each node once.
//
// A tape is single-owner: build one forward graph, run backward() at most
// once, then discard. Parallelism happens across tapes, never within one.
class Tape {
 public:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatMul,       // a[m,k] * b[k,n]
    kLinear,       // x[B,in] * w[out,in]^T + bias[out]
    kAdd,
    kSub,
    kMul,          // elementwise
    kAffine,       // scale * x + shift
    kConv2d,       // x[(B,)C,H,W] valid conv with k[Cout,C,kh,kw] + bias[Cout]
    kMaxPool2d,    // 2x2, stride 2
    kRelu,
    kSigmoid,
    kSpike,        // Heaviside(v - theta) forward, fast-sigmoid derivative backward
    kLifMembrane,  // drive + alpha * prev_membrane - theta * prev_spike
    kReshape,
    kSumAll,       // -> [1]
    kSoftmaxCross, // per-row -log softmax(logits)[label] -> [B]
    kSoftmaxProb,  // per-row softmax(logits)[label] -> [B]
  };

  struct Node {
    Op op;
    std::array<int, 3> in{-1, -1, -1};
    Tensor value;
    Tensor grad;                 // allocated by backward()
    std::vector<int> labels;    // class labels / pooling argmax indices
    double a = 0.0;              // op parameter (scale, alpha, theta, ...)
    double b = 0.0;              // op parameter (shift, slope, ...)
    bool soft = false;           // kSpike: smooth fast-sigmoid forward
  };

  int leaf(Tensor value);
  int leaf(const Matrix& m) { return leaf(Tensor::from_matrix(m)); }

  int size() const { return static_cast<int>(nodes_.size()); }
  const Tensor& value(int id) const { return node(id).value; }

  // Gradient of the backward root w.r.t. node `id`. Only valid after backward().
  const Tensor& grad(int id) const;

  // Seeds `root` with `seed` (same shape as its value) and accumulates
  // adjoints into every node that feeds it. May be called once per tape.
  void backward(int root, Tensor seed);
  void backward(int root);  // scalar root, seed = 1

  bool backward_done() const { return backward_done_; }

  const Node& node(int id) const;

  // --- op builders ---
  int matmul(int a, int b);
  int linear(int x, int w, int bias);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int affine(int x, double scale, double shift);
  int conv2d(int x, int kernels, int bias);
  int maxpool2d(int x);
  int relu(int x);
  int sigmoid(int x);
  int spike(int v, double theta, double slope, bool soft_mode);
  int lif_membrane(int drive, int prev_membrane, int prev_spike, double alpha, double theta);
  int reshape(int x, Shape shape);
  int sum_all(int x);
  int softmax_cross(int logits, std::vector<int> labels);
  int softmax_prob(int logits, std::vector<int> labels);

 private:
  int push(Node n);
  Node& mutable_node(int id);
  void check_id(int id) const;
  void dispatch_backward(int id);

  std::vector<Node> nodes_;
  std::vector<char> reached_;
  bool backward_done_ = false;
};

// Fast-sigmoid surrogate derivative, 1 / (1 + slope * |v - theta|)^2.
double fast_sigmoid_derivative(double v, double theta, double slope);

}  // namespace brainleaks
