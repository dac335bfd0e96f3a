#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spice/errors.hpp"

namespace spice::grad {

// Handle into a Tape. Cheap to copy; only meaningful with the tape that
// created it.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kRelu,
  kExp,
  kLog,
  kSqrt,
  kTanh,
  kErf,
  kSoftplus,
  kGelu,
  kSoftmax,
  kCumsum,
  kSum,
  kAffine,
  kAxpb,
  kIndex,
  kSlice,
};

// Reverse-mode tape over vector-valued nodes. Values live in one arena so a
// batch graph can be rebuilt every step without churning the allocator.
// A tape is single-use: build the forward graph, call backward once, reset.
class Tape {
 public:
  Var leaf(std::span<const double> values);
  Var leaf(double value);

  // Elementwise binary ops; one operand may be a scalar (length 1), which
  // broadcasts against the other.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);

  Var neg(Var x);
  Var relu(Var x);  // max(x, 0); subgradient 0 at exactly 0
  Var exp(Var x);
  Var log(Var x);  // input must be strictly positive
  Var sqrt(Var x);
  Var tanh(Var x);
  Var erf(Var x);
  Var softplus(Var x);
  Var gelu(Var x);  // exact erf form

  Var softmax(Var x);  // max-subtracted
  Var cumsum(Var x);
  Var sum(Var x);  // scalar result

  // y = W x + b with W a (rows x cols) leaf stored row-major flat and b a
  // length-rows vector.
  Var affine(Var w, Var b, Var x, uint32_t rows, uint32_t cols);

  // y_i = alpha * x_i + beta for compile-time constants alpha, beta.
  Var axpb(Var x, double alpha, double beta);

  Var index(Var x, uint32_t i);               // scalar element
  Var slice(Var x, uint32_t start, uint32_t len);

  std::span<const double> value(Var v) const;
  double val(Var v) const;  // requires length 1
  uint32_t length(Var v) const;

  // Seeds the scalar root with adjoint 1 and accumulates adjoints into every
  // node in one reverse sweep.
  void backward(Var root);
  std::span<const double> grad(Var v) const;

  void reset();
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    int32_t a = -1;
    int32_t b = -1;
    int32_t c = -1;
    uint32_t off = 0;
    uint32_t len = 0;
    uint32_t aux = 0;   // op-specific: index, slice start, affine rows
    uint32_t aux2 = 0;  // affine cols / index into aux_doubles_
  };

  Var alloc(Op op, uint32_t len, int32_t a = -1, int32_t b = -1, int32_t c = -1);
  const Node& node(Var v) const;
  std::span<double> mut_value(Var v);
  std::span<double> mut_grad(int32_t id);
  Var binary(Op op, Var a, Var b);

  std::vector<Node> nodes_;
  std::vector<double> vals_;
  std::vector<double> grads_;
  std::vector<double> aux_doubles_;
  bool backward_done_ = false;
};

// Named flat parameter tensors with AdamW moment buffers.
struct Tensor {
  std::string name;
  std::vector<uint32_t> shape;
  std::vector<double> data;
  std::vector<double> m;  // first moment, zero-initialized
  std::vector<double> v;  // second moment, zero-initialized
  size_t size() const { return data.size(); }
};

class ParamStore {
 public:
  Tensor& add(std::string name, std::vector<uint32_t> shape);
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  bool has(std::string_view name) const;
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  size_t param_count() const;

  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

 private:
  std::vector<Tensor> tensors_;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// `fn` receives a fresh tape and a leaf holding the parameter vector and must
// return a scalar root.
double gradient_check(const std::function<Var(Tape&, Var)>& fn,
                      std::span<const double> point, double step);

}  // namespace spice::grad
