#include "spice/gradcore.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spice::grad {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kTwoInvSqrtPi = 1.1283791670955125739;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_stable(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

Var Tape::alloc(Op op, uint32_t len, int32_t a, int32_t b, int32_t c) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.off = static_cast<uint32_t>(vals_.size());
  n.len = len;
  nodes_.push_back(n);
  vals_.resize(vals_.size() + len);
  return Var{static_cast<int32_t>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size())
    throw NumericalError("gradcore: invalid Var handle");
  return nodes_[static_cast<size_t>(v.id)];
}

std::span<double> Tape::mut_value(Var v) {
  const Node& n = node(v);
  return {vals_.data() + n.off, n.len};
}

std::span<double> Tape::mut_grad(int32_t id) {
  const Node& n = nodes_[static_cast<size_t>(id)];
  return {grads_.data() + n.off, n.len};
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = node(v);
  return {vals_.data() + n.off, n.len};
}

double Tape::val(Var v) const {
  const Node& n = node(v);
  if (n.len != 1) throw NumericalError("gradcore: val() on non-scalar node");
  return vals_[n.off];
}

uint32_t Tape::length(Var v) const { return node(v).len; }

std::span<const double> Tape::grad(Var v) const {
  if (!backward_done_) throw NumericalError("gradcore: grad() before backward()");
  const Node& n = node(v);
  return {grads_.data() + n.off, n.len};
}

void Tape::reset() {
  nodes_.clear();
  vals_.clear();
  grads_.clear();
  aux_doubles_.clear();
  backward_done_ = false;
}

Var Tape::leaf(std::span<const double> values) {
  Var v = alloc(Op::kLeaf, static_cast<uint32_t>(values.size()));
  std::copy(values.begin(), values.end(), mut_value(v).begin());
  return v;
}

Var Tape::leaf(double value) { return leaf(std::span<const double>(&value, 1)); }

Var Tape::binary(Op op, Var a, Var b) {
  const uint32_t la = length(a);
  const uint32_t lb = length(b);
  uint32_t lo = std::max(la, lb);
  if (la != lb && la != 1 && lb != 1)
    throw NumericalError("gradcore: shape mismatch in elementwise op");
  Var out = alloc(op, lo, a.id, b.id);
  auto va = value(a);
  auto vb = value(b);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < lo; ++i) {
    const double x = va[la == 1 ? 0 : i];
    const double y = vb[lb == 1 ? 0 : i];
    switch (op) {
      case Op::kAdd: vo[i] = x + y; break;
      case Op::kSub: vo[i] = x - y; break;
      case Op::kMul: vo[i] = x * y; break;
      case Op::kDiv: vo[i] = x / y; break;
      default: break;
    }
  }
  return out;
}

Var Tape::add(Var a, Var b) { return binary(Op::kAdd, a, b); }
Var Tape::sub(Var a, Var b) { return binary(Op::kSub, a, b); }
Var Tape::mul(Var a, Var b) { return binary(Op::kMul, a, b); }
Var Tape::div(Var a, Var b) { return binary(Op::kDiv, a, b); }

Var Tape::neg(Var x) {
  Var out = alloc(Op::kNeg, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i) vo[i] = -vx[i];
  return out;
}

Var Tape::relu(Var x) {
  Var out = alloc(Op::kRelu, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i) vo[i] = vx[i] > 0 ? vx[i] : 0.0;
  return out;
}

Var Tape::exp(Var x) {
  Var out = alloc(Op::kExp, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i) vo[i] = std::exp(vx[i]);
  return out;
}

Var Tape::log(Var x) {
  Var out = alloc(Op::kLog, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i) {
    if (!(vx[i] > 0.0)) throw NumericalError("gradcore: log of non-positive input");
    vo[i] = std::log(vx[i]);
  }
  return out;
}

Var Tape::sqrt(Var x) {
  Var out = alloc(Op::kSqrt, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i) {
    if (!(vx[i] >= 0.0)) throw NumericalError("gradcore: sqrt of negative input");
    vo[i] = std::sqrt(vx[i]);
  }
  return out;
}

Var Tape::tanh(Var x) {
  Var out = alloc(Op::kTanh, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i) vo[i] = std::tanh(vx[i]);
  return out;
}

Var Tape::erf(Var x) {
  Var out = alloc(Op::kErf, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i) vo[i] = std::erf(vx[i]);
  return out;
}

Var Tape::softplus(Var x) {
  Var out = alloc(Op::kSoftplus, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i) vo[i] = softplus_stable(vx[i]);
  return out;
}

Var Tape::gelu(Var x) {
  Var out = alloc(Op::kGelu, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i)
    vo[i] = 0.5 * vx[i] * (1.0 + std::erf(vx[i] * kInvSqrt2));
  return out;
}

Var Tape::softmax(Var x) {
  Var out = alloc(Op::kSoftmax, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  double mx = vx[0];
  for (double v : vx) mx = std::max(mx, v);
  double s = 0.0;
  for (uint32_t i = 0; i < vo.size(); ++i) {
    vo[i] = std::exp(vx[i] - mx);
    s += vo[i];
  }
  for (uint32_t i = 0; i < vo.size(); ++i) vo[i] /= s;
  return out;
}

Var Tape::cumsum(Var x) {
  Var out = alloc(Op::kCumsum, length(x), x.id);
  auto vx = value(x);
  auto vo = mut_value(out);
  double s = 0.0;
  for (uint32_t i = 0; i < vo.size(); ++i) {
    s += vx[i];
    vo[i] = s;
  }
  return out;
}

Var Tape::sum(Var x) {
  Var out = alloc(Op::kSum, 1, x.id);
  auto vx = value(x);
  double s = 0.0;
  for (double v : vx) s += v;
  mut_value(out)[0] = s;
  return out;
}

Var Tape::affine(Var w, Var b, Var x, uint32_t rows, uint32_t cols) {
  if (length(w) != rows * cols || length(b) != rows || length(x) != cols)
    throw NumericalError("gradcore: shape mismatch in affine");
  Var out = alloc(Op::kAffine, rows, x.id, w.id, b.id);
  nodes_.back().aux = rows;
  nodes_.back().aux2 = cols;
  auto vw = value(w);
  auto vb = value(b);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < rows; ++i) {
    double s = vb[i];
    const double* wr = vw.data() + static_cast<size_t>(i) * cols;
    for (uint32_t j = 0; j < cols; ++j) s += wr[j] * vx[j];
    vo[i] = s;
  }
  return out;
}

Var Tape::axpb(Var x, double alpha, double beta) {
  Var out = alloc(Op::kAxpb, length(x), x.id);
  nodes_.back().aux2 = static_cast<uint32_t>(aux_doubles_.size());
  aux_doubles_.push_back(alpha);
  aux_doubles_.push_back(beta);
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < vo.size(); ++i) vo[i] = alpha * vx[i] + beta;
  return out;
}

Var Tape::index(Var x, uint32_t i) {
  if (i >= length(x)) throw NumericalError("gradcore: index out of range");
  Var out = alloc(Op::kIndex, 1, x.id);
  nodes_.back().aux = i;
  mut_value(out)[0] = value(x)[i];
  return out;
}

Var Tape::slice(Var x, uint32_t start, uint32_t len) {
  if (start + len > length(x)) throw NumericalError("gradcore: slice out of range");
  Var out = alloc(Op::kSlice, len, x.id);
  nodes_.back().aux = start;
  auto vx = value(x);
  auto vo = mut_value(out);
  for (uint32_t i = 0; i < len; ++i) vo[i] = vx[start + i];
  return out;
}

void Tape::backward(Var root) {
  const Node& r = node(root);
  if (r.len != 1) throw NumericalError("gradcore: backward root must be scalar");
  grads_.assign(vals_.size(), 0.0);
  grads_[r.off] = 1.0;
  backward_done_ = true;

  // Nodes were created in topological order, so one reverse sweep visits each
  // node after all of its consumers.
  for (int32_t id = static_cast<int32_t>(nodes_.size()) - 1; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.op == Op::kLeaf) continue;
    const double* g = grads_.data() + n.off;
    const double* y = vals_.data() + n.off;
    auto ga = n.a >= 0 ? mut_grad(n.a) : std::span<double>{};
    auto va = n.a >= 0 ? value(Var{n.a}) : std::span<const double>{};
    switch (n.op) {
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv: {
        auto gb = mut_grad(n.b);
        auto vb = value(Var{n.b});
        const uint32_t la = static_cast<uint32_t>(va.size());
        const uint32_t lb = static_cast<uint32_t>(vb.size());
        for (uint32_t i = 0; i < n.len; ++i) {
          const uint32_t ia = la == 1 ? 0 : i;
          const uint32_t ib = lb == 1 ? 0 : i;
          switch (n.op) {
            case Op::kAdd:
              ga[ia] += g[i];
              gb[ib] += g[i];
              break;
            case Op::kSub:
              ga[ia] += g[i];
              gb[ib] -= g[i];
              break;
            case Op::kMul:
              ga[ia] += g[i] * vb[ib];
              gb[ib] += g[i] * va[ia];
              break;
            case Op::kDiv:
              ga[ia] += g[i] / vb[ib];
              gb[ib] -= g[i] * va[ia] / (vb[ib] * vb[ib]);
              break;
            default: break;
          }
        }
        break;
      }
      case Op::kNeg:
        for (uint32_t i = 0; i < n.len; ++i) ga[i] -= g[i];
        break;
      case Op::kRelu:
        for (uint32_t i = 0; i < n.len; ++i)
          if (va[i] > 0) ga[i] += g[i];
        break;
      case Op::kExp:
        for (uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * y[i];
        break;
      case Op::kLog:
        for (uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] / va[i];
        break;
      case Op::kSqrt:
        for (uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * 0.5 / y[i];
        break;
      case Op::kTanh:
        for (uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      case Op::kErf:
        for (uint32_t i = 0; i < n.len; ++i)
          ga[i] += g[i] * kTwoInvSqrtPi * std::exp(-va[i] * va[i]);
        break;
      case Op::kSoftplus:
        for (uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * sigmoid(va[i]);
        break;
      case Op::kGelu:
        for (uint32_t i = 0; i < n.len; ++i) {
          const double x = va[i];
          const double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
          const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
          ga[i] += g[i] * (phi + x * pdf);
        }
        break;
      case Op::kSoftmax: {
        double dot = 0.0;
        for (uint32_t i = 0; i < n.len; ++i) dot += g[i] * y[i];
        for (uint32_t i = 0; i < n.len; ++i) ga[i] += y[i] * (g[i] - dot);
        break;
      }
      case Op::kCumsum: {
        double acc = 0.0;
        for (int32_t i = static_cast<int32_t>(n.len) - 1; i >= 0; --i) {
          acc += g[static_cast<uint32_t>(i)];
          ga[static_cast<uint32_t>(i)] += acc;
        }
        break;
      }
      case Op::kSum:
        for (uint32_t i = 0; i < va.size(); ++i) ga[i] += g[0];
        break;
      case Op::kAffine: {
        const uint32_t rows = n.aux;
        const uint32_t cols = n.aux2;
        auto gw = mut_grad(n.b);
        auto vw = value(Var{n.b});
        auto gb = mut_grad(n.c);
        for (uint32_t i = 0; i < rows; ++i) {
          const double gi = g[i];
          gb[i] += gi;
          double* gwr = gw.data() + static_cast<size_t>(i) * cols;
          const double* wr = vw.data() + static_cast<size_t>(i) * cols;
          for (uint32_t j = 0; j < cols; ++j) {
            gwr[j] += gi * va[j];
            ga[j] += gi * wr[j];
          }
        }
        break;
      }
      case Op::kAxpb: {
        const double alpha = aux_doubles_[n.aux2];
        for (uint32_t i = 0; i < n.len; ++i) ga[i] += g[i] * alpha;
        break;
      }
      case Op::kIndex:
        ga[n.aux] += g[0];
        break;
      case Op::kSlice:
        for (uint32_t i = 0; i < n.len; ++i) ga[n.aux + i] += g[i];
        break;
      case Op::kLeaf:
        break;
    }
  }
}

Tensor& ParamStore::add(std::string name, std::vector<uint32_t> shape) {
  size_t count = 1;
  for (uint32_t s : shape) count *= s;
  Tensor t;
  t.name = std::move(name);
  t.shape = std::move(shape);
  t.data.assign(count, 0.0);
  t.m.assign(count, 0.0);
  t.v.assign(count, 0.0);
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

Tensor& ParamStore::at(std::string_view name) {
  for (auto& t : tensors_)
    if (t.name == name) return t;
  throw ConfigError("ParamStore: unknown tensor " + std::string(name));
}

const Tensor& ParamStore::at(std::string_view name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return t;
  throw ConfigError("ParamStore: unknown tensor " + std::string(name));
}

bool ParamStore::has(std::string_view name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return true;
  return false;
}

size_t ParamStore::param_count() const {
  size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> out;
  out.reserve(param_count());
  for (const auto& t : tensors_) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

void ParamStore::unflatten(std::span<const double> flat) {
  if (flat.size() != param_count())
    throw ConfigError("ParamStore: unflatten size mismatch");
  size_t off = 0;
  for (auto& t : tensors_) {
    std::copy(flat.begin() + static_cast<ptrdiff_t>(off),
              flat.begin() + static_cast<ptrdiff_t>(off + t.size()), t.data.begin());
    off += t.size();
  }
}

double gradient_check(const std::function<Var(Tape&, Var)>& fn,
                      std::span<const double> point, double step) {
  Tape tape;
  Var p = tape.leaf(point);
  Var root = fn(tape, p);
  if (!std::isfinite(tape.val(root)))
    throw NumericalError("gradient_check: non-finite function value");
  tape.backward(root);
  std::vector<double> analytic(tape.grad(p).begin(), tape.grad(p).end());

  std::vector<double> pt(point.begin(), point.end());
  auto eval = [&](std::span<const double> x) {
    Tape t;
    Var px = t.leaf(x);
    double v = t.val(fn(t, px));
    if (!std::isfinite(v))
      throw NumericalError("gradient_check: non-finite function value");
    return v;
  };

  double worst = 0.0;
  for (size_t i = 0; i < pt.size(); ++i) {
    const double orig = pt[i];
    pt[i] = orig + step;
    const double fp = eval(pt);
    pt[i] = orig - step;
    const double fm = eval(pt);
    pt[i] = orig;
    const double fd = (fp - fm) / (2.0 * step);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace spice::grad
