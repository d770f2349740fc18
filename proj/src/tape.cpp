#include "brainleaks/tape.hpp"

#include <cmath>
#include <string>

namespace brainleaks {

namespace {

struct ConvGeometry {
  Index batch, cin, h, w;       // input
  Index cout, kh, kw;           // kernels
  Index oh, ow;                 // output plane
  bool batched;                 // rank-4 input
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& k) {
  if (k.rank() != 4) throw DimensionError("conv2d: kernels must be rank-4, got " + shape_string(k.shape()));
  ConvGeometry g{};
  if (x.rank() == 3) {
    g.batched = false;
    g.batch = 1;
    g.cin = x.extent(0);
    g.h = x.extent(1);
    g.w = x.extent(2);
  } else if (x.rank() == 4) {
    g.batched = true;
    g.batch = x.extent(0);
    g.cin = x.extent(1);
    g.h = x.extent(2);
    g.w = x.extent(3);
  } else {
    throw DimensionError("conv2d: input must be rank-3 or rank-4, got " + shape_string(x.shape()));
  }
  g.cout = k.extent(0);
  g.kh = k.extent(2);
  g.kw = k.extent(3);
  if (k.extent(1) != g.cin) {
    throw DimensionError("conv2d: kernel channels " + std::to_string(k.extent(1)) +
                         " do not match input channels " + std::to_string(g.cin));
  }
  if (g.kh > g.h || g.kw > g.w) {
    throw DimensionError("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                         " larger than input " + std::to_string(g.h) + "x" + std::to_string(g.w));
  }
  g.oh = g.h - g.kh + 1;
  g.ow = g.w - g.kw + 1;
  return g;
}

// Patch matrix: one row per output pixel, one column per kernel tap.
RowMatrix im2col(const Tensor& x, const ConvGeometry& g) {
  const Index plane = g.oh * g.ow;
  RowMatrix cols(g.batch * plane, g.cin * g.kh * g.kw);
  const double* xd = x.data().data();
  for (Index b = 0; b < g.batch; ++b) {
    for (Index oy = 0; oy < g.oh; ++oy) {
      for (Index ox = 0; ox < g.ow; ++ox) {
        const Index row = b * plane + oy * g.ow + ox;
        double* out = cols.data() + row * cols.cols();
        for (Index c = 0; c < g.cin; ++c) {
          const double* base = xd + ((b * g.cin + c) * g.h + oy) * g.w + ox;
          for (Index ky = 0; ky < g.kh; ++ky) {
            for (Index kx = 0; kx < g.kw; ++kx) *out++ = base[ky * g.w + kx];
          }
        }
      }
    }
  }
  return cols;
}

}  // namespace

double fast_sigmoid_derivative(double v, double theta, double slope) {
  const double d = 1.0 + slope * std::abs(v - theta);
  return 1.0 / (d * d);
}

const Tape::Node& Tape::node(int id) const {
  check_id(id);
  return nodes_[static_cast<size_t>(id)];
}

Tape::Node& Tape::mutable_node(int id) {
  check_id(id);
  return nodes_[static_cast<size_t>(id)];
}

void Tape::check_id(int id) const {
  if (id < 0 || id >= size()) throw UsageError("tape: node id " + std::to_string(id) + " out of range");
}

int Tape::push(Node n) {
  n.value.require_finite("tape op");
  nodes_.push_back(std::move(n));
  return size() - 1;
}

int Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  return push(std::move(n));
}

const Tensor& Tape::grad(int id) const {
  if (!backward_done_) throw UsageError("tape: grad() before backward()");
  return node(id).grad;
}

int Tape::matmul(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || tb.rank() != 2) {
    throw DimensionError("matmul: operands must be rank-2, got " + shape_string(ta.shape()) +
                         " and " + shape_string(tb.shape()));
  }
  if (ta.extent(1) != tb.extent(0)) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(ta.shape()) + " vs " +
                         shape_string(tb.shape()));
  }
  Node n;
  n.op = Op::kMatMul;
  n.in = {a, b, -1};
  n.value = Tensor({ta.extent(0), tb.extent(1)});
  n.value.matrix().noalias() = ta.matrix() * tb.matrix();
  return push(std::move(n));
}

int Tape::linear(int x, int w, int bias) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  const Tensor& tb = value(bias);
  if (tx.rank() != 2 || tw.rank() != 2 || tb.rank() != 1) {
    throw DimensionError("linear: expected x[B,in], w[out,in], bias[out]");
  }
  if (tx.extent(1) != tw.extent(1) || tw.extent(0) != tb.extent(0)) {
    throw DimensionError("linear: shape mismatch " + shape_string(tx.shape()) + ", " +
                         shape_string(tw.shape()) + ", " + shape_string(tb.shape()));
  }
  Node n;
  n.op = Op::kLinear;
  n.in = {x, w, bias};
  n.value = Tensor({tx.extent(0), tw.extent(0)});
  n.value.matrix().noalias() = tx.matrix() * tw.matrix().transpose();
  n.value.matrix().rowwise() += tb.data().transpose();
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw DimensionError("add: shape mismatch " + shape_string(ta.shape()) + " vs " + shape_string(tb.shape()));
  }
  Node n;
  n.op = Op::kAdd;
  n.in = {a, b, -1};
  n.value = Tensor(ta.shape(), ta.data() + tb.data());
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw DimensionError("sub: shape mismatch " + shape_string(ta.shape()) + " vs " + shape_string(tb.shape()));
  }
  Node n;
  n.op = Op::kSub;
  n.in = {a, b, -1};
  n.value = Tensor(ta.shape(), ta.data() - tb.data());
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw DimensionError("mul: shape mismatch " + shape_string(ta.shape()) + " vs " + shape_string(tb.shape()));
  }
  Node n;
  n.op = Op::kMul;
  n.in = {a, b, -1};
  n.value = Tensor(ta.shape(), (ta.data().array() * tb.data().array()).matrix());
  return push(std::move(n));
}

int Tape::affine(int x, double scale, double shift) {
  const Tensor& tx = value(x);
  Node n;
  n.op = Op::kAffine;
  n.in = {x, -1, -1};
  n.a = scale;
  n.b = shift;
  n.value = Tensor(tx.shape(), (scale * tx.data().array() + shift).matrix());
  return push(std::move(n));
}

int Tape::conv2d(int x, int kernels, int bias) {
  const Tensor& tx = value(x);
  const Tensor& tk = value(kernels);
  const Tensor& tb = value(bias);
  const ConvGeometry g = conv_geometry(tx, tk);
  if (tb.rank() != 1 || tb.extent(0) != g.cout) {
    throw DimensionError("conv2d: bias must have one entry per output channel");
  }

  const Index plane = g.oh * g.ow;
  RowMatrix cols = im2col(tx, g);
  Eigen::Map<const RowMatrix> kmat(tk.data().data(), g.cout, g.cin * g.kh * g.kw);
  RowMatrix omat = cols * kmat.transpose();  // [B*plane, cout]

  Shape oshape = g.batched ? Shape{g.batch, g.cout, g.oh, g.ow} : Shape{g.cout, g.oh, g.ow};
  Tensor out(oshape);
  double* od = out.data().data();
  for (Index b = 0; b < g.batch; ++b) {
    for (Index co = 0; co < g.cout; ++co) {
      const double beta = tb[co];
      for (Index p = 0; p < plane; ++p) {
        od[(b * g.cout + co) * plane + p] = omat(b * plane + p, co) + beta;
      }
    }
  }
  Node n;
  n.op = Op::kConv2d;
  n.in = {x, kernels, bias};
  n.value = std::move(out);
  return push(std::move(n));
}

int Tape::maxpool2d(int x) {
  const Tensor& tx = value(x);
  Index batch = 1, cin, h, w;
  bool batched;
  if (tx.rank() == 3) {
    batched = false;
    cin = tx.extent(0); h = tx.extent(1); w = tx.extent(2);
  } else if (tx.rank() == 4) {
    batched = true;
    batch = tx.extent(0); cin = tx.extent(1); h = tx.extent(2); w = tx.extent(3);
  } else {
    throw DimensionError("maxpool2d: input must be rank-3 or rank-4");
  }
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("maxpool2d: extents must be even, got " + std::to_string(h) + "x" + std::to_string(w));
  }
  const Index oh = h / 2, ow = w / 2;
  Shape oshape = batched ? Shape{batch, cin, oh, ow} : Shape{cin, oh, ow};
  Tensor out(oshape);
  Node n;
  n.op = Op::kMaxPool2d;
  n.in = {x, -1, -1};
  n.labels.resize(static_cast<size_t>(out.size()));
  const double* xd = tx.data().data();
  double* od = out.data().data();
  Index oi = 0;
  for (Index bc = 0; bc < batch * cin; ++bc) {
    const Index base = bc * h * w;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox, ++oi) {
        // Row-major window order; ties keep the first maximal element.
        Index best = base + (2 * oy) * w + 2 * ox;
        double bv = xd[best];
        const Index cand[3] = {best + 1, best + w, best + w + 1};
        for (Index c : cand) {
          if (xd[c] > bv) { bv = xd[c]; best = c; }
        }
        od[oi] = bv;
        n.labels[static_cast<size_t>(oi)] = static_cast<int>(best);
      }
    }
  }
  n.value = std::move(out);
  return push(std::move(n));
}

int Tape::relu(int x) {
  const Tensor& tx = value(x);
  Node n;
  n.op = Op::kRelu;
  n.in = {x, -1, -1};
  n.value = Tensor(tx.shape(), tx.data().cwiseMax(0.0));
  return push(std::move(n));
}

int Tape::sigmoid(int x) {
  const Tensor& tx = value(x);
  Node n;
  n.op = Op::kSigmoid;
  n.in = {x, -1, -1};
  n.value = Tensor(tx.shape(), (1.0 / (1.0 + (-tx.data().array()).exp())).matrix());
  return push(std::move(n));
}

int Tape::spike(int v, double theta, double slope, bool soft_mode) {
  const Tensor& tv = value(v);
  Node n;
  n.op = Op::kSpike;
  n.in = {v, -1, -1};
  n.a = theta;
  n.b = slope;
  n.soft = soft_mode;
  Tensor out(tv.shape());
  if (soft_mode) {
    // Smooth stand-in whose exact derivative is the fast-sigmoid surrogate:
    // 0.5 + u / (1 + slope*|u|), u = v - theta. Stays in [0,1] for slope >= 2.
    auto u = tv.data().array() - theta;
    out.data() = (0.5 + u / (1.0 + slope * u.abs())).matrix();
  } else {
    out.data() = (tv.data().array() > theta).cast<double>().matrix();
  }
  n.value = std::move(out);
  return push(std::move(n));
}

int Tape::lif_membrane(int drive, int prev_membrane, int prev_spike, double alpha, double theta) {
  const Tensor& td = value(drive);
  Node n;
  n.op = Op::kLifMembrane;
  n.in = {drive, prev_membrane, prev_spike};
  n.a = alpha;
  n.b = theta;
  Tensor out(td.shape(), td.data());
  if (prev_membrane >= 0) {
    const Tensor& tm = value(prev_membrane);
    if (!tm.same_shape(td)) throw DimensionError("lif_membrane: previous membrane shape mismatch");
    out.data() += alpha * tm.data();
  }
  if (prev_spike >= 0) {
    const Tensor& ts = value(prev_spike);
    if (!ts.same_shape(td)) throw DimensionError("lif_membrane: previous spike shape mismatch");
    out.data() -= theta * ts.data();
  }
  n.value = std::move(out);
  return push(std::move(n));
}

int Tape::reshape(int x, Shape shape) {
  const Tensor& tx = value(x);
  if (shape_size(shape) != tx.size()) {
    throw DimensionError("reshape: size mismatch " + shape_string(tx.shape()) + " -> " + shape_string(shape));
  }
  Node n;
  n.op = Op::kReshape;
  n.in = {x, -1, -1};
  n.value = Tensor(std::move(shape), tx.data());
  return push(std::move(n));
}

int Tape::sum_all(int x) {
  Node n;
  n.op = Op::kSumAll;
  n.in = {x, -1, -1};
  n.value = Tensor::scalar(value(x).data().sum());
  return push(std::move(n));
}

namespace {

// Rows of per-class logits; rank-1 input is a single row.
Eigen::Map<const RowMatrix> logit_rows(const Tensor& t) {
  if (t.rank() == 1) return {t.data().data(), 1, t.extent(0)};
  if (t.rank() == 2) return {t.data().data(), t.extent(0), t.extent(1)};
  throw DimensionError("softmax: logits must be rank-1 or rank-2, got " + shape_string(t.shape()));
}

void check_labels(const std::vector<int>& labels, Index rows, Index classes) {
  if (static_cast<Index>(labels.size()) != rows) {
    throw DimensionError("softmax: expected one label per row");
  }
  if (classes < 2) throw DimensionError("softmax: need at least 2 classes");
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw IndexError("label " + std::to_string(y) + " out of range for " +
                       std::to_string(classes) + " classes");
    }
  }
}

}  // namespace

int Tape::softmax_cross(int logits, std::vector<int> labels) {
  const Tensor& tl = value(logits);
  auto rows = logit_rows(tl);
  check_labels(labels, rows.rows(), rows.cols());
  Tensor out({rows.rows()});
  for (Index r = 0; r < rows.rows(); ++r) {
    const auto z = rows.row(r);
    const double m = z.maxCoeff();
    const double lse = std::log((z.array() - m).exp().sum());
    out[r] = lse - (z[labels[static_cast<size_t>(r)]] - m);
  }
  Node n;
  n.op = Op::kSoftmaxCross;
  n.in = {logits, -1, -1};
  n.labels = std::move(labels);
  n.value = std::move(out);
  return push(std::move(n));
}

int Tape::softmax_prob(int logits, std::vector<int> labels) {
  const Tensor& tl = value(logits);
  auto rows = logit_rows(tl);
  check_labels(labels, rows.rows(), rows.cols());
  Tensor out({rows.rows()});
  for (Index r = 0; r < rows.rows(); ++r) {
    const auto z = rows.row(r);
    const double m = z.maxCoeff();
    Eigen::ArrayXd e = (z.array() - m).exp();
    out[r] = e[labels[static_cast<size_t>(r)]] / e.sum();
  }
  Node n;
  n.op = Op::kSoftmaxProb;
  n.in = {logits, -1, -1};
  n.labels = std::move(labels);
  n.value = std::move(out);
  return push(std::move(n));
}

void Tape::backward(int root) {
  if (value(root).size() != 1) {
    throw UsageError("tape: scalar backward on non-scalar root");
  }
  backward(root, Tensor(value(root).shape(), Vector::Ones(1)));
}

void Tape::backward(int root, Tensor seed) {
  check_id(root);
  if (backward_done_) throw UsageError("tape: backward() may run only once per tape");
  if (!seed.same_shape(value(root))) {
    throw DimensionError("tape: seed shape " + shape_string(seed.shape()) +
                         " does not match root value " + shape_string(value(root).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor(n.value.shape());
  reached_.assign(nodes_.size(), 0);
  mutable_node(root).grad.data() = seed.data();
  reached_[static_cast<size_t>(root)] = 1;
  for (int i = root; i >= 0; --i) {
    if (!reached_[static_cast<size_t>(i)]) continue;
    for (int in : nodes_[static_cast<size_t>(i)].in) {
      if (in >= 0) reached_[static_cast<size_t>(in)] = 1;
    }
    dispatch_backward(i);
  }
  backward_done_ = true;
}

void Tape::dispatch_backward(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const Tensor& g = n.grad;
  auto gin = [&](int slot) -> Tensor& { return nodes_[static_cast<size_t>(n.in[slot])].grad; };
  auto vin = [&](int slot) -> const Tensor& { return nodes_[static_cast<size_t>(n.in[slot])].value; };

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatMul: {
      gin(0).matrix().noalias() += g.matrix() * vin(1).matrix().transpose();
      gin(1).matrix().noalias() += vin(0).matrix().transpose() * g.matrix();
      break;
    }
    case Op::kLinear: {
      gin(0).matrix().noalias() += g.matrix() * vin(1).matrix();
      gin(1).matrix().noalias() += g.matrix().transpose() * vin(0).matrix();
      gin(2).data() += g.matrix().colwise().sum().transpose();
      break;
    }
    case Op::kAdd:
      gin(0).data() += g.data();
      gin(1).data() += g.data();
      break;
    case Op::kSub:
      gin(0).data() += g.data();
      gin(1).data() -= g.data();
      break;
    case Op::kMul:
      gin(0).data().array() += g.data().array() * vin(1).data().array();
      gin(1).data().array() += g.data().array() * vin(0).data().array();
      break;
    case Op::kAffine:
      gin(0).data() += n.a * g.data();
      break;
    case Op::kConv2d: {
      const Tensor& tx = vin(0);
      const Tensor& tk = vin(1);
      const ConvGeometry geo = conv_geometry(tx, tk);
      const Index plane = geo.oh * geo.ow;
      const Index taps = geo.cin * geo.kh * geo.kw;
      // Output adjoint as [B*plane, cout].
      RowMatrix gmat(geo.batch * plane, geo.cout);
      const double* gd = g.data().data();
      for (Index b = 0; b < geo.batch; ++b) {
        for (Index co = 0; co < geo.cout; ++co) {
          for (Index p = 0; p < plane; ++p) {
            gmat(b * plane + p, co) = gd[(b * geo.cout + co) * plane + p];
          }
        }
      }
      Eigen::Map<const RowMatrix> kmat(tk.data().data(), geo.cout, taps);
      RowMatrix cols = im2col(tx, geo);
      // Kernel and bias adjoints.
      Eigen::Map<RowMatrix> gk(gin(1).data().data(), geo.cout, taps);
      gk.noalias() += gmat.transpose() * cols;
      gin(2).data() += gmat.colwise().sum().transpose();
      // Input adjoint: scatter the patch adjoints back (col2im).
      RowMatrix gcols = gmat * kmat;
      double* gx = gin(0).data().data();
      for (Index b = 0; b < geo.batch; ++b) {
        for (Index oy = 0; oy < geo.oh; ++oy) {
          for (Index ox = 0; ox < geo.ow; ++ox) {
            const Index row = b * plane + oy * geo.ow + ox;
            const double* src = gcols.data() + row * taps;
            for (Index c = 0; c < geo.cin; ++c) {
              double* base = gx + ((b * geo.cin + c) * geo.h + oy) * geo.w + ox;
              for (Index ky = 0; ky < geo.kh; ++ky) {
                for (Index kx = 0; kx < geo.kw; ++kx) base[ky * geo.w + kx] += *src++;
              }
            }
          }
        }
      }
      break;
    }
    case Op::kMaxPool2d: {
      double* gx = gin(0).data().data();
      const double* gd = g.data().data();
      for (Index i = 0; i < g.size(); ++i) {
        gx[n.labels[static_cast<size_t>(i)]] += gd[i];
      }
      break;
    }
    case Op::kRelu:
      gin(0).data().array() += g.data().array() * (vin(0).data().array() > 0.0).cast<double>();
      break;
    case Op::kSigmoid:
      gin(0).data().array() += g.data().array() * n.value.data().array() * (1.0 - n.value.data().array());
      break;
    case Op::kSpike: {
      auto u = (vin(0).data().array() - n.a).abs();
      gin(0).data().array() += g.data().array() / (1.0 + n.b * u).square();
      break;
    }
    case Op::kLifMembrane: {
      gin(0).data() += g.data();
      if (n.in[1] >= 0) gin(1).data() += n.a * g.data();
      if (n.in[2] >= 0) gin(2).data() -= n.b * g.data();
      break;
    }
    case Op::kReshape:
      gin(0).data() += g.data();
      break;
    case Op::kSumAll:
      gin(0).data().array() += g[0];
      break;
    case Op::kSoftmaxCross: {
      auto rows = logit_rows(vin(0));
      Eigen::Map<RowMatrix> gl(gin(0).data().data(), rows.rows(), rows.cols());
      for (Index r = 0; r < rows.rows(); ++r) {
        const auto z = rows.row(r);
        const double m = z.maxCoeff();
        Eigen::ArrayXd p = (z.array() - m).exp();
        p /= p.sum();
        gl.row(r) += g[r] * p.matrix().transpose();
        gl(r, n.labels[static_cast<size_t>(r)]) -= g[r];
      }
      break;
    }
    case Op::kSoftmaxProb: {
      auto rows = logit_rows(vin(0));
      Eigen::Map<RowMatrix> gl(gin(0).data().data(), rows.rows(), rows.cols());
      for (Index r = 0; r < rows.rows(); ++r) {
        const auto z = rows.row(r);
        const double m = z.maxCoeff();
        Eigen::ArrayXd p = (z.array() - m).exp();
        p /= p.sum();
        const int y = n.labels[static_cast<size_t>(r)];
        const double py = p[y];
        gl.row(r) -= (g[r] * py) * p.matrix().transpose();
        gl(r, y) += g[r] * py;
      }
      break;
    }
  }
}

}  // namespace brainleaks
