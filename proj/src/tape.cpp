#include "pvae/tape.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace pvae {

namespace {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kMul: return "elementwise-multiply";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSoftmax: return "softmax";
    case Op::kEmbed: return "embedding-lookup";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kScale: return "scalar-scale";
  }
  return "?";
}

void require_rank2(const Tensor& t, const char* what) {
  if (t.rank() > 2)
    throw ShapeError(std::string(what) + ": rank > 2 not supported");
}

// true when `b` is a row vector broadcastable over the rows of matrix `a`
bool row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && a.cols() == b.cols();
}

}  // namespace

NodeId Tape::emit(Node n) {
  if (!n.value.all_finite())
    throw NonFiniteError(std::string("non-finite result in ") + op_name(n.op));
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  return emit(std::move(n));
}

NodeId matmul(Tape& t, NodeId a, NodeId b) {
  const Tensor& va = t.value(a);
  const Tensor& vb = t.value(b);
  if (va.rank() != 2 || vb.rank() != 2)
    throw ShapeError("matmul: both operands must be rank 2");
  if (va.cols() != vb.rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(va.cols()) +
                     " vs " + std::to_string(vb.rows()));
  Node n;
  n.op = Op::kMatMul;
  n.parents = {a, b};
  n.value = Tensor::from_matrix(va.mat() * vb.mat());
  return t.emit(std::move(n));
}

NodeId add(Tape& t, NodeId a, NodeId b) {
  const Tensor& va = t.value(a);
  const Tensor& vb = t.value(b);
  require_rank2(va, "add");
  require_rank2(vb, "add");
  Node n;
  n.op = Op::kAdd;
  n.parents = {a, b};
  if (va.same_shape(vb)) {
    n.value = va;
    n.value.flat() += vb.flat();
  } else if (row_broadcast(va, vb)) {
    n.value = va;
    n.value.mat().rowwise() += vb.mat().row(0);
  } else if (row_broadcast(vb, va)) {
    n.value = vb;
    n.value.mat().rowwise() += va.mat().row(0);
  } else {
    throw ShapeError("add: shapes neither equal nor row-broadcastable");
  }
  return t.emit(std::move(n));
}

NodeId mul(Tape& t, NodeId a, NodeId b) {
  const Tensor& va = t.value(a);
  const Tensor& vb = t.value(b);
  if (!va.same_shape(vb))
    throw ShapeError("elementwise-multiply: shapes differ");
  Node n;
  n.op = Op::kMul;
  n.parents = {a, b};
  n.value = va;
  n.value.flat().array() *= vb.flat().array();
  return t.emit(std::move(n));
}

NodeId concat(Tape& t, const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Tensor& first = t.value(parts[0]);
  require_rank2(first, "concat");
  Index rank = first.rank();
  Index rows = first.rows();
  Index total_cols = 0;
  for (NodeId p : parts) {
    const Tensor& v = t.value(p);
    if (v.rank() != rank || v.rows() != rows)
      throw ShapeError("concat: incompatible shapes");
    total_cols += v.cols();
  }
  Node n;
  n.op = Op::kConcat;
  n.parents = parts;
  n.value = rank == 1 ? Tensor({total_cols}) : Tensor({rows, total_cols});
  Index off = 0;
  for (NodeId p : parts) {
    const Tensor& v = t.value(p);
    n.value.mat().middleCols(off, v.cols()) = v.mat();
    off += v.cols();
  }
  return t.emit(std::move(n));
}

NodeId slice(Tape& t, NodeId a, Index begin, Index end) {
  const Tensor& va = t.value(a);
  require_rank2(va, "slice");
  if (begin < 0 || end <= begin || end > va.cols())
    throw ShapeError("slice: bad range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") for width " +
                     std::to_string(va.cols()));
  Node n;
  n.op = Op::kSlice;
  n.parents = {a};
  n.slice_begin = begin;
  n.slice_end = end;
  Index w = end - begin;
  n.value = va.rank() == 1 ? Tensor({w}) : Tensor({va.rows(), w});
  n.value.mat() = va.mat().middleCols(begin, w);
  return t.emit(std::move(n));
}

namespace {

template <class F>
NodeId elementwise(Tape& t, NodeId a, Op op, F f) {
  Node n;
  n.op = op;
  n.parents = {a};
  n.value = t.value(a);
  n.value.flat() = n.value.flat().unaryExpr(f);
  return t.emit(std::move(n));
}

}  // namespace

NodeId sigmoid(Tape& t, NodeId a) {
  return elementwise(t, a, Op::kSigmoid,
                     [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

NodeId tanh(Tape& t, NodeId a) {
  return elementwise(t, a, Op::kTanh, [](double x) { return std::tanh(x); });
}

NodeId exp(Tape& t, NodeId a) {
  return elementwise(t, a, Op::kExp, [](double x) { return std::exp(x); });
}

NodeId log(Tape& t, NodeId a) {
  return elementwise(t, a, Op::kLog, [](double x) { return std::log(x); });
}

NodeId softmax(Tape& t, NodeId a) {
  const Tensor& va = t.value(a);
  require_rank2(va, "softmax");
  Node n;
  n.op = Op::kSoftmax;
  n.parents = {a};
  n.value = va;
  auto m = n.value.mat();
  for (Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return t.emit(std::move(n));
}

NodeId embedding_lookup(Tape& t, NodeId table, std::vector<Index> ids) {
  const Tensor& vt = t.value(table);
  if (vt.rank() != 2) throw ShapeError("embedding-lookup: table must be rank 2");
  if (ids.empty()) throw ShapeError("embedding-lookup: no indices");
  for (Index id : ids)
    if (id < 0 || id >= vt.rows())
      throw IndexError("embedding-lookup: index " + std::to_string(id) +
                       " out of bounds for " + std::to_string(vt.rows()) +
                       " rows");
  Node n;
  n.op = Op::kEmbed;
  n.parents = {table};
  n.value = Tensor({static_cast<Index>(ids.size()), vt.cols()});
  for (Index r = 0; r < static_cast<Index>(ids.size()); ++r)
    n.value.mat().row(r) = vt.mat().row(ids[r]);
  n.indices = std::move(ids);
  return t.emit(std::move(n));
}

NodeId sum(Tape& t, NodeId a) {
  Node n;
  n.op = Op::kSum;
  n.parents = {a};
  n.value = Tensor::scalar(t.value(a).flat().sum());
  return t.emit(std::move(n));
}

NodeId mean(Tape& t, NodeId a) {
  Node n;
  n.op = Op::kMean;
  n.parents = {a};
  n.value = Tensor::scalar(t.value(a).flat().mean());
  return t.emit(std::move(n));
}

NodeId scalar_scale(Tape& t, NodeId a, double c) {
  Node n;
  n.op = Op::kScale;
  n.parents = {a};
  n.scale = c;
  n.value = t.value(a);
  n.value.flat() *= c;
  return t.emit(std::move(n));
}

GradientMap Tape::backward(NodeId loss) const {
  if (loss < 0 || loss >= size()) throw ShapeError("backward: bad loss id");
  if (value(loss).size() != 1)
    throw ShapeError("backward: loss must hold a single element");

  GradientMap grads(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    grads[i] = Tensor::zeros(nodes_[i].value.shape());
  grads[loss][0] = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    const Node& n = nodes_[id];
    const Tensor& gy = grads[id];
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        const Tensor& va = nodes_[n.parents[0]].value;
        const Tensor& vb = nodes_[n.parents[1]].value;
        grads[n.parents[0]].mat() += gy.mat() * vb.mat().transpose();
        grads[n.parents[1]].mat() += va.mat().transpose() * gy.mat();
        break;
      }
      case Op::kAdd: {
        const Tensor& va = nodes_[n.parents[0]].value;
        const Tensor& vb = nodes_[n.parents[1]].value;
        if (va.same_shape(vb)) {
          grads[n.parents[0]].flat() += gy.flat();
          grads[n.parents[1]].flat() += gy.flat();
        } else if (row_broadcast(va, vb)) {
          grads[n.parents[0]].flat() += gy.flat();
          grads[n.parents[1]].mat().row(0) += gy.mat().colwise().sum();
        } else {
          grads[n.parents[1]].flat() += gy.flat();
          grads[n.parents[0]].mat().row(0) += gy.mat().colwise().sum();
        }
        break;
      }
      case Op::kMul: {
        const Tensor& va = nodes_[n.parents[0]].value;
        const Tensor& vb = nodes_[n.parents[1]].value;
        grads[n.parents[0]].flat().array() +=
            gy.flat().array() * vb.flat().array();
        grads[n.parents[1]].flat().array() +=
            gy.flat().array() * va.flat().array();
        break;
      }
      case Op::kConcat: {
        Index off = 0;
        for (NodeId p : n.parents) {
          Index w = nodes_[p].value.cols();
          grads[p].mat() += gy.mat().middleCols(off, w);
          off += w;
        }
        break;
      }
      case Op::kSlice: {
        grads[n.parents[0]].mat().middleCols(n.slice_begin,
                                             n.slice_end - n.slice_begin) +=
            gy.mat();
        break;
      }
      case Op::kSigmoid: {
        auto y = n.value.flat().array();
        grads[n.parents[0]].flat().array() +=
            gy.flat().array() * y * (1.0 - y);
        break;
      }
      case Op::kTanh: {
        auto y = n.value.flat().array();
        grads[n.parents[0]].flat().array() +=
            gy.flat().array() * (1.0 - y * y);
        break;
      }
      case Op::kExp: {
        grads[n.parents[0]].flat().array() +=
            gy.flat().array() * n.value.flat().array();
        break;
      }
      case Op::kLog: {
        grads[n.parents[0]].flat().array() +=
            gy.flat().array() / nodes_[n.parents[0]].value.flat().array();
        break;
      }
      case Op::kSoftmax: {
        auto y = n.value.mat();
        auto gyv = gy.mat();
        auto gx = grads[n.parents[0]].mat();
        for (Index r = 0; r < y.rows(); ++r) {
          double dot = (gyv.row(r).array() * y.row(r).array()).sum();
          gx.row(r).array() +=
              y.row(r).array() * (gyv.row(r).array() - dot);
        }
        break;
      }
      case Op::kEmbed: {
        auto gt = grads[n.parents[0]].mat();
        for (Index r = 0; r < static_cast<Index>(n.indices.size()); ++r)
          gt.row(n.indices[r]) += gy.mat().row(r);
        break;
      }
      case Op::kSum: {
        grads[n.parents[0]].flat().array() += gy[0];
        break;
      }
      case Op::kMean: {
        grads[n.parents[0]].flat().array() +=
            gy[0] / static_cast<double>(nodes_[n.parents[0]].value.size());
        break;
      }
      case Op::kScale: {
        grads[n.parents[0]].flat() += n.scale * gy.flat();
        break;
      }
    }
  }
  return grads;
}

double grad_check(const ScalarFn& build, const Tensor& point, double epsilon) {
  return grad_check(
      [&build](Tape& t, const std::vector<NodeId>& xs) {
        return build(t, xs[0]);
      },
      std::vector<Tensor>{point}, epsilon);
}

double grad_check(const MultiScalarFn& build, const std::vector<Tensor>& points,
                  double epsilon) {
  if (epsilon <= 0) throw ConfigError("grad_check: epsilon must be > 0");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  Tape tape;
  std::vector<NodeId> xs;
  xs.reserve(points.size());
  for (const Tensor& p : points) xs.push_back(tape.leaf(p));
  NodeId loss;
  GradientMap grads;
  try {
    loss = build(tape, xs);
    if (tape.value(loss).size() != 1)
      throw ShapeError("grad_check: function must evaluate to a scalar");
    grads = tape.backward(loss);
  } catch (const NonFiniteError&) {
    return kInf;
  }

  auto eval = [&build](const std::vector<Tensor>& pts) {
    Tape t;
    std::vector<NodeId> ys;
    ys.reserve(pts.size());
    for (const Tensor& p : pts) ys.push_back(t.leaf(p));
    return t.value(build(t, ys))[0];
  };

  double max_err = 0.0;
  std::vector<Tensor> work = points;
  for (std::size_t ti = 0; ti < points.size(); ++ti) {
    for (Index i = 0; i < points[ti].size(); ++i) {
      double orig = work[ti][i];
      double fp, fm;
      try {
        work[ti][i] = orig + epsilon;
        fp = eval(work);
        work[ti][i] = orig - epsilon;
        fm = eval(work);
      } catch (const NonFiniteError&) {
        return kInf;
      }
      work[ti][i] = orig;
      double numeric = (fp - fm) / (2.0 * epsilon);
      double analytic = grads[xs[ti]][i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) return kInf;
      double err = std::abs(analytic - numeric) /
                   std::max(1.0, std::abs(analytic));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace pvae
