#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pvae/tensor.hpp"

namespace pvae {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

// Closed set of differentiable operations. No user extension hooks: every
// kind here is covered by the finite-difference suite.
enum class Op {
  kLeaf,
  kMatMul,
  kAdd,        // same shape, or matrix + row vector broadcast
  kMul,        // elementwise
  kConcat,     // last axis
  kSlice,      // last axis, [begin, end)
  kSigmoid,
  kTanh,
  kExp,
  kLog,
  kSoftmax,    // last axis, max-subtracted
  kEmbed,      // row gather
  kSum,
  kMean,
  kScale,      // multiply by a constant
};

struct Node {
  Op op = Op::kLeaf;
  Tensor value;
  std::vector<NodeId> parents;
  // op attributes
  Index slice_begin = 0;
  Index slice_end = 0;
  double scale = 0.0;
  std::vector<Index> indices;  // kEmbed row ids
};

// Gradient tensors indexed by node id; zero tensors for nodes the loss does
// not reach.
using GradientMap = std::vector<Tensor>;

// Append-only computation record. Parents always precede children, so one
// reverse sweep accumulates all gradients. A tape is single-threaded;
// distinct tapes may share immutable parameter tensors.
class Tape {
 public:
  NodeId leaf(Tensor value);

  const Node& node(NodeId id) const { return nodes_[id]; }
  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  Index size() const { return static_cast<Index>(nodes_.size()); }

  // d(loss)/d(node) for every node, visiting the tape in reverse order
  // exactly once. loss must hold a single element.
  GradientMap backward(NodeId loss) const;

  NodeId emit(Node n);

 private:
  std::vector<Node> nodes_;
};

NodeId matmul(Tape& t, NodeId a, NodeId b);
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);
NodeId concat(Tape& t, const std::vector<NodeId>& parts);
NodeId slice(Tape& t, NodeId a, Index begin, Index end);
NodeId sigmoid(Tape& t, NodeId a);
NodeId tanh(Tape& t, NodeId a);
NodeId exp(Tape& t, NodeId a);
NodeId log(Tape& t, NodeId a);
NodeId softmax(Tape& t, NodeId a);
NodeId embedding_lookup(Tape& t, NodeId table, std::vector<Index> ids);
NodeId sum(Tape& t, NodeId a);
NodeId mean(Tape& t, NodeId a);
NodeId scalar_scale(Tape& t, NodeId a, double c);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar-valued function of one tensor (or several). Non-finite
// intermediates are reported as +Inf.
using ScalarFn = std::function<NodeId(Tape&, NodeId)>;
using MultiScalarFn = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

double grad_check(const ScalarFn& build, const Tensor& point, double epsilon);
double grad_check(const MultiScalarFn& build, const std::vector<Tensor>& points,
                  double epsilon);

}  // namespace pvae
