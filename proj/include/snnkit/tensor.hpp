#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "snnkit/error.hpp"
#include "snnkit/rng.hpp"

namespace snnkit {

using Array = Eigen::ArrayXd;
using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

class Tape;

namespace detail {
// Identity object shared between a Tape and the tensors recorded on it.
// Tensors hold weak references; a bumped epoch invalidates old links
// without touching the tensors themselves.
struct TapeCore {
  Tape* owner = nullptr;
  std::uint64_t epoch = 0;
};
}  // namespace detail

// Dense row-major tensor of doubles. A Tensor is a cheap shared handle:
// copies alias the same storage. Ops never mutate their inputs; the only
// sanctioned mutation path is raw(), used by parameter updates.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_array(Shape shape, Array data, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::initializer_list<double> values,
                            bool requires_grad = false);
  // Uniform in [lo, hi), drawn in row-major element order.
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi,
                        bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  std::int64_t dim(int i) const;
  std::int64_t size() const;
  bool requires_grad() const;

  const Array& data() const;
  // Mutable storage access. Bypasses the tape; do not call on tensors that
  // participate in a live recording.
  Array& raw();

  double value() const;  // scalar tensors only
  double at(std::initializer_list<std::int64_t> index) const;

  Tensor clone() const;  // deep copy, untracked

  friend class Tape;

 private:
  struct Impl {
    Shape shape;
    Array data;
    bool requires_grad = false;
    std::weak_ptr<detail::TapeCore> tape;
    std::uint64_t epoch = 0;
    std::int64_t node = -1;
  };

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  static Tensor make(Shape shape, Array data, bool requires_grad);

  std::shared_ptr<Impl> impl_;
};

// Reverse-mode tape. One tape records one forward pass; backward() may be
// called once, after which the tape must be reset() before reuse. Nodes are
// stored in creation order, which is a topological order of the graph.
class Tape {
 public:
  // Receives the gradient of the node output (flat, row-major) and routes
  // contributions to the node inputs via Tape::accumulate.
  using BackwardFn = std::function<void(const Array& grad_out, Tape& tape)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a leaf whose gradient should be collected. The tensor must
  // have requires_grad set. Idempotent within one epoch.
  std::int64_t watch(const Tensor& t);

  // Records an interior node and links `out` to it.
  std::int64_t record(Tensor& out, BackwardFn backward);

  // Adds a contribution to a node's gradient buffer.
  void accumulate(std::int64_t node, const Array& grad);

  // Runs reverse-mode accumulation from a scalar loss recorded on this
  // tape. Consumes the tape: gradients stay readable, further recording
  // is an error until reset().
  void backward(const Tensor& loss);

  // Gradient of a tracked tensor after backward(). Zeros if the tensor
  // never received a contribution.
  Array grad(const Tensor& t) const;

  void reset();

  bool consumed() const { return consumed_; }
  std::int64_t node_count() const { return static_cast<std::int64_t>(nodes_.size()); }

  // Node id of `t` on this tape, or -1 when untracked/stale.
  std::int64_t node_of(const Tensor& t) const;

  // The live tape shared by any of `ins`, or nullptr. Mixing tensors from
  // two live tapes is a contract violation.
  static Tape* of(std::initializer_list<const Tensor*> ins);

 private:
  struct Node {
    BackwardFn backward;  // null for leaves
    std::int64_t size = 0;
  };

  void link(const Tensor& t, std::int64_t node) const;

  std::shared_ptr<detail::TapeCore> core_;
  std::vector<Node> nodes_;
  std::vector<Array> grads_;
  bool consumed_ = false;
};

}  // namespace snnkit
