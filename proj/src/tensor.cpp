#include "snnkit/tensor.hpp"

#include <sstream>

namespace snnkit {

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor Tensor::make(Shape shape, Array data, bool requires_grad) {
  for (std::int64_t d : shape) {
    if (d < 1) throw ContractError("tensor dimensions must be >= 1, got " + shape_str(shape));
  }
  if (shape_size(shape) != data.size()) {
    throw ContractError("shape " + shape_str(shape) + " does not match data length " +
                        std::to_string(data.size()));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Array a = Array::Zero(shape_size(shape));
  return make(std::move(shape), std::move(a), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Array a = Array::Constant(shape_size(shape), value);
  return make(std::move(shape), std::move(a), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

Tensor Tensor::from_array(Shape shape, Array data, bool requires_grad) {
  return make(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<double> values,
                           bool requires_grad) {
  Array a(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) a[i++] = v;
  return make(std::move(shape), std::move(a), requires_grad);
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  Array a(shape_size(shape));
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = rng.uniform(lo, hi);
  return make(std::move(shape), std::move(a), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

std::int64_t Tensor::dim(int i) const {
  const Shape& s = shape();
  if (i < 0 || i >= static_cast<int>(s.size())) {
    throw ContractError("dimension index " + std::to_string(i) + " out of range for " +
                        shape_str(s));
  }
  return s[i];
}

std::int64_t Tensor::size() const { return shape_size(shape()); }

bool Tensor::requires_grad() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->requires_grad;
}

const Array& Tensor::data() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

Array& Tensor::raw() {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->data;
}

double Tensor::value() const {
  if (size() != 1) throw ContractError("value() requires a scalar tensor, got " + shape_str(shape()));
  return data()[0];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) {
    throw ContractError("index rank mismatch for " + shape_str(s));
  }
  std::int64_t flat = 0;
  int i = 0;
  for (std::int64_t ix : index) {
    if (ix < 0 || ix >= s[i]) throw ContractError("index out of bounds for " + shape_str(s));
    flat = flat * s[i] + ix;
    ++i;
  }
  return data()[flat];
}

Tensor Tensor::clone() const {
  return make(shape(), data(), requires_grad());
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape() : core_(std::make_shared<detail::TapeCore>()) {
  core_->owner = this;
}

Tape::~Tape() = default;

void Tape::link(const Tensor& t, std::int64_t node) const {
  t.impl_->tape = core_;
  t.impl_->epoch = core_->epoch;
  t.impl_->node = node;
}

std::int64_t Tape::node_of(const Tensor& t) const {
  if (!t.impl_) return -1;
  auto locked = t.impl_->tape.lock();
  if (locked.get() != core_.get()) return -1;
  if (t.impl_->epoch != core_->epoch) return -1;
  return t.impl_->node;
}

Tape* Tape::of(std::initializer_list<const Tensor*> ins) {
  Tape* found = nullptr;
  for (const Tensor* t : ins) {
    if (!t || !t->impl_) continue;
    auto locked = t->impl_->tape.lock();
    if (!locked || t->impl_->epoch != locked->epoch) continue;
    if (found && found != locked->owner) {
      throw ContractError("op inputs are recorded on two different tapes");
    }
    found = locked->owner;
  }
  return found;
}

std::int64_t Tape::watch(const Tensor& t) {
  if (consumed_) throw ContractError("tape already consumed; reset() before recording");
  if (!t.requires_grad()) {
    throw ContractError("watch() requires a tensor with requires_grad");
  }
  std::int64_t existing = node_of(t);
  if (existing >= 0) return existing;
  nodes_.push_back(Node{nullptr, t.size()});
  std::int64_t id = static_cast<std::int64_t>(nodes_.size()) - 1;
  link(t, id);
  return id;
}

std::int64_t Tape::record(Tensor& out, BackwardFn backward) {
  if (consumed_) throw ContractError("tape already consumed; reset() before recording");
  nodes_.push_back(Node{std::move(backward), out.size()});
  std::int64_t id = static_cast<std::int64_t>(nodes_.size()) - 1;
  link(out, id);
  out.impl_->requires_grad = true;
  return id;
}

void Tape::accumulate(std::int64_t node, const Array& grad) {
  if (node < 0 || node >= static_cast<std::int64_t>(nodes_.size())) {
    throw ContractError("gradient accumulation into unknown node");
  }
  if (grad.size() != nodes_[node].size) {
    throw ContractError("gradient size mismatch: node expects " +
                        std::to_string(nodes_[node].size) + ", got " +
                        std::to_string(grad.size()));
  }
  Array& buf = grads_[node];
  if (buf.size() == 0) {
    buf = grad;
  } else {
    buf += grad;
  }
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw ContractError("tape already consumed");
  if (loss.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
  }
  std::int64_t loss_node = node_of(loss);
  if (loss_node < 0) throw ContractError("loss was not recorded on this tape");

  grads_.assign(nodes_.size(), Array{});
  grads_[loss_node] = Array::Ones(1);
  for (std::int64_t i = static_cast<std::int64_t>(nodes_.size()) - 1; i >= 0; --i) {
    if (grads_[i].size() == 0) continue;  // no gradient reached this node
    if (nodes_[i].backward) nodes_[i].backward(grads_[i], *this);
  }
  consumed_ = true;
}

Array Tape::grad(const Tensor& t) const {
  if (!consumed_) throw ContractError("grad() called before backward()");
  std::int64_t node = node_of(t);
  if (node < 0) throw ContractError("tensor is not tracked on this tape");
  if (grads_[node].size() == 0) return Array::Zero(t.size());
  return grads_[node];
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  consumed_ = false;
  ++core_->epoch;  // invalidates all previously linked tensors
}

}  // namespace snnkit
