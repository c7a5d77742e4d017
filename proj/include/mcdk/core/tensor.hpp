// Copyright 2026 The mcdk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mcdk/core/error.hpp"

namespace mcdk {

using Index = std::int64_t;
using Shape = std::vector<Index>;

/// Storage aligned for Eigen packets, so that vectorized reductions over a
/// buffer sum in the same order on every run.
template <typename Scalar>
using AlignedVector = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

/// Dense row-major n-dimensional array with optional gradient storage.
///
/// A Tensor is a cheap handle: copies share the same storage, which is how
/// parameters stay visible to both the network and the optimizer. Use
/// clone() for an independent copy.
template <typename Scalar>
class Tensor {
 public:
  using value_type = Scalar;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : impl_(std::make_shared<Impl>()) {
    check_shape(shape);
    impl_->data.assign(static_cast<std::size_t>(shape_size(shape)), fill);
    impl_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<Scalar> values)
      : impl_(std::make_shared<Impl>()) {
    check_shape(shape);
    if (static_cast<Index>(values.size()) != shape_size(shape)) {
      throw DimensionError("tensor data length " +
                           std::to_string(values.size()) +
                           " does not match shape " + shape_string(shape));
    }
    impl_->data.assign(values.begin(), values.end());
    impl_->shape = std::move(shape);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), Scalar(1)); }
  static Tensor full(Shape shape, Scalar v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(Scalar v) { return Tensor(Shape{1}, v); }

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  Index size() const { return static_cast<Index>(impl_->data.size()); }

  /// Extent of an axis; negative axes count from the back.
  Index dim(int axis) const {
    const int r = rank();
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
      throw DimensionError("axis " + std::to_string(axis) +
                           " out of range for shape " + shape_string(shape()));
    }
    return impl_->shape[static_cast<std::size_t>(a)];
  }

  std::span<const Scalar> data() const { return impl_->data; }
  std::span<Scalar> mutable_data() { return impl_->data; }
  const Scalar* ptr() const { return impl_->data.data(); }
  Scalar* mutable_ptr() { return impl_->data.data(); }

  Scalar operator[](Index i) const { return impl_->data[static_cast<std::size_t>(i)]; }
  Scalar& operator[](Index i) { return impl_->data[static_cast<std::size_t>(i)]; }

  /// First element; convenient for scalar losses.
  Scalar item() const { return impl_->data.at(0); }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool value) {
    impl_->requires_grad = value;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const Scalar> grad() const { return impl_->grad; }

  /// Gradient buffer, allocated (zero-filled) on first access.
  std::span<Scalar> grad_buffer() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Scalar(0));
    return impl_->grad;
  }

  void zero_grad() { impl_->grad.clear(); }

  /// Deep copy without gradient or graph membership.
  Tensor clone() const {
    Tensor out;
    out.impl_ = std::make_shared<Impl>();
    out.impl_->shape = impl_->shape;
    out.impl_->data = impl_->data;
    return out;
  }

  /// Same values, cut from any gradient history.
  Tensor detach() const { return clone(); }

  template <typename Other>
  Tensor<Other> cast() const {
    std::vector<Other> values(impl_->data.begin(), impl_->data.end());
    return Tensor<Other>(shape(), std::move(values));
  }

  /// Identity of the underlying storage.
  const void* storage_id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    AlignedVector<Scalar> data;
    AlignedVector<Scalar> grad;
    bool requires_grad = false;
  };

  static void check_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > 4) {
      throw DimensionError("tensor rank must be 1..4, got shape " +
                           shape_string(shape));
    }
    for (Index e : shape) {
      if (e <= 0) throw DimensionError("non-positive extent in " + shape_string(shape));
    }
  }

  std::shared_ptr<Impl> impl_;
};

/// Tape of recorded operations. Nodes are appended in execution order, which
/// is a valid topological order; backward() walks them in reverse.
template <typename Scalar>
class Graph {
 public:
  struct Node {
    const char* op = "";
    std::vector<Tensor<Scalar>> inputs;
    Tensor<Scalar> output;
    std::function<void(Node&)> backward;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void record(const char* op, std::vector<Tensor<Scalar>> inputs,
              Tensor<Scalar> output, std::function<void(Node&)> backward) {
    if (consumed_) throw GraphError("cannot record onto a consumed graph");
    nodes_.push_back(Node{op, std::move(inputs), std::move(output),
                          std::move(backward)});
  }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  /// Seeds d(loss)/d(loss) = 1 and propagates gradients to every recorded
  /// input. A graph can be consumed only once.
  void backward(Tensor<Scalar> loss) {
    if (consumed_) throw GraphError("backward called twice on the same graph");
    if (loss.size() != 1) {
      throw DimensionError("backward needs a scalar loss, got shape " +
                           shape_string(loss.shape()));
    }
    if (!loss.requires_grad()) {
      throw GraphError("loss does not depend on any tensor requiring grad");
    }
    consumed_ = true;
    loss.grad_buffer()[0] += Scalar(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!it->output.has_grad()) continue;
      it->backward(*it);
    }
  }

  /// The graph new operations are recorded onto, or nullptr.
  static Graph*& active() {
    thread_local Graph* current = nullptr;
    return current;
  }

 private:
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Makes a graph the recording target for the current thread while in scope.
template <typename Scalar>
class GraphScope {
 public:
  explicit GraphScope(Graph<Scalar>& graph) : previous_(Graph<Scalar>::active()) {
    Graph<Scalar>::active() = &graph;
  }
  ~GraphScope() { Graph<Scalar>::active() = previous_; }
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph<Scalar>* previous_;
};

/// Suspends recording while in scope.
template <typename Scalar>
class NoGradScope {
 public:
  NoGradScope() : previous_(Graph<Scalar>::active()) { Graph<Scalar>::active() = nullptr; }
  ~NoGradScope() { Graph<Scalar>::active() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Graph<Scalar>* previous_;
};

}  // namespace mcdk
