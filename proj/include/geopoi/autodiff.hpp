#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace geopoi::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major float64 array. Copies share storage; the handle is cheap
/// to pass by value.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  std::size_t ndim() const { return data_->shape.size(); }
  std::size_t size() const { return data_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return data_->value; }
  std::span<double> mutable_values() { return data_->value; }
  double item() const;
  double at(std::size_t r, std::size_t c) const { return data_->value[r * cols() + c]; }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool on) { data_->requires_grad = on; }
  bool has_grad() const { return !data_->grad.empty(); }
  std::span<const double> grad() const { return data_->grad; }
  /// Gradient buffer, allocated zero-filled on first access.
  std::span<double> mutable_grad() const;
  /// Drops the gradient buffer.
  void zero_grad() const { data_->grad.clear(); }

  /// A detached copy with its own storage and no gradient tracking.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : data_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> data_;
};

/// Define-by-run record of differentiable operations. Constructing a Tape
/// makes it the calling thread's active tape until it is destroyed; ops run
/// while no tape is active compute values only.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(const Tensor& output, std::function<void()> backward);
  std::size_t size() const { return entries_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and replays the recorded ops in reverse,
  /// accumulating into every tensor that requires a gradient. Throws if the
  /// loss is not a scalar or was not produced on this tape.
  void backward(const Tensor& loss);

 private:
  struct Entry {
    Tensor output;
    std::function<void()> backward;
  };
  std::vector<Entry> entries_;
  Tape* previous_ = nullptr;
};

// Elementwise / structural ops. Binary elementwise ops require equal shapes
// or one operand of size 1; there is no other broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// (n x k) . (k x m)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Concatenates 1-D or 2-D tensors along `axis` (0 = rows, 1 = columns;
/// 1-D tensors only along axis 0).
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Rows [begin, end) of a 2-D tensor, or elements of a 1-D tensor.
Tensor slice(const Tensor& a, std::size_t begin, std::size_t end);
/// Row i of the result is row indices[i] of `table`.
Tensor embedding_gather(const Tensor& table, std::span<const std::size_t> indices);
/// Stacks a length-d vector (or 1 x d row) n times into n x d.
Tensor repeat_rows(const Tensor& row, std::size_t n);
/// Copy of `base` with row positions[i] replaced by row i of `rows`.
/// Positions must be strictly increasing and in range.
Tensor scatter_rows(const Tensor& base, std::span<const std::size_t> positions, const Tensor& rows);

/// Row-wise softmax of a 2-D tensor. With `causal`, entry (i, j) for j > i is
/// excluded and set to zero.
Tensor softmax_rows(const Tensor& a, bool causal = false);
/// Row-wise normalisation of n x d with per-feature gain and bias (length d).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Column means of n x d, shape (1 x d).
Tensor mean_rows(const Tensor& a);

/// Mean over rows of -log softmax(logits)[row, target]. Accepts a single
/// logits vector (1-D) or a batch (n x C).
Tensor cross_entropy_logits(const Tensor& logits, std::span<const std::size_t> targets);
Tensor cross_entropy_logits(const Tensor& logits, std::size_t target);

}  // namespace geopoi::ad
