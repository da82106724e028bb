#include "geopoi/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Core>
#include <fmt/format.h>

namespace geopoi::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

thread_local Tape* g_active_tape = nullptr;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(
      fmt::format("{}: incompatible shapes {} and {}", op, shape_string(a.shape()), shape_string(b.shape())));
}

void require_2d(const char* op, const Tensor& a) {
  if (a.ndim() != 2)
    throw std::invalid_argument(fmt::format("{}: expected a 2-D tensor, got {}", op, shape_string(a.shape())));
}

// Registers `backward` when a tape is active and any input needs a gradient.
template <typename... Inputs>
void track(Tensor& out, std::function<void()> backward, const Inputs&... inputs) {
  Tape* tape = Tape::active();
  if (tape == nullptr || !(inputs.requires_grad() || ...)) return;
  out.set_requires_grad(true);
  tape->record(out, std::move(backward));
}

void track_many(Tensor& out, std::function<void()> backward, const std::vector<Tensor>& inputs) {
  Tape* tape = Tape::active();
  if (tape == nullptr) return;
  if (std::none_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); })) return;
  out.set_requires_grad(true);
  tape->record(out, std::move(backward));
}

Tensor like(const Tensor& a) { return Tensor::zeros(a.shape()); }

// Elementwise binary op with scalar broadcasting only.
template <typename Fwd, typename GradA, typename GradB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, GradA da, GradB db) {
  const bool same = a.shape() == b.shape();
  if (!same && a.size() != 1 && b.size() != 1) shape_error(name, a, b);
  const Shape shape = (same || b.size() == 1) ? a.shape() : b.shape();
  Tensor out = Tensor::zeros(shape);
  const auto n = out.size();
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.mutable_values();
  const std::size_t sa = a.size() == n ? 1 : 0;
  const std::size_t sb = b.size() == n ? 1 : 0;
  for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(av[i * sa], bv[i * sb]);
  track(
      out,
      [a, b, out, sa, sb, da, db]() mutable {
        auto g = out.grad();
        auto av = a.values();
        auto bv = b.values();
        if (a.requires_grad()) {
          auto ga = a.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) ga[i * sa] += g[i] * da(av[i * sa], bv[i * sb]);
        }
        if (b.requires_grad()) {
          auto gb = b.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i * sb] += g[i] * db(av[i * sa], bv[i * sb]);
        }
      },
      a, b);
  return out;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  Tensor out = like(a);
  auto av = a.values();
  auto ov = out.mutable_values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = fwd(av[i]);
  track(
      out,
      [a, out, deriv]() mutable {
        auto g = out.grad();
        auto av = a.values();
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(av[i]);
      },
      a);
  return out;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + ")";
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto d = std::make_shared<detail::TensorData>();
  d->value.assign(shape_size(shape), 0.0);
  d->shape = std::move(shape);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size())
    throw std::invalid_argument(fmt::format("tensor shape {} does not hold {} values", shape_string(shape),
                                            values.size()));
  auto d = std::make_shared<detail::TensorData>();
  d->shape = std::move(shape);
  d->value = std::move(values);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

std::size_t Tensor::rows() const { return ndim() == 2 ? shape()[0] : 1; }
std::size_t Tensor::cols() const { return ndim() == 0 ? 1 : shape().back(); }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument(fmt::format("item() on tensor of shape {}", shape_string(shape())));
  return data_->value[0];
}

std::span<double> Tensor::mutable_grad() const {
  if (data_->grad.empty()) data_->grad.assign(data_->value.size(), 0.0);
  return data_->grad;
}

Tensor Tensor::clone() const { return from(shape(), data_->value); }

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }
Tape::~Tape() { g_active_tape = previous_; }
Tape* Tape::active() { return g_active_tape; }

void Tape::record(const Tensor& output, std::function<void()> backward) {
  entries_.push_back({output, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw std::invalid_argument(
        fmt::format("backward: loss must be a scalar, got shape {}", loss.defined() ? shape_string(loss.shape()) : "()"));
  auto it = std::find_if(entries_.rbegin(), entries_.rend(),
                         [&](const Entry& e) { return e.output.same_storage(loss); });
  if (it == entries_.rend()) throw std::invalid_argument("backward: loss was not produced on this tape");
  Tensor seed = loss;
  seed.mutable_grad()[0] = 1.0;
  for (; it != entries_.rend(); ++it)
    if (it->output.has_grad()) it->backward();
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; }, [factor](double) { return factor; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sin(const Tensor& a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw std::invalid_argument(
        fmt::format("reshape: cannot view {} as {}", shape_string(a.shape()), shape_string(shape)));
  Tensor out = Tensor::from(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()));
  track(
      out,
      [a, out]() mutable {
        auto g = out.grad();
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      },
      a);
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  const auto n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) shape_error("matmul", a, b);
  Tensor out = Tensor::zeros({n, m});
  MutMap(out.mutable_values().data(), n, m).noalias() =
      ConstMap(a.values().data(), n, k) * ConstMap(b.values().data(), k, m);
  track(
      out,
      [a, b, out, n, k, m]() mutable {
        ConstMap g(out.grad().data(), n, m);
        if (a.requires_grad())
          MutMap(a.mutable_grad().data(), n, k).noalias() += g * ConstMap(b.values().data(), k, m).transpose();
        if (b.requires_grad())
          MutMap(b.mutable_grad().data(), k, m).noalias() += ConstMap(a.values().data(), n, k).transpose() * g;
      },
      a, b);
  return out;
}

Tensor transpose(const Tensor& a) {
  require_2d("transpose", a);
  const auto n = a.shape()[0], m = a.shape()[1];
  Tensor out = Tensor::zeros({m, n});
  MutMap(out.mutable_values().data(), m, n) = ConstMap(a.values().data(), n, m).transpose();
  track(
      out,
      [a, out, n, m]() mutable {
        MutMap(a.mutable_grad().data(), n, m) += ConstMap(out.grad().data(), m, n).transpose();
      },
      a);
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const auto nd = parts.front().ndim();
  if (nd == 0 || nd > 2 || axis >= nd)
    throw std::invalid_argument(fmt::format("concat: axis {} invalid for shape {}", axis,
                                            shape_string(parts.front().shape())));
  for (const auto& p : parts) {
    if (p.ndim() != nd) shape_error("concat", parts.front(), p);
    if (nd == 2 && axis == 0 && p.cols() != parts.front().cols()) shape_error("concat", parts.front(), p);
    if (nd == 2 && axis == 1 && p.rows() != parts.front().rows()) shape_error("concat", parts.front(), p);
  }

  Shape shape = parts.front().shape();
  shape[axis] = 0;
  for (const auto& p : parts) shape[axis] += p.shape()[axis];
  Tensor out = Tensor::zeros(shape);
  auto ov = out.mutable_values();
  const std::size_t rows = nd == 2 ? shape[0] : 1;
  const std::size_t cols = shape.back();

  // Offsets of each part inside the output, as (row offset, col offset).
  std::vector<std::pair<std::size_t, std::size_t>> offsets;
  std::size_t acc = 0;
  for (const auto& p : parts) {
    offsets.emplace_back(axis == 0 && nd == 2 ? acc : 0, axis == 1 || nd == 1 ? acc : 0);
    acc += p.shape()[axis];
  }
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& p = parts[pi];
    auto pv = p.values();
    const auto pr = p.rows(), pc = p.cols();
    for (std::size_t r = 0; r < pr; ++r)
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(r * pc), pc,
                  ov.begin() + static_cast<std::ptrdiff_t>((offsets[pi].first + r) * cols + offsets[pi].second));
  }
  (void)rows;
  track_many(
      out,
      [parts, offsets, out, cols]() mutable {
        auto g = out.grad();
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
          auto& p = parts[pi];
          if (!p.requires_grad()) continue;
          auto gp = p.mutable_grad();
          const auto pr = p.rows(), pc = p.cols();
          for (std::size_t r = 0; r < pr; ++r)
            for (std::size_t c = 0; c < pc; ++c)
              gp[r * pc + c] += g[(offsets[pi].first + r) * cols + offsets[pi].second + c];
        }
      },
      parts);
  return out;
}

Tensor slice(const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.ndim() == 0 || a.ndim() > 2 || begin > end || end > a.shape()[0])
    throw std::invalid_argument(
        fmt::format("slice: range [{}, {}) invalid for shape {}", begin, end, shape_string(a.shape())));
  const std::size_t width = a.ndim() == 2 ? a.shape()[1] : 1;
  Shape shape = a.shape();
  shape[0] = end - begin;
  auto av = a.values();
  Tensor out = Tensor::from(shape, std::vector<double>(av.begin() + static_cast<std::ptrdiff_t>(begin * width),
                                                       av.begin() + static_cast<std::ptrdiff_t>(end * width)));
  track(
      out,
      [a, out, begin, width]() mutable {
        auto g = out.grad();
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[begin * width + i] += g[i];
      },
      a);
  return out;
}

Tensor embedding_gather(const Tensor& table, std::span<const std::size_t> indices) {
  require_2d("embedding_gather", table);
  const auto rows = table.shape()[0], d = table.shape()[1];
  for (auto i : indices)
    if (i >= rows)
      throw std::out_of_range(fmt::format("embedding_gather: index {} outside table of shape {}", i,
                                          shape_string(table.shape())));
  Tensor out = Tensor::zeros({indices.size(), d});
  auto tv = table.values();
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(indices[r] * d), d,
                ov.begin() + static_cast<std::ptrdiff_t>(r * d));
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  track(
      out,
      [table, out, idx = std::move(idx), d]() mutable {
        auto g = out.grad();
        auto gt = table.mutable_grad();
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (std::size_t c = 0; c < d; ++c) gt[idx[r] * d + c] += g[r * d + c];
      },
      table);
  return out;
}

Tensor repeat_rows(const Tensor& row, std::size_t n) {
  if (row.ndim() > 2 || (row.ndim() == 2 && row.shape()[0] != 1))
    throw std::invalid_argument(fmt::format("repeat_rows: expected a row, got {}", shape_string(row.shape())));
  const auto d = row.size();
  Tensor out = Tensor::zeros({n, d});
  auto rv = row.values();
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < n; ++r) std::copy(rv.begin(), rv.end(), ov.begin() + static_cast<std::ptrdiff_t>(r * d));
  track(
      out,
      [row, out, n, d]() mutable {
        auto g = out.grad();
        auto gr = row.mutable_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c) gr[c] += g[r * d + c];
      },
      row);
  return out;
}

Tensor scatter_rows(const Tensor& base, std::span<const std::size_t> positions, const Tensor& rows) {
  require_2d("scatter_rows", base);
  const auto n = base.shape()[0], d = base.shape()[1];
  if (positions.empty() && rows.size() == 0) return base;
  require_2d("scatter_rows", rows);
  if (rows.shape()[0] != positions.size())
    throw std::invalid_argument(fmt::format("scatter_rows: {} positions but {} replacement rows", positions.size(),
                                            rows.shape()[0]));
  if (rows.shape()[1] != d) shape_error("scatter_rows", base, rows);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] >= n) throw std::out_of_range(fmt::format("scatter_rows: position {} >= {}", positions[i], n));
    if (i > 0 && positions[i] <= positions[i - 1])
      throw std::invalid_argument("scatter_rows: positions must be strictly increasing");
  }
  Tensor out = base.clone();
  auto ov = out.mutable_values();
  auto rv = rows.values();
  for (std::size_t i = 0; i < positions.size(); ++i)
    std::copy_n(rv.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                ov.begin() + static_cast<std::ptrdiff_t>(positions[i] * d));
  std::vector<std::size_t> pos(positions.begin(), positions.end());
  track(
      out,
      [base, rows, out, pos = std::move(pos), n, d]() mutable {
        auto g = out.grad();
        if (base.requires_grad()) {
          auto gb = base.mutable_grad();
          std::size_t next = 0;
          for (std::size_t r = 0; r < n; ++r) {
            if (next < pos.size() && pos[next] == r) {
              ++next;
              continue;
            }
            for (std::size_t c = 0; c < d; ++c) gb[r * d + c] += g[r * d + c];
          }
        }
        if (rows.requires_grad()) {
          auto gr = rows.mutable_grad();
          for (std::size_t i = 0; i < pos.size(); ++i)
            for (std::size_t c = 0; c < d; ++c) gr[i * d + c] += g[pos[i] * d + c];
        }
      },
      base, rows);
  return out;
}

Tensor softmax_rows(const Tensor& a, bool causal) {
  require_2d("softmax_rows", a);
  const auto n = a.shape()[0], m = a.shape()[1];
  Tensor out = like(a);
  auto av = a.values();
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t width = causal ? std::min(m, r + 1) : m;
    const double* x = av.data() + r * m;
    double* y = ov.data() + r * m;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < width; ++c) mx = std::max(mx, x[c]);
    double total = 0.0;
    for (std::size_t c = 0; c < width; ++c) total += (y[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < width; ++c) y[c] /= total;
  }
  track(
      out,
      [a, out, n, m]() mutable {
        auto g = out.grad();
        auto y = out.values();
        auto ga = a.mutable_grad();
        for (std::size_t r = 0; r < n; ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < m; ++c) dot += g[r * m + c] * y[r * m + c];
          for (std::size_t c = 0; c < m; ++c) ga[r * m + c] += y[r * m + c] * (g[r * m + c] - dot);
        }
      },
      a);
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_2d("layer_norm", x);
  const auto n = x.shape()[0], d = x.shape()[1];
  if (gain.size() != d) shape_error("layer_norm", x, gain);
  if (bias.size() != d) shape_error("layer_norm", x, bias);
  Tensor out = like(x);
  std::vector<double> xhat(n * d), inv_std(n);
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < n; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += xv[r * d + c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xv[r * d + c] - mu) * (xv[r * d + c] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat[r * d + c] = (xv[r * d + c] - mu) * inv_std[r];
      ov[r * d + c] = xhat[r * d + c] * gv[c] + bv[c];
    }
  }
  Tape* tape = Tape::active();
  if (tape != nullptr && (x.requires_grad() || gain.requires_grad() || bias.requires_grad())) {
    out.set_requires_grad(true);
    tape->record(out, [x, gain, bias, out, xhat = std::move(xhat), inv_std = std::move(inv_std), n, d]() mutable {
      auto g = out.grad();
      auto gv = gain.values();
      if (gain.requires_grad()) {
        auto gg = gain.mutable_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c) gg[c] += g[r * d + c] * xhat[r * d + c];
      }
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c) gb[c] += g[r * d + c];
      }
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < n; ++r) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            const double dxh = g[r * d + c] * gv[c];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[r * d + c];
          }
          mean_dxhat *= inv_d;
          mean_dxhat_xhat *= inv_d;
          for (std::size_t c = 0; c < d; ++c) {
            const double dxh = g[r * d + c] * gv[c];
            gx[r * d + c] += inv_std[r] * (dxh - mean_dxhat - xhat[r * d + c] * mean_dxhat_xhat);
          }
        }
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor out = Tensor::scalar(total);
  track(
      out,
      [a, out]() mutable {
        const double g = out.grad()[0];
        for (double& v : a.mutable_grad()) v += g;
      },
      a);
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_rows(const Tensor& a) {
  require_2d("mean_rows", a);
  const auto n = a.shape()[0], d = a.shape()[1];
  if (n == 0) throw std::invalid_argument("mean_rows of a tensor with no rows");
  Tensor out = Tensor::zeros({1, d});
  auto av = a.values();
  auto ov = out.mutable_values();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) ov[c] += av[r * d + c];
  for (auto& v : ov) v /= static_cast<double>(n);
  track(
      out,
      [a, out, n, d]() mutable {
        auto g = out.grad();
        auto ga = a.mutable_grad();
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < d; ++c) ga[r * d + c] += g[c] * inv;
      },
      a);
  return out;
}

Tensor cross_entropy_logits(const Tensor& logits, std::span<const std::size_t> targets) {
  if (logits.ndim() == 0 || logits.ndim() > 2)
    throw std::invalid_argument(fmt::format("cross_entropy_logits: bad shape {}", shape_string(logits.shape())));
  const auto n = logits.rows(), c = logits.cols();
  if (targets.size() != n)
    throw std::invalid_argument(fmt::format("cross_entropy_logits: {} targets for {} rows", targets.size(), n));
  auto lv = logits.values();
  std::vector<double> probs(n * c);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] >= c)
      throw std::out_of_range(fmt::format("cross_entropy_logits: target {} >= {} classes", targets[r], c));
    const double* x = lv.data() + r * c;
    const double mx = *std::max_element(x, x + c);
    double total = 0.0;
    for (std::size_t k = 0; k < c; ++k) total += (probs[r * c + k] = std::exp(x[k] - mx));
    for (std::size_t k = 0; k < c; ++k) probs[r * c + k] /= total;
    loss += (mx + std::log(total)) - x[targets[r]];
  }
  Tensor out = Tensor::scalar(loss / static_cast<double>(n));
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  track(
      out,
      [logits, out, probs = std::move(probs), tg = std::move(tg), n, c]() mutable {
        const double g = out.grad()[0] / static_cast<double>(n);
        auto gl = logits.mutable_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t k = 0; k < c; ++k)
            gl[r * c + k] += g * (probs[r * c + k] - (k == tg[r] ? 1.0 : 0.0));
      },
      logits);
  return out;
}

Tensor cross_entropy_logits(const Tensor& logits, std::size_t target) {
  const std::size_t t[] = {target};
  return cross_entropy_logits(logits, std::span<const std::size_t>(t));
}

}  // namespace geopoi::ad
