#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"

namespace morphkit {

struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  int64_t numel() const {
    return static_cast<int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;
};

// Node storage shared between Tensor handles and the autograd tape.
struct TensorData {
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;  // allocated lazily on first accumulation
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != static_cast<size_t>(shape.numel()))
      grad.assign(static_cast<size_t>(shape.numel()), 0.0);
  }
};

using NodePtr = std::shared_ptr<TensorData>;

// Value-semantic handle to a tensor node. Copies share storage.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(NodePtr p) : p_(std::move(p)) {}

  static Tensor zeros(Shape s, bool requires_grad = false);
  static Tensor full(Shape s, double v, bool requires_grad = false);
  static Tensor from_vector(Shape s, std::vector<double> v,
                            bool requires_grad = false);

  bool valid() const { return static_cast<bool>(p_); }
  const Shape& shape() const { return p_->shape; }
  int64_t numel() const { return p_->shape.numel(); }
  bool requires_grad() const { return p_->requires_grad; }

  double* data() { return p_->val.data(); }
  const double* data() const { return p_->val.data(); }
  std::vector<double>& vec() { return p_->val; }
  const std::vector<double>& vec() const { return p_->val; }

  double* grad() {
    p_->ensure_grad();
    return p_->grad.data();
  }
  const std::vector<double>& grad_vec() const { return p_->grad; }
  bool has_grad() const { return !p_->grad.empty(); }
  void zero_grad() {
    if (!p_->grad.empty()) std::fill(p_->grad.begin(), p_->grad.end(), 0.0);
  }

  double& at(int n, int c, int y, int x) {
    const Shape& s = p_->shape;
    return p_->val[((static_cast<int64_t>(n) * s.c + c) * s.h + y) * s.w + x];
  }
  double at(int n, int c, int y, int x) const {
    const Shape& s = p_->shape;
    return p_->val[((static_cast<int64_t>(n) * s.c + c) * s.h + y) * s.w + x];
  }

  NodePtr node() const { return p_; }

  bool all_finite() const;

private:
  NodePtr p_;
};

// Trainable tensor with Adam moment buffers and a name path
// ("module/layer/kind").
struct Parameter {
  Tensor tensor;
  std::string name;
  std::vector<double> adam_m;
  std::vector<double> adam_v;

  Parameter() = default;
  Parameter(std::string name_, Shape s)
      : tensor(Tensor::zeros(s, /*requires_grad=*/true)),
        name(std::move(name_)),
        adam_m(static_cast<size_t>(s.numel()), 0.0),
        adam_v(static_cast<size_t>(s.numel()), 0.0) {}
};

// Xavier/Glorot uniform fill: +-sqrt(6 / (fan_in + fan_out)).
void xavier_init(Parameter& p, int fan_in, int fan_out, SeededRng& rng);
void constant_init(Parameter& p, double v);

}  // namespace morphkit
