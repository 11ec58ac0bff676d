#include "tensor.hpp"

#include <cmath>
#include <sstream>

namespace morphkit {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape s, bool requires_grad) {
  auto p = std::make_shared<TensorData>();
  p->shape = s;
  p->val.assign(static_cast<size_t>(s.numel()), 0.0);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

Tensor Tensor::full(Shape s, double v, bool requires_grad) {
  Tensor t = zeros(s, requires_grad);
  std::fill(t.vec().begin(), t.vec().end(), v);
  return t;
}

Tensor Tensor::from_vector(Shape s, std::vector<double> v, bool requires_grad) {
  if (static_cast<int64_t>(v.size()) != s.numel())
    fail(ErrorKind::Shape, "from_vector: " + std::to_string(v.size()) +
                               " values for shape " + s.str());
  auto p = std::make_shared<TensorData>();
  p->shape = s;
  p->val = std::move(v);
  p->requires_grad = requires_grad;
  return Tensor(std::move(p));
}

bool Tensor::all_finite() const {
  for (double v : p_->val)
    if (!std::isfinite(v)) return false;
  return true;
}

void xavier_init(Parameter& p, int fan_in, int fan_out, SeededRng& rng) {
  if (fan_in <= 0 || fan_out <= 0)
    fail(ErrorKind::Config, "xavier_init: bad fans for " + p.name);
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : p.tensor.vec()) v = rng.uniform(-bound, bound);
}

void constant_init(Parameter& p, double v) {
  std::fill(p.tensor.vec().begin(), p.tensor.vec().end(), v);
}

}  // namespace morphkit
