#include "graph.hpp"

namespace morphkit {

void Graph::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    fail(ErrorKind::Shape, "backward: loss must be a scalar, got " +
                               loss.shape().str());
  Tensor l = loss;
  l.grad()[0] = 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  tape_.clear();
}

}  // namespace morphkit
