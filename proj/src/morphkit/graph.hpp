#pragma once

#include <functional>
#include <vector>

#include "tensor.hpp"

namespace morphkit {

// Reverse-mode tape. Ops append records in execution order; backward() walks
// the tape once in reverse, which is reverse topological order by
// construction.
class Graph {
public:
  Tensor conv2d(const Tensor& x, Parameter& w, Parameter& b, int stride,
                int pad, const std::string& layer = "conv");
  Tensor deconv2d(const Tensor& x, Parameter& w, Parameter& b, int stride,
                  int pad, const std::string& layer = "deconv");
  Tensor maxpool(const Tensor& x, int k, int stride, int pad);
  Tensor avgpool(const Tensor& x, int k, int stride);
  Tensor relu(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  Tensor concat_channels(const std::vector<Tensor>& xs);
  Tensor slice_channels(const Tensor& x, int c0, int c1);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor mul_elementwise(const Tensor& a, const Tensor& b);
  // a*x + b, elementwise with scalar coefficients.
  Tensor affine_scalar(const Tensor& x, double a, double b);

  // Converts a predicted 9-vector residual (N,9,1,1) into a pixel-frame
  // homography (N,9,1,1): H_pix = S_inv * (I + residual) * S, where S maps
  // pixel coordinates of a (width x height) raster onto [-1,1]^2.
  Tensor residual_to_homography(const Tensor& residual, int width, int height);

  // Samples `image` at homography-transformed output-grid coordinates.
  // `h` is (N,9,1,1) row-major, applied to output pixel coordinates to get
  // source sampling locations. Differentiable w.r.t. h only; the image is
  // treated as fixed. Pixels with |denominator| <= 1e-9 take the fill value
  // and bump *degenerate_count.
  Tensor warp_by_homography(const Tensor& image, const Tensor& h,
                            double fill = 0.0,
                            int64_t* degenerate_count = nullptr);

  // Row-wise 1D linear sampling: out(n,c,y,x) = image(n,c,y, xc(n,0,y,x)).
  // Differentiable w.r.t. both image and coordinates.
  Tensor sample_rows_1d(const Tensor& image, const Tensor& xcoords,
                        double fill = 0.0);

  // scale * sum(0.5 * (pred - target)^2); returns a scalar tensor.
  Tensor euclidean_loss(const Tensor& pred, const Tensor& target,
                        double scale = 1.0);

  // Seeds d(loss)/d(loss)=1 and runs the tape backwards exactly once.
  void backward(const Tensor& loss);

  size_t size() const { return tape_.size(); }
  void clear() { tape_.clear(); }

  // Appends a custom backward record; used by ops implemented in other
  // translation units.
  void push(std::function<void()> fn) { tape_.push_back(std::move(fn)); }

private:
  std::vector<std::function<void()>> tape_;
};

// Bias-corrected Adam update over the given parameters. t is the 1-based
// step count. Gradients are read from each parameter tensor's grad buffer.
void adam_step(std::vector<Parameter*>& params, double lr, double beta1,
               double beta2, double eps, int64_t t);

}  // namespace morphkit
