#include <cstring>

#include "graph.hpp"

namespace morphkit {
namespace {

constexpr int kMaxThreads = 4;

int plan_threads(int64_t n) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  return static_cast<int>(std::min<int64_t>(std::min(hw, kMaxThreads), n));
}

// C[M x N] += A[M x K] * B[K x N]
void gemm_acc(int64_t M, int64_t N, int64_t K, const double* A,
              const double* B, double* C) {
  for (int64_t i = 0; i < M; ++i) {
    double* Ci = C + i * N;
    const double* Ai = A + i * K;
    for (int64_t k = 0; k < K; ++k) {
      const double a = Ai[k];
      const double* Bk = B + k * N;
      for (int64_t j = 0; j < N; ++j) Ci[j] += a * Bk[j];
    }
  }
}

// C[M x N] += A[M x K] * B[N x K]^T
void matmul_abt_acc(int64_t M, int64_t N, int64_t K, const double* A,
                    const double* B, double* C) {
  for (int64_t i = 0; i < M; ++i) {
    const double* Ai = A + i * K;
    double* Ci = C + i * N;
    for (int64_t j = 0; j < N; ++j) {
      const double* Bj = B + j * K;
      double s = 0.0;
      for (int64_t k = 0; k < K; ++k) s += Ai[k] * Bj[k];
      Ci[j] += s;
    }
  }
}

// x (C x H x W) -> buf[(C*k*k) x (OH*OW)], zero padded.
void im2col(const double* x, int C, int H, int W, int k, int stride, int pad,
            int OH, int OW, double* buf) {
  const int64_t P = static_cast<int64_t>(OH) * OW;
  for (int ci = 0; ci < C; ++ci) {
    const double* xc = x + static_cast<int64_t>(ci) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = buf + ((static_cast<int64_t>(ci) * k + ky) * k + kx) * P;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* r = row + static_cast<int64_t>(oy) * OW;
          if (iy < 0 || iy >= H) {
            std::memset(r, 0, sizeof(double) * OW);
            continue;
          }
          const double* xr = xc + static_cast<int64_t>(iy) * W;
          if (stride == 1) {
            const int x0 = -pad + kx;
            for (int ox = 0; ox < OW; ++ox) {
              const int ix = x0 + ox;
              r[ox] = (ix >= 0 && ix < W) ? xr[ix] : 0.0;
            }
          } else {
            for (int ox = 0; ox < OW; ++ox) {
              const int ix = ox * stride - pad + kx;
              r[ox] = (ix >= 0 && ix < W) ? xr[ix] : 0.0;
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: buf[(C*k*k) x (OH*OW)] scatter-added into x (C x H x W).
void col2im_acc(const double* buf, int C, int H, int W, int k, int stride,
                int pad, int OH, int OW, double* x) {
  const int64_t P = static_cast<int64_t>(OH) * OW;
  for (int ci = 0; ci < C; ++ci) {
    double* xc = x + static_cast<int64_t>(ci) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row =
            buf + ((static_cast<int64_t>(ci) * k + ky) * k + kx) * P;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          double* xr = xc + static_cast<int64_t>(iy) * W;
          const double* r = row + static_cast<int64_t>(oy) * OW;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) xr[ix] += r[ox];
          }
        }
      }
    }
  }
}

void add_bias(double* out, const double* bias, int C, int64_t P) {
  for (int c = 0; c < C; ++c) {
    const double b = bias[c];
    double* o = out + c * P;
    for (int64_t p = 0; p < P; ++p) o[p] += b;
  }
}

void check_finite_positive(int v, const char* what, const std::string& layer) {
  if (v < 1)
    fail(ErrorKind::Shape,
         layer + ": " + what + " collapsed to " + std::to_string(v));
}

}  // namespace

Tensor Graph::conv2d(const Tensor& x, Parameter& w, Parameter& b, int stride,
                     int pad, const std::string& layer) {
  const Shape xs = x.shape(), ws = w.tensor.shape();
  const int cout = ws.n, cin = ws.c, k = ws.h;
  if (ws.h != ws.w)
    fail(ErrorKind::Shape, layer + ": non-square kernel " + ws.str());
  if (cin != xs.c)
    fail(ErrorKind::Shape, layer + ": input has " + std::to_string(xs.c) +
                               " channels, weight expects " +
                               std::to_string(cin));
  if (b.tensor.shape().numel() != cout)
    fail(ErrorKind::Shape, layer + ": bias size " +
                               std::to_string(b.tensor.shape().numel()) +
                               " != out channels " + std::to_string(cout));
  const int OH = conv_out_dim(xs.h, k, stride, pad);
  const int OW = conv_out_dim(xs.w, k, stride, pad);
  check_finite_positive(OH, "output height", layer);
  check_finite_positive(OW, "output width", layer);

  Tensor out = Tensor::zeros({xs.n, cout, OH, OW},
                             x.requires_grad() || w.tensor.requires_grad());
  const int64_t K = static_cast<int64_t>(cin) * k * k;
  const int64_t P = static_cast<int64_t>(OH) * OW;
  const int64_t x_sz = static_cast<int64_t>(xs.c) * xs.h * xs.w;
  const int64_t o_sz = static_cast<int64_t>(cout) * P;

  {
    const int nt = plan_threads(xs.n);
    std::vector<std::vector<double>> bufs(nt);
    for (auto& bf : bufs) bf.resize(static_cast<size_t>(K * P));
    parallel_for(
        xs.n,
        [&](int64_t n, int t) {
          double* buf = bufs[t].data();
          im2col(x.data() + n * x_sz, cin, xs.h, xs.w, k, stride, pad, OH, OW,
                 buf);
          double* o = out.data() + n * o_sz;
          gemm_acc(cout, P, K, w.tensor.data(), buf, o);
          add_bias(o, b.tensor.data(), cout, P);
        },
        nt);
  }

  Tensor xt = x, wt = w.tensor, bt = b.tensor;
  Shape os = out.shape();
  push([xt, wt, bt, out, os, xs, cin, cout, k, stride, pad, OH, OW, K, P, x_sz,
        o_sz]() mutable {
    const double* go = out.grad_vec().data();
    if (out.grad_vec().empty()) return;
    const bool need_gx = xt.requires_grad();
    const bool need_gw = wt.requires_grad();
    const int nt = plan_threads(xs.n);
    std::vector<std::vector<double>> bufs(nt), gw_part, gb_part, col_part;
    for (auto& bf : bufs) bf.resize(static_cast<size_t>(K * P));
    if (need_gw) {
      gw_part.assign(nt, std::vector<double>(wt.numel(), 0.0));
      gb_part.assign(nt, std::vector<double>(cout, 0.0));
    }
    std::vector<double> wT;
    if (need_gx) {
      wT.resize(static_cast<size_t>(K) * cout);
      const double* wd = wt.data();
      for (int co = 0; co < cout; ++co)
        for (int64_t kk = 0; kk < K; ++kk)
          wT[kk * cout + co] = wd[co * K + kk];
      col_part.assign(nt, std::vector<double>(static_cast<size_t>(K * P)));
    }
    double* gx = need_gx ? xt.grad() : nullptr;
    parallel_for(
        xs.n,
        [&](int64_t n, int t) {
          double* buf = bufs[t].data();
          const double* gon = go + n * o_sz;
          if (need_gw) {
            im2col(xt.data() + n * x_sz, cin, xs.h, xs.w, k, stride, pad, OH,
                   OW, buf);
            matmul_abt_acc(cout, K, P, gon, buf, gw_part[t].data());
            for (int co = 0; co < cout; ++co) {
              double s = 0.0;
              const double* g = gon + co * P;
              for (int64_t p = 0; p < P; ++p) s += g[p];
              gb_part[t][co] += s;
            }
          }
          if (need_gx) {
            double* col = col_part[t].data();
            std::fill(col, col + K * P, 0.0);
            gemm_acc(K, P, cout, wT.data(), gon, col);
            col2im_acc(col, cin, xs.h, xs.w, k, stride, pad, OH, OW,
                       gx + n * x_sz);
          }
        },
        nt);
    if (need_gw) {
      double* gw = wt.grad();
      double* gb = bt.grad();
      for (int t = 0; t < nt; ++t) {
        for (int64_t i = 0; i < wt.numel(); ++i) gw[i] += gw_part[t][i];
        for (int co = 0; co < cout; ++co) gb[co] += gb_part[t][co];
      }
    }
  });
  return out;
}

Tensor Graph::deconv2d(const Tensor& x, Parameter& w, Parameter& b, int stride,
                       int pad, const std::string& layer) {
  const Shape xs = x.shape(), ws = w.tensor.shape();
  const int cin = ws.n, cout = ws.c, k = ws.h;
  if (ws.h != ws.w)
    fail(ErrorKind::Shape, layer + ": non-square kernel " + ws.str());
  if (cin != xs.c)
    fail(ErrorKind::Shape, layer + ": input has " + std::to_string(xs.c) +
                               " channels, weight expects " +
                               std::to_string(cin));
  if (b.tensor.shape().numel() != cout)
    fail(ErrorKind::Shape, layer + ": bias size mismatch");
  const int OH = deconv_out_dim(xs.h, k, stride, pad);
  const int OW = deconv_out_dim(xs.w, k, stride, pad);
  check_finite_positive(OH, "output height", layer);
  check_finite_positive(OW, "output width", layer);

  Tensor out = Tensor::zeros({xs.n, cout, OH, OW},
                             x.requires_grad() || w.tensor.requires_grad());
  const int64_t Kc = static_cast<int64_t>(cout) * k * k;
  const int64_t Pin = static_cast<int64_t>(xs.h) * xs.w;
  const int64_t x_sz = static_cast<int64_t>(xs.c) * Pin;
  const int64_t o_sz = static_cast<int64_t>(cout) * OH * OW;

  // w is (cin, cout, k, k); forward needs the (cout*k*k) x cin transpose.
  std::vector<double> wTf(static_cast<size_t>(Kc) * cin);
  {
    const double* wd = w.tensor.data();
    for (int ci = 0; ci < cin; ++ci)
      for (int64_t kk = 0; kk < Kc; ++kk)
        wTf[kk * cin + ci] = wd[ci * Kc + kk];
  }

  {
    const int nt = plan_threads(xs.n);
    std::vector<std::vector<double>> cols(nt);
    for (auto& cf : cols) cf.resize(static_cast<size_t>(Kc * Pin));
    parallel_for(
        xs.n,
        [&](int64_t n, int t) {
          double* col = cols[t].data();
          std::fill(col, col + Kc * Pin, 0.0);
          gemm_acc(Kc, Pin, cin, wTf.data(), x.data() + n * x_sz, col);
          double* o = out.data() + n * o_sz;
          col2im_acc(col, cout, OH, OW, k, stride, pad, xs.h, xs.w, o);
          add_bias(o, b.tensor.data(), cout,
                   static_cast<int64_t>(OH) * OW);
        },
        nt);
  }

  Tensor xt = x, wt = w.tensor, bt = b.tensor;
  push([xt, wt, bt, out, xs, cin, cout, k, stride, pad, OH, OW, Kc, Pin, x_sz,
        o_sz]() mutable {
    if (out.grad_vec().empty()) return;
    const double* go = out.grad_vec().data();
    const bool need_gx = xt.requires_grad();
    const bool need_gw = wt.requires_grad();
    const int nt = plan_threads(xs.n);
    std::vector<std::vector<double>> bufs(nt), gw_part, gb_part;
    for (auto& bf : bufs) bf.resize(static_cast<size_t>(Kc * Pin));
    if (need_gw) {
      gw_part.assign(nt, std::vector<double>(wt.numel(), 0.0));
      gb_part.assign(nt, std::vector<double>(cout, 0.0));
    }
    double* gx = need_gx ? xt.grad() : nullptr;
    parallel_for(
        xs.n,
        [&](int64_t n, int t) {
          double* buf = bufs[t].data();
          const double* gon = go + n * o_sz;
          // Gather windows of the output gradient back onto the input grid.
          im2col(gon, cout, OH, OW, k, stride, pad, xs.h, xs.w, buf);
          if (need_gx)
            gemm_acc(cin, Pin, Kc, wt.data(), buf, gx + n * x_sz);
          if (need_gw) {
            matmul_abt_acc(cin, Kc, Pin, xt.data() + n * x_sz, buf,
                           gw_part[t].data());
            const int64_t Pout = static_cast<int64_t>(OH) * OW;
            for (int co = 0; co < cout; ++co) {
              double s = 0.0;
              const double* g = gon + co * Pout;
              for (int64_t p = 0; p < Pout; ++p) s += g[p];
              gb_part[t][co] += s;
            }
          }
        },
        nt);
    if (need_gw) {
      double* gw = wt.grad();
      double* gb = bt.grad();
      for (int t = 0; t < nt; ++t) {
        for (int64_t i = 0; i < wt.numel(); ++i) gw[i] += gw_part[t][i];
        for (int co = 0; co < cout; ++co) gb[co] += gb_part[t][co];
      }
    }
  });
  return out;
}

}  // namespace morphkit
