#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace morphkit {

enum class ErrorKind {
  Shape,        // tensor/layer dimension mismatch
  Config,       // invalid configuration
  Degenerate,   // degenerate homography denominator
  LogDomain,    // matrix log outside principal domain
  Io,           // file/parse problems
  Usage,        // bad arguments
  Numeric,      // non-finite values, failed convergence
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

// Static partition of [0, n) over a small fixed thread count. Partitioning
// does not depend on scheduling, so results that are written to disjoint
// ranges are reproducible.
template <typename Fn>
void parallel_for(int64_t n, const Fn& fn, int max_threads = 0) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  int nt = max_threads > 0 ? std::min(max_threads, hw) : hw;
  if (n < 2 || nt < 2) {
    for (int64_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  nt = static_cast<int>(std::min<int64_t>(nt, n));
  std::vector<std::thread> threads;
  threads.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    int64_t lo = n * t / nt;
    int64_t hi = n * (t + 1) / nt;
    threads.emplace_back([lo, hi, t, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i, t);
    });
  }
  for (auto& th : threads) th.join();
}

inline int pool_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int deconv_out_dim(int in, int k, int stride, int pad) {
  return (in - 1) * stride - 2 * pad + k;
}

}  // namespace morphkit
