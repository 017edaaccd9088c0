#pragma once

#include <cstddef>

#include "straw/tensor.hpp"

// Dense kernels behind the layer implementations. Each kernel has a serial
// reference and an OpenMP variant; the unsuffixed entry point dispatches on a
// work-size threshold and a process-global switch. Parallel loops only split
// independent output elements and keep the serial inner summation order, so
// both variants produce bit-identical results.

namespace straw::kernels {

// Process-global enable for the OpenMP paths. Training with multiple async
// workers turns this off; already saturated cores gain nothing from nesting.
bool parallel_enabled();
void set_parallel_enabled(bool on);

inline constexpr size_t kMinParallelWork = size_t(1) << 15;

// ---- y = W x + b, W is m x n row-major (b may be null) ----

template <class T>
void matvec_serial(const T* w, const T* x, const T* b, T* y, size_t m, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T acc = b ? b[i] : T(0);
    const T* row = w + i * n;
    for (size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

template <class T>
void matvec_omp(const T* w, const T* x, const T* b, T* y, size_t m, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i) {
    T acc = b ? b[i] : T(0);
    const T* row = w + i * n;
    for (size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

template <class T>
void matvec(const T* w, const T* x, const T* b, T* y, size_t m, size_t n) {
  if (parallel_enabled() && m * n >= kMinParallelWork)
    matvec_omp(w, x, b, y, m, n);
  else
    matvec_serial(w, x, b, y, m, n);
}

// ---- dx += W^T dy ----

template <class T>
void matvec_t_acc_serial(const T* w, const T* dy, T* dx, size_t m, size_t n) {
  for (size_t j = 0; j < n; ++j) {
    T acc = T(0);
    for (size_t i = 0; i < m; ++i) acc += w[i * n + j] * dy[i];
    dx[j] += acc;
  }
}

template <class T>
void matvec_t_acc_omp(const T* w, const T* dy, T* dx, size_t m, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long j = 0; j < static_cast<long long>(n); ++j) {
    T acc = T(0);
    for (size_t i = 0; i < m; ++i) acc += w[i * n + j] * dy[i];
    dx[j] += acc;
  }
}

template <class T>
void matvec_t_acc(const T* w, const T* dy, T* dx, size_t m, size_t n) {
  if (parallel_enabled() && m * n >= kMinParallelWork)
    matvec_t_acc_omp(w, dy, dx, m, n);
  else
    matvec_t_acc_serial(w, dy, dx, m, n);
}

// ---- dW += dy x^T, db += dy ----

template <class T>
void outer_acc_serial(const T* dy, const T* x, T* dw, T* db, size_t m, size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T g = dy[i];
    T* row = dw + i * n;
    for (size_t j = 0; j < n; ++j) row[j] += g * x[j];
    if (db) db[i] += g;
  }
}

template <class T>
void outer_acc_omp(const T* dy, const T* x, T* dw, T* db, size_t m, size_t n) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(m); ++i) {
    T g = dy[i];
    T* row = dw + i * n;
    for (size_t j = 0; j < n; ++j) row[j] += g * x[j];
    if (db) db[i] += g;
  }
}

template <class T>
void outer_acc(const T* dy, const T* x, T* dw, T* db, size_t m, size_t n) {
  if (parallel_enabled() && m * n >= kMinParallelWork)
    outer_acc_omp(dy, x, dw, db, m, n);
  else
    outer_acc_serial(dy, x, dw, db, m, n);
}

// ---- C = A B^T  (A: r x t, B: k x t, C: r x k), optionally scaled ----

template <class T>
void gemm_nt_serial(const T* a, const T* bmat, T* c, size_t r, size_t t, size_t k, T scale) {
  for (size_t i = 0; i < r; ++i) {
    const T* arow = a + i * t;
    for (size_t j = 0; j < k; ++j) {
      const T* brow = bmat + j * t;
      T acc = T(0);
      for (size_t q = 0; q < t; ++q) acc += arow[q] * brow[q];
      c[i * k + j] = scale * acc;
    }
  }
}

template <class T>
void gemm_nt_omp(const T* a, const T* bmat, T* c, size_t r, size_t t, size_t k, T scale) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(r); ++i) {
    const T* arow = a + i * t;
    for (size_t j = 0; j < k; ++j) {
      const T* brow = bmat + j * t;
      T acc = T(0);
      for (size_t q = 0; q < t; ++q) acc += arow[q] * brow[q];
      c[i * k + j] = scale * acc;
    }
  }
}

template <class T>
void gemm_nt(const T* a, const T* bmat, T* c, size_t r, size_t t, size_t k, T scale) {
  if (parallel_enabled() && r * t * k >= kMinParallelWork)
    gemm_nt_omp(a, bmat, c, r, t, k, scale);
  else
    gemm_nt_serial(a, bmat, c, r, t, k, scale);
}

// ---- C += A B  (A: r x k, B: k x t, C: r x t), optionally scaled ----

template <class T>
void gemm_nn_acc_serial(const T* a, const T* bmat, T* c, size_t r, size_t k, size_t t, T scale) {
  for (size_t i = 0; i < r; ++i) {
    T* crow = c + i * t;
    for (size_t q = 0; q < k; ++q) {
      T av = scale * a[i * k + q];
      const T* brow = bmat + q * t;
      for (size_t j = 0; j < t; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void gemm_nn_acc_omp(const T* a, const T* bmat, T* c, size_t r, size_t k, size_t t, T scale) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(r); ++i) {
    T* crow = c + i * t;
    for (size_t q = 0; q < k; ++q) {
      T av = scale * a[i * k + q];
      const T* brow = bmat + q * t;
      for (size_t j = 0; j < t; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void gemm_nn_acc(const T* a, const T* bmat, T* c, size_t r, size_t k, size_t t, T scale) {
  if (parallel_enabled() && r * k * t >= kMinParallelWork)
    gemm_nn_acc_omp(a, bmat, c, r, k, t, scale);
  else
    gemm_nn_acc_serial(a, bmat, c, r, k, t, scale);
}

// ---- 2-D convolution, stride 1, square kernel, zero padding ----
// in: (ic, h, w), weights: (oc, ic, k, k), out: (oc, oh, ow)

template <class T>
void conv2d_forward_serial(const T* in, const T* w, const T* b, T* out, size_t ic, size_t h,
                           size_t wd, size_t oc, size_t k, size_t pad) {
  size_t oh = h + 2 * pad - k + 1;
  size_t ow = wd + 2 * pad - k + 1;
  for (size_t o = 0; o < oc; ++o) {
    for (size_t y = 0; y < oh; ++y) {
      for (size_t x = 0; x < ow; ++x) {
        T acc = b ? b[o] : T(0);
        for (size_t c = 0; c < ic; ++c) {
          for (size_t ky = 0; ky < k; ++ky) {
            long long iy = static_cast<long long>(y + ky) - static_cast<long long>(pad);
            if (iy < 0 || iy >= static_cast<long long>(h)) continue;
            for (size_t kx = 0; kx < k; ++kx) {
              long long ix = static_cast<long long>(x + kx) - static_cast<long long>(pad);
              if (ix < 0 || ix >= static_cast<long long>(wd)) continue;
              acc += in[(c * h + iy) * wd + ix] * w[((o * ic + c) * k + ky) * k + kx];
            }
          }
        }
        out[(o * oh + y) * ow + x] = acc;
      }
    }
  }
}

template <class T>
void conv2d_forward_omp(const T* in, const T* w, const T* b, T* out, size_t ic, size_t h,
                        size_t wd, size_t oc, size_t k, size_t pad) {
  size_t oh = h + 2 * pad - k + 1;
  size_t ow = wd + 2 * pad - k + 1;
#pragma omp parallel for schedule(static)
  for (long long o = 0; o < static_cast<long long>(oc); ++o) {
    for (size_t y = 0; y < oh; ++y) {
      for (size_t x = 0; x < ow; ++x) {
        T acc = b ? b[o] : T(0);
        for (size_t c = 0; c < ic; ++c) {
          for (size_t ky = 0; ky < k; ++ky) {
            long long iy = static_cast<long long>(y + ky) - static_cast<long long>(pad);
            if (iy < 0 || iy >= static_cast<long long>(h)) continue;
            for (size_t kx = 0; kx < k; ++kx) {
              long long ix = static_cast<long long>(x + kx) - static_cast<long long>(pad);
              if (ix < 0 || ix >= static_cast<long long>(wd)) continue;
              acc += in[(c * h + iy) * wd + ix] * w[((o * ic + c) * k + ky) * k + kx];
            }
          }
        }
        out[(o * oh + y) * ow + x] = acc;
      }
    }
  }
}

template <class T>
void conv2d_forward(const T* in, const T* w, const T* b, T* out, size_t ic, size_t h, size_t wd,
                    size_t oc, size_t k, size_t pad) {
  size_t work = oc * ic * k * k * h * wd;
  if (parallel_enabled() && work >= kMinParallelWork)
    conv2d_forward_omp(in, w, b, out, ic, h, wd, oc, k, pad);
  else
    conv2d_forward_serial(in, w, b, out, ic, h, wd, oc, k, pad);
}

// Gradients. din may be null (first layer). dw/db accumulated, din accumulated.
template <class T>
void conv2d_backward(const T* in, const T* w, const T* dout, T* dw, T* db, T* din, size_t ic,
                     size_t h, size_t wd, size_t oc, size_t k, size_t pad) {
  size_t oh = h + 2 * pad - k + 1;
  size_t ow = wd + 2 * pad - k + 1;
  for (size_t o = 0; o < oc; ++o) {
    for (size_t y = 0; y < oh; ++y) {
      for (size_t x = 0; x < ow; ++x) {
        T g = dout[(o * oh + y) * ow + x];
        if (db) db[o] += g;
        for (size_t c = 0; c < ic; ++c) {
          for (size_t ky = 0; ky < k; ++ky) {
            long long iy = static_cast<long long>(y + ky) - static_cast<long long>(pad);
            if (iy < 0 || iy >= static_cast<long long>(h)) continue;
            for (size_t kx = 0; kx < k; ++kx) {
              long long ix = static_cast<long long>(x + kx) - static_cast<long long>(pad);
              if (ix < 0 || ix >= static_cast<long long>(wd)) continue;
              size_t in_idx = (c * h + iy) * wd + ix;
              size_t w_idx = ((o * ic + c) * k + ky) * k + kx;
              dw[w_idx] += g * in[in_idx];
              if (din) din[in_idx] += g * w[w_idx];
            }
          }
        }
      }
    }
  }
}

}  // namespace straw::kernels
