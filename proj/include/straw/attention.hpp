#pragma once

#include "straw/kernels.hpp"
#include "straw/tensor.hpp"

namespace straw {

// 1-D Gaussian attention over plan columns. A K-filter bank is parametrized
// by (center, stride, variance, intensity); reading extracts an R x K patch
// from an R x T plan, writing deposits an R x K patch back over the plan.

template <class T>
struct AttnParams {
  T center = 0, stride = 0, variance = 0, intensity = 0;
};

template <class T>
struct AttnBank {
  size_t K = 0, Tlen = 0;
  AttnParams<T> p;
  TensorT<T> mu;                 // K
  TensorT<T> unnorm;             // K x T
  TensorT<T> F;                  // K x T, rows sum to 1 (unless clamped)
  TensorT<T> z;                  // K row sums before clamping
  std::vector<uint8_t> clamped;  // per-row clamp indicator
};

inline constexpr double kAttnZFloor = 1e-8;
// exp() of a very negative learned log-variance underflows to exactly zero,
// which a Gaussian filter cannot survive; the floor keeps training finite.
// The exp arguments are capped as well: a runaway logit would overflow to
// inf and poison every gradient behind it (0 * inf).
inline constexpr double kAttnVarFloor = 1e-8;
inline constexpr double kAttnMaxLog = 20.0;

template <class T>
T attn_exp(T raw) {
  return std::exp(std::min(raw, static_cast<T>(kAttnMaxLog)));
}

// derivative of attn_exp: zero past the cap
template <class T>
T attn_exp_grad(T raw, T expval) {
  return raw > static_cast<T>(kAttnMaxLog) ? T(0) : expval;
}

// raw = (g~, log delta~, log sigma~^2, log gamma~)
template <class T>
AttnParams<T> attn_parametrize(const T raw[4], size_t Tlen, size_t K) {
  STRAW_CHECK(Tlen >= 1 && K >= 1, "attention needs T >= 1, K >= 1");
  AttnParams<T> p;
  T span = static_cast<T>(Tlen - 1);
  p.center = span * (std::tanh(raw[0]) + T(1)) / T(2);
  p.stride = attn_exp(raw[1]) * span / static_cast<T>(K > 1 ? K - 1 : 1);
  p.variance = attn_exp(raw[2]) + static_cast<T>(kAttnVarFloor);
  p.intensity = attn_exp(raw[3]);
  return p;
}

// draw += J^T dp for the map above.
template <class T>
void attn_parametrize_backward(const T raw[4], const AttnParams<T>& p, const AttnParams<T>& dp,
                               size_t Tlen, size_t K, T draw[4]) {
  T span = static_cast<T>(Tlen - 1);
  T th = std::tanh(raw[0]);
  draw[0] += dp.center * span * (T(1) - th * th) / T(2);
  draw[1] += dp.stride * attn_exp_grad(raw[1], p.stride);
  draw[2] +=
      dp.variance * attn_exp_grad(raw[2], p.variance - static_cast<T>(kAttnVarFloor));
  draw[3] += dp.intensity * attn_exp_grad(raw[3], p.intensity);
  (void)K;
}

template <class T>
AttnBank<T> attn_filterbank(const AttnParams<T>& p, size_t K, size_t Tlen) {
  STRAW_CHECK(p.variance > T(0), "attention variance must be positive");
  AttnBank<T> bank;
  bank.K = K;
  bank.Tlen = Tlen;
  bank.p = p;
  bank.mu = TensorT<T>({K});
  bank.unnorm = TensorT<T>({K, Tlen});
  bank.F = TensorT<T>({K, Tlen});
  bank.z = TensorT<T>({K});
  bank.clamped.assign(K, 0);
  for (size_t k = 0; k < K; ++k) {
    T offset = static_cast<T>(k) - static_cast<T>(K) / T(2) + T(0.5);
    bank.mu[k] = p.center + offset * p.stride;
    T zsum = T(0);
    for (size_t tau = 0; tau < Tlen; ++tau) {
      T d = static_cast<T>(tau) - bank.mu[k];
      T u = std::exp(-d * d / (T(2) * p.variance));
      bank.unnorm(k, tau) = u;
      zsum += u;
    }
    bank.z[k] = zsum;
    T denom = zsum;
    if (denom < static_cast<T>(kAttnZFloor)) {
      denom = static_cast<T>(kAttnZFloor);
      bank.clamped[k] = 1;
    }
    for (size_t tau = 0; tau < Tlen; ++tau) bank.F(k, tau) = bank.unnorm(k, tau) / denom;
  }
  return bank;
}

// Accumulates (center, stride, variance) gradients from dF.
template <class T>
void attn_filterbank_backward(const AttnBank<T>& bank, const TensorT<T>& dF,
                              AttnParams<T>& dp) {
  size_t K = bank.K, Tlen = bank.Tlen;
  T v = bank.p.variance;
  for (size_t k = 0; k < K; ++k) {
    T denom = bank.clamped[k] ? static_cast<T>(kAttnZFloor) : bank.z[k];
    // dL/dU = dF/denom - (sum_tau dF*F)/denom when normalized; clamped rows
    // have a constant denominator.
    T coupling = T(0);
    if (!bank.clamped[k]) {
      for (size_t tau = 0; tau < Tlen; ++tau) coupling += dF(k, tau) * bank.F(k, tau);
    }
    T dmu = T(0), dv_k = T(0);
    for (size_t tau = 0; tau < Tlen; ++tau) {
      T du = (dF(k, tau) - coupling) / denom;
      T u = bank.unnorm(k, tau);
      T d = static_cast<T>(tau) - bank.mu[k];
      dmu += du * u * d / v;
      dv_k += du * u * d * d / (T(2) * v * v);
    }
    T offset = static_cast<T>(k) - static_cast<T>(K) / T(2) + T(0.5);
    dp.center += dmu;
    dp.stride += dmu * offset;
    dp.variance += dv_k;
  }
}

// patch = intensity * plan * F^T  (plan: R x T, patch: R x K)
template <class T>
TensorT<T> attn_read(const TensorT<T>& plan, const AttnBank<T>& bank) {
  STRAW_CHECK(plan.rank() == 2 && plan.dim(1) == bank.Tlen, "read: plan shape mismatch");
  size_t R = plan.dim(0);
  TensorT<T> patch({R, bank.K});
  kernels::gemm_nt(plan.ptr(), bank.F.ptr(), patch.ptr(), R, bank.Tlen, bank.K,
                   bank.p.intensity);
  return patch;
}

// dplan += gamma * dpatch * F ; dF += gamma * plan^T dpatch ; dintensity via patch values.
template <class T>
void attn_read_backward(const TensorT<T>& plan, const AttnBank<T>& bank,
                        const TensorT<T>& patch, const TensorT<T>& dpatch, TensorT<T>& dplan,
                        TensorT<T>& dF, T& dintensity) {
  size_t R = plan.dim(0), K = bank.K, Tlen = bank.Tlen;
  kernels::gemm_nn_acc(dpatch.ptr(), bank.F.ptr(), dplan.ptr(), R, K, Tlen, bank.p.intensity);
  for (size_t k = 0; k < K; ++k)
    for (size_t tau = 0; tau < Tlen; ++tau) {
      T acc = T(0);
      for (size_t i = 0; i < R; ++i) acc += dpatch(i, k) * plan(i, tau);
      dF(k, tau) += bank.p.intensity * acc;
    }
  dintensity += dot_all(dpatch, patch) / bank.p.intensity;
}

// out = (1/intensity) * patch * F  (patch: R x K, out: R x T)
template <class T>
TensorT<T> attn_write(const TensorT<T>& patch, const AttnBank<T>& bank) {
  STRAW_CHECK(patch.rank() == 2 && patch.dim(1) == bank.K, "write: patch shape mismatch");
  size_t R = patch.dim(0);
  TensorT<T> out({R, bank.Tlen});
  kernels::gemm_nn_acc(patch.ptr(), bank.F.ptr(), out.ptr(), R, bank.K, bank.Tlen,
                       T(1) / bank.p.intensity);
  return out;
}

template <class T>
void attn_write_backward(const TensorT<T>& patch, const AttnBank<T>& bank,
                         const TensorT<T>& written, const TensorT<T>& dout, TensorT<T>& dpatch,
                         TensorT<T>& dF, T& dintensity) {
  size_t R = patch.dim(0), K = bank.K, Tlen = bank.Tlen;
  T inv = T(1) / bank.p.intensity;
  for (size_t i = 0; i < R; ++i)
    for (size_t k = 0; k < K; ++k) {
      T acc = T(0);
      for (size_t tau = 0; tau < Tlen; ++tau) acc += dout(i, tau) * bank.F(k, tau);
      dpatch(i, k) += inv * acc;
    }
  for (size_t k = 0; k < K; ++k)
    for (size_t tau = 0; tau < Tlen; ++tau) {
      T acc = T(0);
      for (size_t i = 0; i < R; ++i) acc += patch(i, k) * dout(i, tau);
      dF(k, tau) += inv * acc;
    }
  dintensity += -dot_all(dout, written) / bank.p.intensity;
}

}  // namespace straw
