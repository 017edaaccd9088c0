// Times the serial reference kernels against their OpenMP variants and
// verifies both produce bit-identical output on the same inputs.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "straw/kernels.hpp"
#include "straw/rng.hpp"

using straw::Rng;
using clock_type = std::chrono::steady_clock;

namespace {

std::vector<float> randv(size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = clock_type::now();
  for (int i = 0; i < reps; ++i) fn();
  auto t1 = clock_type::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

void report(const char* name, double serial_ms, double omp_ms, bool identical) {
  std::printf("%-16s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n", name, serial_ms,
              omp_ms, serial_ms / omp_ms, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  Rng rng(7, 0);
  namespace k = straw::kernels;
  int reps = 20;

  {
    size_t m = 2048, n = 2048;
    auto w = randv(m * n, rng), x = randv(n, rng), b = randv(m, rng);
    std::vector<float> y1(m), y2(m);
    double ts = time_ms([&] { k::matvec_serial(w.data(), x.data(), b.data(), y1.data(), m, n); },
                        reps);
    double tp =
        time_ms([&] { k::matvec_omp(w.data(), x.data(), b.data(), y2.data(), m, n); }, reps);
    report("matvec", ts, tp, bit_equal(y1, y2));
  }
  {
    size_t m = 2048, n = 2048;
    auto w = randv(m * n, rng), dy = randv(m, rng);
    std::vector<float> dx1(n, 0.f), dx2(n, 0.f);
    double ts =
        time_ms([&] { k::matvec_t_acc_serial(w.data(), dy.data(), dx1.data(), m, n); }, reps);
    double tp = time_ms([&] { k::matvec_t_acc_omp(w.data(), dy.data(), dx2.data(), m, n); }, reps);
    report("matvec_t_acc", ts, tp, bit_equal(dx1, dx2));
  }
  {
    size_t m = 2048, n = 2048;
    auto dy = randv(m, rng), x = randv(n, rng);
    std::vector<float> dw1(m * n, 0.f), dw2(m * n, 0.f), db1(m, 0.f), db2(m, 0.f);
    double ts = time_ms(
        [&] { k::outer_acc_serial(dy.data(), x.data(), dw1.data(), db1.data(), m, n); }, reps);
    double tp = time_ms(
        [&] { k::outer_acc_omp(dy.data(), x.data(), dw2.data(), db2.data(), m, n); }, reps);
    report("outer_acc", ts, tp, bit_equal(dw1, dw2) && bit_equal(db1, db2));
  }
  {
    size_t r = 256, t = 512, kk = 256;
    auto a = randv(r * t, rng), bm = randv(kk * t, rng);
    std::vector<float> c1(r * kk), c2(r * kk);
    double ts = time_ms(
        [&] { k::gemm_nt_serial(a.data(), bm.data(), c1.data(), r, t, kk, 1.0f); }, reps);
    double tp =
        time_ms([&] { k::gemm_nt_omp(a.data(), bm.data(), c2.data(), r, t, kk, 1.0f); }, reps);
    report("gemm_nt", ts, tp, bit_equal(c1, c2));
  }
  {
    size_t r = 256, kk = 256, t = 512;
    auto a = randv(r * kk, rng), bm = randv(kk * t, rng);
    std::vector<float> c1(r * t, 0.f), c2(r * t, 0.f);
    double ts = time_ms(
        [&] { k::gemm_nn_acc_serial(a.data(), bm.data(), c1.data(), r, kk, t, 1.0f); }, reps);
    double tp = time_ms(
        [&] { k::gemm_nn_acc_omp(a.data(), bm.data(), c2.data(), r, kk, t, 1.0f); }, reps);
    report("gemm_nn_acc", ts, tp, bit_equal(c1, c2));
  }
  {
    size_t ic = 16, h = 64, w = 64, oc = 32, kk = 3, pad = 1;
    auto in = randv(ic * h * w, rng), wt = randv(oc * ic * kk * kk, rng), b = randv(oc, rng);
    size_t oh = h + 2 * pad - kk + 1, ow = w + 2 * pad - kk + 1;
    std::vector<float> y1(oc * oh * ow), y2(oc * oh * ow);
    double ts = time_ms(
        [&] {
          k::conv2d_forward_serial(in.data(), wt.data(), b.data(), y1.data(), ic, h, w, oc, kk,
                                   pad);
        },
        reps);
    double tp = time_ms(
        [&] {
          k::conv2d_forward_omp(in.data(), wt.data(), b.data(), y2.data(), ic, h, w, oc, kk, pad);
        },
        reps);
    report("conv2d_forward", ts, tp, bit_equal(y1, y2));
  }
  return 0;
}
