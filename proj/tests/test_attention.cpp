#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "straw/attention.hpp"
#include "straw/gradcheck_suite.hpp"

using namespace straw;

TEST_CASE("parametrize: zero raw maps to the grid midpoint") {
  double raw[4] = {0, 0, 0, 0};
  auto p = attn_parametrize(raw, 11, 11);
  CHECK(p.center == doctest::Approx(5.0));
  CHECK(p.stride == doctest::Approx(1.0));
  CHECK(p.variance == doctest::Approx(1.0));
  CHECK(p.intensity == doctest::Approx(1.0));
}

TEST_CASE("parametrize: center saturates inside the grid") {
  double raw[4] = {50, 0, 0, 0};
  auto p = attn_parametrize(raw, 11, 11);
  CHECK(p.center == doctest::Approx(10.0));
  raw[0] = -50;
  p = attn_parametrize(raw, 11, 11);
  CHECK(p.center == doctest::Approx(0.0));
}

TEST_CASE("parametrize: K=1 clamps the stride denominator") {
  double raw[4] = {0, 0.5, 0, 0};
  auto p = attn_parametrize(raw, 11, 1);
  CHECK(p.stride == doctest::Approx(std::exp(0.5) * 10.0));
}

TEST_CASE("filterbank rows always sum to 1") {
  AttnParams<double> p;
  p.center = 3.7;
  p.stride = 2.1;
  p.variance = 0.5;
  p.intensity = 1.3;
  auto bank = attn_filterbank(p, 5, 13);
  for (size_t k = 0; k < 5; ++k) {
    double s = 0;
    for (size_t t = 0; t < 13; ++t) {
      s += bank.F(k, t);
      CHECK(bank.F(k, t) >= 0.0);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("near-delta filterbank is one-hot at consecutive columns") {
  AttnParams<double> p;
  p.center = 2;
  p.stride = 1;
  p.variance = 1e-6;
  p.intensity = 1;
  auto bank = attn_filterbank(p, 3, 5);
  // filters sit at columns 1, 2, 3
  for (size_t k = 0; k < 3; ++k)
    for (size_t t = 0; t < 5; ++t) {
      double want = (t == k + 1) ? 1.0 : 0.0;
      CHECK(bank.F(k, t) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("read with one-hot filters picks plan columns") {
  AttnParams<double> p;
  p.center = 2;
  p.stride = 1;
  p.variance = 1e-6;
  p.intensity = 1;
  auto bank = attn_filterbank(p, 3, 5);
  Tensor64 plan({1, 5}, {10, 20, 30, 40, 50});
  Tensor64 patch = attn_read(plan, bank);
  CHECK(patch(0, 0) == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(patch(0, 1) == doctest::Approx(30.0).epsilon(1e-6));
  CHECK(patch(0, 2) == doctest::Approx(40.0).epsilon(1e-6));

  Tensor64 zero_plan({1, 5});
  Tensor64 zpatch = attn_read(zero_plan, bank);
  for (size_t i = 0; i < zpatch.numel(); ++i) CHECK(zpatch[i] == 0.0);

  // intensity scales linearly
  auto p2 = p;
  p2.intensity = 2;
  auto bank2 = attn_filterbank(p2, 3, 5);
  Tensor64 patch2 = attn_read(plan, bank2);
  for (size_t i = 0; i < patch.numel(); ++i)
    CHECK(patch2[i] == doctest::Approx(2 * patch[i]).epsilon(1e-12));
}

TEST_CASE("write with a one-hot filter deposits at its column") {
  AttnParams<double> p;
  p.center = 2;
  p.stride = 1;
  p.variance = 1e-6;
  p.intensity = 1;
  auto bank = attn_filterbank(p, 1, 5);
  Tensor64 patch({1, 1}, {7});
  Tensor64 out = attn_write(patch, bank);
  double want[5] = {0, 0, 7, 0, 0};
  for (size_t t = 0; t < 5; ++t) CHECK(out(0, t) == doctest::Approx(want[t]).epsilon(1e-9));

  Tensor64 zpatch({1, 1});
  Tensor64 zout = attn_write(zpatch, bank);
  for (size_t i = 0; i < zout.numel(); ++i) CHECK(zout[i] == 0.0);
}

TEST_CASE("write then read with a near-delta full-width bank recovers the patch") {
  const size_t T = 6;
  AttnParams<double> p;
  p.center = (T - 1) / 2.0;
  p.stride = 1;
  p.variance = 1e-6;
  p.intensity = 1;
  auto bank = attn_filterbank(p, T, T);
  Rng rng(9, 0);
  Tensor64 patch({2, T});
  for (auto& v : patch.data) v = rng.normal();
  Tensor64 written = attn_write(patch, bank);
  Tensor64 back = attn_read(written, bank);
  for (size_t i = 0; i < patch.numel(); ++i)
    CHECK(back[i] == doctest::Approx(patch[i]).epsilon(1e-3));
}

TEST_CASE("degenerate variance rows clamp instead of dividing by zero") {
  AttnParams<double> p;
  p.center = -100;  // all mass far off grid
  p.stride = 0.1;
  p.variance = 1e-9;
  p.intensity = 1;
  auto bank = attn_filterbank(p, 2, 5);
  for (size_t k = 0; k < 2; ++k) CHECK(bank.clamped[k] == 1);
  for (size_t i = 0; i < bank.F.numel(); ++i) CHECK(std::isfinite(bank.F[i]));
}

TEST_CASE("finite differences: read and write including attention params") {
  auto rd = gradcheck_detail::check_attention_read();
  CHECK_MESSAGE(rd.pass, rd.worst_param, " rel err ", rd.max_rel_error);
  auto wr = gradcheck_detail::check_attention_write();
  CHECK_MESSAGE(wr.pass, wr.worst_param, " rel err ", wr.max_rel_error);
}
