#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "straw/csv.hpp"
#include "straw/gradcheck_suite.hpp"
#include "straw/kernels.hpp"
#include "straw/layers.hpp"
#include "straw/param_store.hpp"
#include "straw/rng.hpp"

using namespace straw;

TEST_CASE("tensor shape and indexing") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  t(1, 2) = 5.0f;
  CHECK(t[5] == 5.0f);
  Tensor u({2, 3});
  u.fill(1.0f);
  t.add(u);
  CHECK(t(0, 0) == 1.0f);
  CHECK(t(1, 2) == 6.0f);
  CHECK(dot_all(u, u) == 6.0f);
}

TEST_CASE("linear layer oracle") {
  // W = [[1,2],[3,4]], b = [1,1], x = [1,1] -> y = [4, 8]
  LinearT<float> lin;
  Rng rng(0, 0);
  lin.init(2, 2, rng);
  lin.w = Tensor({2, 2}, {1, 2, 3, 4});
  lin.b = Tensor({2}, {1, 1});
  Tensor x({2}, {1, 1});
  Tensor y = lin.forward(x);
  CHECK(y[0] == doctest::Approx(4.0f));
  CHECK(y[1] == doctest::Approx(8.0f));
}

TEST_CASE("softmax oracle") {
  // logits ln 1, ln 2, ln 3 -> probabilities 1/6, 2/6, 3/6
  float z[3] = {std::log(1.0f), std::log(2.0f), std::log(3.0f)};
  float p[3];
  softmax(z, p, 3);
  CHECK(p[0] == doctest::Approx(1.0 / 6).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(2.0 / 6).epsilon(1e-6));
  CHECK(p[2] == doctest::Approx(3.0 / 6).epsilon(1e-6));
  CHECK(nll_from_logits(z, 3, 2) == doctest::Approx(-std::log(0.5)).epsilon(1e-6));
}

TEST_CASE("entropy closed forms") {
  float uniform[4] = {0.25f, 0.25f, 0.25f, 0.25f};
  CHECK(entropy(uniform, 4) == doctest::Approx(std::log(4.0)).epsilon(1e-6));
  float onehot[4] = {1.0f, 0.0f, 0.0f, 0.0f};
  CHECK(entropy(onehot, 4) == doctest::Approx(0.0));
}

TEST_CASE("rmsprop single step oracle") {
  // acc' = 0.99*0 + 0.01*1 = 0.01; p' = 1 - 0.1*1/sqrt(0.01 + 0.1)
  Tensor p({1}, {1.0f});
  Tensor acc({1});
  Tensor g({1}, {1.0f});
  rmsprop_apply(p, acc, g, 0.1f, 0.99f, 0.1f);
  CHECK(acc[0] == doctest::Approx(0.01f).epsilon(1e-7));
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 / std::sqrt(0.11)).epsilon(1e-6));
}

TEST_CASE("rmsprop flat-gradient fixed point magnitude") {
  // with acc converged to g^2, step size approaches lr*g/sqrt(g^2+eps)
  Tensor p({1}, {0.0f});
  Tensor acc({1}, {1.0f});
  Tensor g({1}, {1.0f});
  rmsprop_apply(p, acc, g, 0.1f, 0.99f, 0.0f);
  CHECK(p[0] == doctest::Approx(-0.1f).epsilon(1e-6));
}

TEST_CASE("kernels: serial and omp bit-identical") {
  Rng rng(3, 0);
  const size_t m = 37, n = 53;
  std::vector<float> w(m * n), x(n), b(m);
  for (auto& v : w) v = static_cast<float>(rng.normal());
  for (auto& v : x) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());

  std::vector<float> y1(m), y2(m);
  kernels::matvec_serial(w.data(), x.data(), b.data(), y1.data(), m, n);
  kernels::matvec_omp(w.data(), x.data(), b.data(), y2.data(), m, n);
  CHECK(std::memcmp(y1.data(), y2.data(), m * sizeof(float)) == 0);

  std::vector<float> dx1(n, 0.f), dx2(n, 0.f);
  kernels::matvec_t_acc_serial(w.data(), y1.data(), dx1.data(), m, n);
  kernels::matvec_t_acc_omp(w.data(), y2.data(), dx2.data(), m, n);
  CHECK(std::memcmp(dx1.data(), dx2.data(), n * sizeof(float)) == 0);

  std::vector<float> dw1(m * n, 0.f), dw2(m * n, 0.f), db1(m, 0.f), db2(m, 0.f);
  kernels::outer_acc_serial(y1.data(), x.data(), dw1.data(), db1.data(), m, n);
  kernels::outer_acc_omp(y2.data(), x.data(), dw2.data(), db2.data(), m, n);
  CHECK(std::memcmp(dw1.data(), dw2.data(), m * n * sizeof(float)) == 0);
  CHECK(std::memcmp(db1.data(), db2.data(), m * sizeof(float)) == 0);

  const size_t r = 7, t = 19, k = 11;
  std::vector<float> a(r * t), bm(k * t), c1(r * k), c2(r * k);
  for (auto& v : a) v = static_cast<float>(rng.normal());
  for (auto& v : bm) v = static_cast<float>(rng.normal());
  kernels::gemm_nt_serial(a.data(), bm.data(), c1.data(), r, t, k, 2.5f);
  kernels::gemm_nt_omp(a.data(), bm.data(), c2.data(), r, t, k, 2.5f);
  CHECK(std::memcmp(c1.data(), c2.data(), r * k * sizeof(float)) == 0);

  std::vector<float> e1(r * t, 1.f), e2(r * t, 1.f);
  kernels::gemm_nn_acc_serial(c1.data(), bm.data(), e1.data(), r, k, t, 0.5f);
  kernels::gemm_nn_acc_omp(c2.data(), bm.data(), e2.data(), r, k, t, 0.5f);
  CHECK(std::memcmp(e1.data(), e2.data(), r * t * sizeof(float)) == 0);

  const size_t ic = 3, h = 9, wd = 8, oc = 5, kk = 3, pad = 1;
  std::vector<float> in(ic * h * wd), cw(oc * ic * kk * kk), cb(oc);
  for (auto& v : in) v = static_cast<float>(rng.normal());
  for (auto& v : cw) v = static_cast<float>(rng.normal());
  for (auto& v : cb) v = static_cast<float>(rng.normal());
  std::vector<float> o1(oc * h * wd), o2(oc * h * wd);
  kernels::conv2d_forward_serial(in.data(), cw.data(), cb.data(), o1.data(), ic, h, wd, oc, kk,
                                 pad);
  kernels::conv2d_forward_omp(in.data(), cw.data(), cb.data(), o2.data(), ic, h, wd, oc, kk, pad);
  CHECK(std::memcmp(o1.data(), o2.data(), o1.size() * sizeof(float)) == 0);
}

TEST_CASE("parallel toggle round-trips") {
  bool before = kernels::parallel_enabled();
  kernels::set_parallel_enabled(false);
  CHECK_FALSE(kernels::parallel_enabled());
  kernels::set_parallel_enabled(true);
  CHECK(kernels::parallel_enabled());
  kernels::set_parallel_enabled(before);
}

TEST_CASE("finite differences: dense layers") {
  auto lin = gradcheck_detail::check_linear();
  CHECK_MESSAGE(lin.pass, lin.worst_param, " rel err ", lin.max_rel_error);
  auto nll = gradcheck_detail::check_softmax_nll();
  CHECK_MESSAGE(nll.pass, nll.worst_param, " rel err ", nll.max_rel_error);
  auto ent = gradcheck_detail::check_entropy();
  CHECK_MESSAGE(ent.pass, ent.worst_param, " rel err ", ent.max_rel_error);
  auto conv = gradcheck_detail::check_conv();
  CHECK_MESSAGE(conv.pass, conv.worst_param, " rel err ", conv.max_rel_error);
  auto lstm = gradcheck_detail::check_lstm();
  CHECK_MESSAGE(lstm.pass, lstm.worst_param, " rel err ", lstm.max_rel_error);
}

TEST_CASE("lstm state threading distinguishes identical inputs") {
  Rng rng(11, 0);
  LstmCellT<float> cell;
  cell.init(3, 4, rng);
  auto s = cell.zero_state();
  Tensor x({3}, {1.0f, -0.5f, 0.25f});
  cell.step(x.ptr(), s, nullptr);
  Tensor h1 = s.h;
  cell.step(x.ptr(), s, nullptr);
  CHECK_FALSE(h1 == s.h);
}

TEST_CASE("rng streams are deterministic and distinct") {
  Rng a(42, 7), b(42, 7), c(42, 8);
  for (int i = 0; i < 100; ++i) CHECK(a.raw() == b.raw());
  bool differs = false;
  Rng a2(42, 7);
  for (int i = 0; i < 100; ++i) differs = differs || (a2.raw() != c.raw());
  CHECK(differs);
}

TEST_CASE("rng bernoulli mean at one half") {
  Rng rng(5, 0);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.5) ? 1 : 0;
  double mean = static_cast<double>(hits) / n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("rng log_uniform stays inside its interval") {
  Rng rng(6, 0);
  for (int i = 0; i < 10000; ++i) {
    double v = rng.log_uniform(1e-7, 1e-4);
    CHECK(v >= 1e-7);
    CHECK(v <= 1e-4);
  }
}

TEST_CASE("csv escaping round-trips") {
  CsvTable t;
  t.header = {"a", "b"};
  t.rows.push_back({"plain", "with,comma"});
  t.rows.push_back({"quote\"inside", "line\nbreak"});
  CsvTable back = parse_csv(csv_to_string(t));
  CHECK(back.header == t.header);
  REQUIRE(back.rows.size() == t.rows.size());
  CHECK(back.rows[0] == t.rows[0]);
  CHECK(back.rows[1] == t.rows[1]);
  CHECK(back.column("b") == 1);
  CHECK(back.column("missing") == -1);
}
