#pragma once

#include <optional>
#include <vector>

#include "straw/attention.hpp"
#include "straw/layers.hpp"
#include "straw/rng.hpp"

namespace straw {

enum class ReplanMode { learned, every_step, random_0_4 };
enum class FrontendKind { conv_grid, lstm_chars };

// Time shift: drop column 0, append a zero column on the right.
template <class T>
TensorT<T> rho(const TensorT<T>& m) {
  STRAW_CHECK(m.rank() == 2, "rho expects a matrix");
  TensorT<T> out(m.shape);
  size_t rows = m.dim(0), cols = m.dim(1);
  for (size_t i = 0; i < rows; ++i) {
    for (size_t c = 0; c + 1 < cols; ++c) out(i, c) = m(i, c + 1);
    out(i, cols - 1) = T(0);
  }
  return out;
}

template <class T>
TensorT<T> rho_backward(const TensorT<T>& dout) {
  TensorT<T> din(dout.shape);
  size_t rows = dout.dim(0), cols = dout.dim(1);
  for (size_t i = 0; i < rows; ++i)
    for (size_t c = 0; c + 1 < cols; ++c) din(i, c + 1) = dout(i, c);
  return din;
}

// Maximal action runs starting at each g=1 step. The first step of an episode
// must be a replanning step.
inline std::vector<std::vector<int>> extract_macro_actions(const std::vector<int>& gates,
                                                           const std::vector<int>& actions) {
  STRAW_CHECK(gates.size() == actions.size(), "macro extraction: length mismatch");
  if (gates.empty()) return {};
  STRAW_CHECK(gates[0] == 1, "macro extraction: first step must replan");
  std::vector<std::vector<int>> out;
  for (size_t t = 0; t < gates.size(); ++t) {
    if (gates[t] == 1) out.emplace_back();
    out.back().push_back(actions[t]);
  }
  return out;
}

struct StrawNetConfig {
  int actions = 4;
  int horizon = 500;  // plan columns
  int filters = 10;   // attention filters over the action plan
  int xi_dim = 64;
  int h_hidden = 64;
  bool noisy_channel = false;
  int channel_dim = 128;
  float sigma_floor = 1e-6f;
  float commit_e = 40.0f;
  FrontendKind front = FrontendKind::conv_grid;
  // conv frontend
  int obs_channels = 4, obs_h = 11, obs_w = 11;
  int conv_channels = 16;
  int feature_dim = 128;
  Padding conv_padding = Padding::same;
  // char frontend
  int vocab = 50;
  int lstm_hidden = 128;

  int rows() const { return actions + 1; }
  int zeta_dim() const { return front == FrontendKind::conv_grid ? feature_dim : lstm_hidden; }
  int z_dim() const { return noisy_channel ? channel_dim : zeta_dim(); }

  void validate() const {
    STRAW_CHECK(actions >= 2, "need at least two actions");
    STRAW_CHECK(horizon >= 2, "plan horizon must be >= 2");
    STRAW_CHECK(filters >= 1, "need at least one attention filter");
    STRAW_CHECK(!(noisy_channel && front == FrontendKind::lstm_chars),
                "noisy channel is not available with the character frontend");
  }
};

// Commitment entries are probabilities that gate replanning, so they must
// stay strictly inside (0,1): a saturated sigmoid rounds to exactly 1 (or 0)
// in finite precision, which would freeze the gate forever.
template <class T>
T commit_squash(T x) {
  constexpr T kEps = T(1e-6);
  T s = sigmoid(x);
  return std::min(std::max(s, kEps), T(1) - kEps);
}

// Recurrent planner holding an action plan (rows: actions + one value row,
// columns: future steps) and a commitment plan. When the gate fires the net
// reads an attention patch from the plan, computes an update, writes it back
// and rewrites the commitment plan; otherwise both plans only time-shift and
// none of the feature networks run.
template <class T>
struct StrawNetT {
  StrawNetConfig cfg;

  GridFeaturesT<T> front_grid;
  LstmCellT<T> front_lstm;
  LinearT<T> chan_mu, chan_sig;
  LinearT<T> fpsi;   // z -> 4 raw attention parameters
  Mlp2T<T> hnet;     // [patch, z] -> xi
  LinearT<T> fA;     // xi -> rows*filters patch
  LinearT<T> fcom;   // [psiA_raw, xi] -> 2 raw commit attention parameters
  TensorT<T> b, db;  // commitment bias (scalar)

  // episode state
  TensorT<T> plan, commit;
  typename LstmCellT<T>::State lstm_state;
  int episode_step = 0;
  int commit_countdown = 0;

  // counters
  uint64_t extractor_calls = 0;
  uint64_t plan_updates = 0;

  struct StepTrace {
    int gate = 0;
    bool from_commit = false;  // replan probability was read from the commitment plan
    T replan_prob = T(1);
    TensorT<T> plan_cur, commit_cur;
    // g=1 intermediates
    typename GridFeaturesT<T>::Trace conv;
    TensorT<T> zeta;
    TensorT<T> mu, eps;  // noisy channel
    T sigma = T(0), sig_pre = T(0);
    TensorT<T> z;
    TensorT<T> psiA_raw;
    AttnBank<T> bank;
    TensorT<T> beta;
    typename Mlp2T<T>::Trace htr;
    TensorT<T> hx, xi;
    TensorT<T> patch, written;
    TensorT<T> psiC_raw;
    AttnBank<T> bank_c;
    // char frontend (recorded every step)
    typename LstmCellT<T>::Trace lstm;
    TensorT<T> obs;
  };

  // window bookkeeping
  TensorT<T> win_plan0, win_commit0;
  typename LstmCellT<T>::State win_lstm0;
  std::vector<StepTrace> trace;

  void init(const StrawNetConfig& c, Rng& rng) {
    cfg = c;
    cfg.validate();
    if (cfg.front == FrontendKind::conv_grid)
      front_grid.init(cfg.obs_channels, cfg.obs_h, cfg.obs_w, cfg.conv_channels, cfg.feature_dim,
                      cfg.conv_padding, rng);
    else
      front_lstm.init(cfg.vocab, cfg.lstm_hidden, rng);
    if (cfg.noisy_channel) {
      chan_mu.init(cfg.zeta_dim(), cfg.channel_dim, rng);
      chan_sig.init(cfg.zeta_dim(), 1, rng);
      // start near-deterministic: exploration noise at full width drowns the
      // observation signal before the policy can latch onto it
      chan_sig.b[0] = T(-3);
    }
    size_t rk = static_cast<size_t>(cfg.rows()) * cfg.filters;
    fpsi.init(cfg.z_dim(), 4, rng, 0.1);
    hnet.init(rk + cfg.z_dim(), cfg.h_hidden, cfg.xi_dim, rng);
    fA.init(cfg.xi_dim, rk, rng);
    fcom.init(4 + cfg.xi_dim, 2, rng, 0.1);
    b = TensorT<T>({1});
    db = TensorT<T>({1});
    reset_episode();
  }

  void reset_episode() {
    plan = TensorT<T>({static_cast<size_t>(cfg.rows()), static_cast<size_t>(cfg.horizon)});
    commit = TensorT<T>({1, static_cast<size_t>(cfg.horizon)});
    if (cfg.front == FrontendKind::lstm_chars) lstm_state = front_lstm.zero_state();
    episode_step = 0;
    commit_countdown = 0;
  }

  void begin_window() {
    win_plan0 = plan;
    win_commit0 = commit;
    if (cfg.front == FrontendKind::lstm_chars) win_lstm0 = lstm_state;
    trace.clear();
  }

  struct StepOut {
    int gate = 0;
    T replan_prob = T(1);
    T kl = T(0);
    T value = T(0);
    TensorT<T> dist;  // softmax over action logits (plan column 0)
  };

  struct StepOverride {
    int forced_gate = -1;            // <0: sample according to mode
    const TensorT<T>* eps = nullptr;  // fixed channel noise
  };

  StepOut step(const TensorT<T>& obs, Rng& rng, ReplanMode mode, bool record,
               const StepOverride& ov = {}) {
    StepTrace tr;
    int gate = 1;
    T replan_prob = T(1);
    bool from_commit = false;
    if (episode_step == 0) {
      gate = 1;
      replan_prob = T(1);
    } else {
      switch (mode) {
        case ReplanMode::learned:
          replan_prob = commit(0, 0);
          from_commit = true;
          gate = ov.forced_gate >= 0 ? ov.forced_gate
                                     : (rng.bernoulli(static_cast<double>(replan_prob)) ? 1 : 0);
          break;
        case ReplanMode::every_step:
          gate = 1;
          replan_prob = T(1);
          break;
        case ReplanMode::random_0_4:
          if (commit_countdown > 0) {
            gate = 0;
            --commit_countdown;
          } else {
            gate = 1;
          }
          replan_prob = static_cast<T>(gate);
          break;
      }
      if (ov.forced_gate >= 0) gate = ov.forced_gate;
    }
    if (mode == ReplanMode::random_0_4 && gate == 1)
      commit_countdown = static_cast<int>(rng.uniform_int(5));

    tr.gate = gate;
    tr.from_commit = from_commit;
    tr.replan_prob = replan_prob;

    TensorT<T> zeta;
    if (cfg.front == FrontendKind::lstm_chars) {
      // the recurrent frontend tracks the stream every step; plans advance by gate
      front_lstm.step(obs.ptr(), lstm_state, record ? &tr.lstm : nullptr);
      zeta = lstm_state.h;
      extractor_calls++;
      if (record) tr.obs = obs;
    }

    StepOut out;
    out.gate = gate;
    out.replan_prob = replan_prob;

    if (gate == 1) {
      if (cfg.front == FrontendKind::conv_grid) {
        zeta = front_grid.forward(obs, record ? &tr.conv : nullptr);
        extractor_calls++;
      }
      TensorT<T> z;
      if (cfg.noisy_channel) {
        TensorT<T> mu = chan_mu.forward(zeta);
        TensorT<T> sp = chan_sig.forward(zeta);
        T sigma = softplus(sp[0]) + static_cast<T>(cfg.sigma_floor);
        TensorT<T> eps({static_cast<size_t>(cfg.channel_dim)});
        if (ov.eps) {
          STRAW_CHECK(ov.eps->numel() == eps.numel(), "forced eps size mismatch");
          eps = *ov.eps;
        } else {
          for (auto& e : eps.data) e = static_cast<T>(rng.normal());
        }
        z = TensorT<T>({static_cast<size_t>(cfg.channel_dim)});
        for (size_t i = 0; i < z.numel(); ++i) z[i] = mu[i] + sigma * eps[i];
        out.kl = gaussian_kl(mu, sigma);
        tr.mu = mu;
        tr.sigma = sigma;
        tr.sig_pre = sp[0];
        tr.eps = eps;
      } else {
        z = zeta;
      }

      TensorT<T> psiA_raw = fpsi.forward(z);
      AttnParams<T> pa =
          attn_parametrize(psiA_raw.ptr(), static_cast<size_t>(cfg.horizon),
                           static_cast<size_t>(cfg.filters));
      AttnBank<T> bank =
          attn_filterbank(pa, static_cast<size_t>(cfg.filters), static_cast<size_t>(cfg.horizon));
      TensorT<T> beta = attn_read(plan, bank);  // reads the pre-shift plan

      TensorT<T> hx({beta.numel() + z.numel()});
      std::copy(beta.data.begin(), beta.data.end(), hx.data.begin());
      std::copy(z.data.begin(), z.data.end(), hx.data.begin() + beta.numel());
      TensorT<T> xi = hnet.forward(hx, record ? &tr.htr : nullptr);

      TensorT<T> patch_flat = fA.forward(xi);
      TensorT<T> patch = patch_flat;
      patch.shape = {static_cast<size_t>(cfg.rows()), static_cast<size_t>(cfg.filters)};
      TensorT<T> written = attn_write(patch, bank);

      TensorT<T> shifted = rho(plan);
      shifted.add(written);  // gate value 1 scales the write
      plan = shifted;
      plan_updates++;

      // commitment plan rewrite; inputs are treated as constants here so no
      // gradient flows back into the planning pathway
      TensorT<T> cin({4 + static_cast<size_t>(cfg.xi_dim)});
      std::copy(psiA_raw.data.begin(), psiA_raw.data.end(), cin.data.begin());
      std::copy(xi.data.begin(), xi.data.end(), cin.data.begin() + 4);
      TensorT<T> psiC_raw = fcom.forward(cin);
      AttnParams<T> pc;
      T span = static_cast<T>(cfg.horizon - 1);
      pc.center = span * (std::tanh(psiC_raw[0]) + T(1)) / T(2);
      pc.stride = T(1);
      pc.variance = attn_exp(psiC_raw[1]) + static_cast<T>(kAttnVarFloor);
      pc.intensity = T(1);
      AttnBank<T> bank_c = attn_filterbank(pc, 1, static_cast<size_t>(cfg.horizon));
      for (int tau = 0; tau < cfg.horizon; ++tau)
        commit(0, tau) =
            commit_squash(b[0] + static_cast<T>(cfg.commit_e) * bank_c.F(0, tau));

      if (record) {
        tr.zeta = zeta;
        tr.z = z;
        tr.psiA_raw = psiA_raw;
        tr.bank = bank;
        tr.beta = beta;
        tr.hx = hx;
        tr.xi = xi;
        tr.patch = patch;
        tr.written = written;
        tr.psiC_raw = psiC_raw;
        tr.bank_c = bank_c;
        if (cfg.front == FrontendKind::conv_grid) tr.obs = obs;
      }
    } else {
      plan = rho(plan);
      TensorT<T> cnew({1, static_cast<size_t>(cfg.horizon)});
      for (int tau = 0; tau + 1 < cfg.horizon; ++tau) cnew(0, tau) = commit(0, tau + 1);
      cnew(0, cfg.horizon - 1) = commit_squash(b[0]);
      commit = cnew;
    }

    out.value = plan(cfg.actions, 0);
    out.dist = TensorT<T>({static_cast<size_t>(cfg.actions)});
    {
      TensorT<T> logits({static_cast<size_t>(cfg.actions)});
      for (int a = 0; a < cfg.actions; ++a) logits[a] = plan(a, 0);
      softmax(logits.ptr(), out.dist.ptr(), logits.numel());
    }

    if (record) {
      tr.plan_cur = plan;
      tr.commit_cur = commit;
      trace.push_back(std::move(tr));
    }
    episode_step++;
    return out;
  }

  T gaussian_kl(const TensorT<T>& mu, T sigma) const {
    double n = static_cast<double>(mu.numel());
    double s2 = static_cast<double>(sigma) * sigma;
    double acc = 0.0;
    for (size_t i = 0; i < mu.numel(); ++i) acc += static_cast<double>(mu[i]) * mu[i];
    return static_cast<T>(0.5 * (acc + n * s2 - n * std::log(s2) - n));
  }

  // Value estimate the plan already holds for the next step; used to
  // bootstrap truncated windows.
  T next_value() const { return plan(cfg.actions, 1); }

  struct StepGrad {
    std::vector<T> dlogits;   // size actions (empty means zero)
    T dvalue = T(0);
    T dkl = T(0);
    T dreplan_prob = T(0);  // gradient on the probability that gated this step
  };

  // Reverse pass over the recorded window. Gradients flowing into the state
  // carried in from before the window are dropped (truncation boundary).
  void backward_window(const std::vector<StepGrad>& sig, const TensorT<T>* dplan_final = nullptr,
                       const TensorT<T>* dcommit_final = nullptr) {
    STRAW_CHECK(sig.size() == trace.size(), "backward: signal count mismatch");
    size_t n = trace.size();
    size_t R = cfg.rows(), H = cfg.horizon;
    TensorT<T> dplan({R, H}), dcommit({1, H});
    if (dplan_final) dplan = *dplan_final;
    if (dcommit_final) dcommit = *dcommit_final;
    TensorT<T> dh({static_cast<size_t>(cfg.lstm_hidden)});
    TensorT<T> dc({static_cast<size_t>(cfg.lstm_hidden)});

    for (size_t t = n; t-- > 0;) {
      StepTrace& tr = trace[t];
      const TensorT<T>& plan_prev = t > 0 ? trace[t - 1].plan_cur : win_plan0;

      if (!sig[t].dlogits.empty()) {
        STRAW_CHECK(sig[t].dlogits.size() == static_cast<size_t>(cfg.actions),
                    "backward: dlogits size mismatch");
        for (int a = 0; a < cfg.actions; ++a) dplan(a, 0) += sig[t].dlogits[a];
      }
      dplan(cfg.actions, 0) += sig[t].dvalue;

      T dgate = T(0);
      if (tr.gate == 1) {
        // commitment rewrite: c = sigmoid(b + e * F_c)
        TensorT<T> ds({1, H});
        for (size_t tau = 0; tau < H; ++tau) {
          T c = tr.commit_cur(0, tau);
          ds(0, tau) = dcommit(0, tau) * c * (T(1) - c);
        }
        T dsum = T(0);
        for (size_t tau = 0; tau < H; ++tau) dsum += ds(0, tau);
        db[0] += dsum;
        TensorT<T> dFc({1, H});
        for (size_t tau = 0; tau < H; ++tau)
          dFc(0, tau) = static_cast<T>(cfg.commit_e) * ds(0, tau);
        AttnParams<T> dpc;
        attn_filterbank_backward(tr.bank_c, dFc, dpc);
        TensorT<T> dpsiC({2});
        {
          T span = static_cast<T>(cfg.horizon - 1);
          T th = std::tanh(tr.psiC_raw[0]);
          dpsiC[0] = dpc.center * span * (T(1) - th * th) / T(2);
          dpsiC[1] = dpc.variance * attn_exp_grad(tr.psiC_raw[1],
                                                  tr.bank_c.p.variance -
                                                      static_cast<T>(kAttnVarFloor));
        }
        // fcom trains on its own error; the pathway into psiA/xi is blocked
        TensorT<T> cin({4 + static_cast<size_t>(cfg.xi_dim)});
        std::copy(tr.psiA_raw.data.begin(), tr.psiA_raw.data.end(), cin.data.begin());
        std::copy(tr.xi.data.begin(), tr.xi.data.end(), cin.data.begin() + 4);
        fcom.backward(cin.ptr(), dpsiC.ptr(), nullptr);

        // action plan write: A^t = rho(A^{t-1}) + g * written
        dgate = dot_all(dplan, tr.written);
        AttnParams<T> dpa;
        T dintensity = T(0);
        TensorT<T> dF({static_cast<size_t>(cfg.filters), H});
        TensorT<T> dpatch({R, static_cast<size_t>(cfg.filters)});
        attn_write_backward(tr.patch, tr.bank, tr.written, dplan, dpatch, dF, dintensity);

        TensorT<T> dpatch_flat = dpatch;
        dpatch_flat.shape = {dpatch.numel()};
        TensorT<T> dxi({static_cast<size_t>(cfg.xi_dim)});
        fA.backward(tr.xi.ptr(), dpatch_flat.ptr(), dxi.ptr());

        TensorT<T> dhx({tr.hx.numel()});
        hnet.backward(tr.htr, dxi, &dhx);
        size_t rk = R * static_cast<size_t>(cfg.filters);
        TensorT<T> dbeta({R, static_cast<size_t>(cfg.filters)});
        std::copy(dhx.data.begin(), dhx.data.begin() + rk, dbeta.data.begin());
        TensorT<T> dz({static_cast<size_t>(cfg.z_dim())});
        std::copy(dhx.data.begin() + rk, dhx.data.end(), dz.data.begin());

        TensorT<T> dplan_read({R, H});
        attn_read_backward(plan_prev, tr.bank, tr.beta, dbeta, dplan_read, dF, dintensity);

        attn_filterbank_backward(tr.bank, dF, dpa);
        dpa.intensity = dintensity;
        TensorT<T> dpsiA({4});
        attn_parametrize_backward(tr.psiA_raw.ptr(), tr.bank.p, dpa, H,
                                  static_cast<size_t>(cfg.filters), dpsiA.ptr());
        fpsi.backward(tr.z.ptr(), dpsiA.ptr(), dz.ptr());

        TensorT<T> dzeta({static_cast<size_t>(cfg.zeta_dim())});
        if (cfg.noisy_channel) {
          T dsigma = T(0);
          for (size_t i = 0; i < dz.numel(); ++i) dsigma += dz[i] * tr.eps[i];
          TensorT<T> dmu = dz;
          if (sig[t].dkl != T(0)) {
            T nd = static_cast<T>(cfg.channel_dim);
            for (size_t i = 0; i < dmu.numel(); ++i) dmu[i] += sig[t].dkl * tr.mu[i];
            dsigma += sig[t].dkl * nd * (tr.sigma - T(1) / tr.sigma);
          }
          T dsig_pre = dsigma * sigmoid(tr.sig_pre);
          chan_mu.backward(tr.zeta.ptr(), dmu.ptr(), dzeta.ptr());
          chan_sig.backward(tr.zeta.ptr(), &dsig_pre, dzeta.ptr());
        } else {
          dzeta = dz;
        }

        if (cfg.front == FrontendKind::conv_grid) {
          front_grid.backward(tr.conv, dzeta);
        } else {
          dh.add(dzeta);
        }

        TensorT<T> dplan_prev = rho_backward(dplan);
        dplan_prev.add(dplan_read);
        dplan = dplan_prev;
        dcommit.zero();  // the commitment plan was fully rewritten
      } else {
        dplan = rho_backward(dplan);
        T sb = commit_squash(b[0]);
        db[0] += dcommit(0, H - 1) * sb * (T(1) - sb);
        TensorT<T> dcommit_prev({1, H});
        for (size_t tau = 0; tau + 1 < H; ++tau) dcommit_prev(0, tau + 1) = dcommit(0, tau);
        dcommit = dcommit_prev;
      }

      if (tr.from_commit) {
        if (tr.gate == 1) dcommit(0, 0) += dgate;  // straight-through estimate
        dcommit(0, 0) += sig[t].dreplan_prob;
      }

      if (cfg.front == FrontendKind::lstm_chars) front_lstm.backward(tr.lstm, dh, dc, nullptr);
    }
  }

  void zero_grad() {
    if (cfg.front == FrontendKind::conv_grid)
      front_grid.zero_grad();
    else
      front_lstm.zero_grad();
    if (cfg.noisy_channel) {
      chan_mu.zero_grad();
      chan_sig.zero_grad();
    }
    fpsi.zero_grad();
    hnet.zero_grad();
    fA.zero_grad();
    fcom.zero_grad();
    db.zero();
  }

  void for_each_param(const ParamVisitor<T>& fn) {
    if (cfg.front == FrontendKind::conv_grid)
      front_grid.visit("front", fn);
    else
      front_lstm.visit("front.lstm", fn);
    if (cfg.noisy_channel) {
      chan_mu.visit("chan.mu", fn);
      chan_sig.visit("chan.sig", fn);
    }
    fpsi.visit("plan.fpsi", fn);
    hnet.visit("plan.h", fn);
    fA.visit("plan.fA", fn);
    fcom.visit("plan.fcom", fn);
    fn("plan.b", b, db);
  }
};

using StrawNet = StrawNetT<float>;

}  // namespace straw
