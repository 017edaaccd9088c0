#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>

#include "straw/layers.hpp"
#include "straw/tensor.hpp"

namespace straw {

// Shared parameter server for asynchronous workers. Parameters and their
// RMSProp accumulators live here; workers copy values out without locking
// (reads may interleave with an apply and see a mix of old and new entries,
// which the training scheme tolerates) and serialize gradient application
// through one mutex.
class ParamStore {
 public:
  struct Slot {
    Tensor value;
    Tensor rms;
  };

  void init_param(const std::string& name, const Tensor& value) {
    auto [it, fresh] = slots_.try_emplace(name);
    STRAW_CHECK(fresh, "duplicate parameter name: " + name);
    it->second.value = value;
    it->second.rms = Tensor(value.shape);
  }

  bool has(const std::string& name) const { return slots_.count(name) > 0; }

  const Tensor& value(const std::string& name) const {
    auto it = slots_.find(name);
    STRAW_CHECK(it != slots_.end(), "unknown parameter: " + name);
    return it->second.value;
  }

  Tensor& mutable_value(const std::string& name) {
    auto it = slots_.find(name);
    STRAW_CHECK(it != slots_.end(), "unknown parameter: " + name);
    return it->second.value;
  }

  const std::map<std::string, Slot>& slots() const { return slots_; }

  // Lock-free copy of the master values into a worker-local net.
  void read_into(const std::string& name, Tensor& dst) const {
    auto it = slots_.find(name);
    STRAW_CHECK(it != slots_.end(), "unknown parameter: " + name);
    STRAW_CHECK(it->second.value.same_shape(dst), "parameter shape mismatch: " + name);
    std::copy(it->second.value.data.begin(), it->second.value.data.end(), dst.data.begin());
  }

  // RMSProp update: acc <- decay*acc + (1-decay)*g^2; p <- p - lr*g/sqrt(acc+eps).
  // One call covers one gradient bundle and counts as one application.
  void apply(const std::map<std::string, const Tensor*>& grads, float lr, float decay,
             float eps) {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& [name, g] : grads) {
      auto it = slots_.find(name);
      STRAW_CHECK(it != slots_.end(), "unknown parameter: " + name);
      Slot& s = it->second;
      STRAW_CHECK(g->same_shape(s.value), "gradient shape mismatch: " + name);
      for (size_t i = 0; i < g->numel(); ++i) {
        float gv = g->data[i];
        STRAW_CHECK(is_finite(gv), "non-finite gradient in " + name);
        float acc = decay * s.rms.data[i] + (1.0f - decay) * gv * gv;
        s.rms.data[i] = acc;
        s.value.data[i] -= lr * gv / std::sqrt(acc + eps);
      }
    }
    apply_count_.fetch_add(1, std::memory_order_relaxed);
  }

  uint64_t apply_count() const { return apply_count_.load(std::memory_order_relaxed); }
  void set_apply_count(uint64_t v) { apply_count_.store(v); }

  uint64_t env_steps() const { return env_steps_.load(std::memory_order_relaxed); }
  uint64_t add_env_step() { return env_steps_.fetch_add(1, std::memory_order_relaxed) + 1; }
  void set_env_steps(uint64_t v) { env_steps_.store(v); }

  // Extra named scalars persisted with the checkpoint (net geometry etc.).
  std::map<std::string, double> meta;

  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  std::map<std::string, Slot> slots_;
  std::atomic<uint64_t> apply_count_{0};
  std::atomic<uint64_t> env_steps_{0};
  mutable std::mutex mu_;
};

// Convenience: single-tensor RMSProp update used by unit tests.
void rmsprop_apply(Tensor& param, Tensor& acc, const Tensor& grad, float lr, float decay,
                   float eps);

}  // namespace straw
