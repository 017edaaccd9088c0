#include "straw/param_store.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace straw {

void rmsprop_apply(Tensor& param, Tensor& acc, const Tensor& grad, float lr, float decay,
                   float eps) {
  STRAW_CHECK(param.same_shape(acc) && param.same_shape(grad), "rmsprop shape mismatch");
  for (size_t i = 0; i < param.numel(); ++i) {
    float g = grad.data[i];
    float a = decay * acc.data[i] + (1.0f - decay) * g * g;
    acc.data[i] = a;
    param.data[i] -= lr * g / std::sqrt(a + eps);
  }
}

namespace {

constexpr char kMagic[4] = {'S', 'T', 'R', 'W'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;
constexpr uint8_t kDtypeF64 = 1;

void write_u32(std::ofstream& f, uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ofstream& f, uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::ifstream& f) {
  uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void write_f32_record(std::ofstream& f, const std::string& name, const Tensor& t) {
  write_u32(f, static_cast<uint32_t>(name.size()));
  f.write(name.data(), static_cast<std::streamsize>(name.size()));
  f.put(static_cast<char>(kDtypeF32));
  write_u32(f, static_cast<uint32_t>(t.rank()));
  for (size_t d : t.shape) write_u64(f, d);
  f.write(reinterpret_cast<const char*>(t.data.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

void write_f64_scalar(std::ofstream& f, const std::string& name, double v) {
  write_u32(f, static_cast<uint32_t>(name.size()));
  f.write(name.data(), static_cast<std::streamsize>(name.size()));
  f.put(static_cast<char>(kDtypeF64));
  write_u32(f, 1);
  write_u64(f, 1);
  f.write(reinterpret_cast<const char*>(&v), 8);
}

}  // namespace

void ParamStore::save(const std::string& path) const {
  // hold the apply lock so periodic checkpoints are consistent snapshots
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  STRAW_CHECK(f.good(), "cannot open checkpoint for writing: " + path);
  f.write(kMagic, 4);
  write_u32(f, kVersion);
  for (const auto& [name, slot] : slots_) {
    write_f32_record(f, name, slot.value);
    write_f32_record(f, name + ".rms", slot.rms);
  }
  write_f64_scalar(f, "meta/apply_count", static_cast<double>(apply_count_.load()));
  write_f64_scalar(f, "meta/env_steps", static_cast<double>(env_steps_.load()));
  for (const auto& [name, v] : meta) write_f64_scalar(f, "meta/" + name, v);
  f.flush();
  STRAW_CHECK(f.good(), "checkpoint write failed: " + path);
}

void ParamStore::load(const std::string& path) {
  std::lock_guard<std::mutex> lock(mu_);
  std::ifstream f(path, std::ios::binary);
  STRAW_CHECK(f.good(), "cannot open checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  STRAW_CHECK(f.good() && std::memcmp(magic, kMagic, 4) == 0,
              "not a checkpoint file (bad magic): " + path);
  uint32_t ver = read_u32(f);
  STRAW_CHECK(ver == kVersion, "unsupported checkpoint version in " + path);

  slots_.clear();
  meta.clear();
  while (true) {
    uint32_t name_len = 0;
    f.read(reinterpret_cast<char*>(&name_len), 4);
    if (f.eof()) break;
    STRAW_CHECK(f.good() && name_len > 0 && name_len < 4096, "corrupt checkpoint record name");
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    uint8_t dtype = static_cast<uint8_t>(f.get());
    uint32_t rank = read_u32(f);
    STRAW_CHECK(rank <= 8, "corrupt checkpoint record rank");
    std::vector<size_t> shape(rank);
    for (auto& d : shape) d = read_u64(f);
    size_t n = Tensor::numel_of(shape);
    if (dtype == kDtypeF32) {
      Tensor t(shape);
      f.read(reinterpret_cast<char*>(t.data.data()),
             static_cast<std::streamsize>(n * sizeof(float)));
      STRAW_CHECK(f.good(), "truncated checkpoint tensor: " + name);
      if (name.size() > 4 && name.substr(name.size() - 4) == ".rms") {
        std::string base = name.substr(0, name.size() - 4);
        auto it = slots_.find(base);
        STRAW_CHECK(it != slots_.end(), "accumulator without parameter: " + name);
        it->second.rms = t;
      } else {
        Slot s;
        s.value = t;
        s.rms = Tensor(shape);
        slots_[name] = std::move(s);
      }
    } else if (dtype == kDtypeF64) {
      STRAW_CHECK(n == 1, "unexpected f64 tensor in checkpoint: " + name);
      double v = 0;
      f.read(reinterpret_cast<char*>(&v), 8);
      STRAW_CHECK(f.good(), "truncated checkpoint scalar: " + name);
      if (name == "meta/apply_count")
        apply_count_.store(static_cast<uint64_t>(v));
      else if (name == "meta/env_steps")
        env_steps_.store(static_cast<uint64_t>(v));
      else if (name.rfind("meta/", 0) == 0)
        meta[name.substr(5)] = v;
      else
        STRAW_CHECK(false, "unknown scalar record: " + name);
    } else {
      STRAW_CHECK(false, "unknown dtype tag in checkpoint: " + name);
    }
  }
}

}  // namespace straw
