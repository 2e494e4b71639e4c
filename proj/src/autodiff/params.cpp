// SPDX-License-Identifier: Apache-2.0
#include "vprompt/autodiff/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "vprompt/core/errors.hpp"

namespace vprompt::ad {

Tensor ParameterStore::create(std::string name, Shape shape, std::vector<double> values) {
  if (find(name) != nullptr) throw ValidationError("parameter '" + name + "' registered twice");
  Tensor t(std::move(shape), std::move(values), false);
  params_.push_back(Parameter{static_cast<ParamId>(params_.size()), std::move(name), t});
  return t;
}

const Parameter& ParameterStore::at(ParamId id) const {
  if (id >= params_.size()) throw ValidationError("unknown parameter id " + std::to_string(id));
  return params_[id];
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::set<ParamId> ParameterStore::ids() const {
  std::set<ParamId> out;
  for (const auto& p : params_) out.insert(p.id);
  return out;
}

std::set<ParamId> ParameterStore::select(const std::function<bool(const std::string&)>& pred) const {
  std::set<ParamId> out;
  for (const auto& p : params_) {
    if (pred(p.name)) out.insert(p.id);
  }
  return out;
}

void ParameterStore::set_trainable(const std::set<ParamId>& ids) {
  for (auto& p : params_) {
    p.value.set_requires_grad(ids.count(p.id) != 0);
    p.value.clear_grad();
  }
}

std::set<ParamId> ParameterStore::trainable() const {
  std::set<ParamId> out;
  for (const auto& p : params_) {
    if (p.value.requires_grad()) out.insert(p.id);
  }
  return out;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p.value.zero_grad();
}

void ParameterStore::clear_grads() {
  for (auto& p : params_) p.value.clear_grad();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

namespace {

constexpr char kMagic[8] = {'V', 'P', 'C', 'K', 'P', 'T', '\0', '\0'};

template <typename T>
void put_le(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = std::bit_cast<U>(value);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <typename T>
T get_le(std::istream& is, const std::filesystem::path& path) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw IoError("checkpoint " + path.string() + ": truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(store.size()));
  for (const auto& p : store.all()) {
    put_le<std::uint32_t>(os, p.id);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put_le<std::uint64_t>(os, d);
    for (double v : p.value.data()) put_le<double>(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint " + path.string() + ": bad magic");
  }
  const auto version = get_le<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint " + path.string() + ": unsupported format version " + std::to_string(version));
  }
  const auto count = get_le<std::uint32_t>(is, path);
  std::vector<CheckpointEntry> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    e.id = get_le<std::uint32_t>(is, path);
    const auto len = get_le<std::uint32_t>(is, path);
    if (len > (1u << 16)) throw IoError("checkpoint " + path.string() + ": implausible name length");
    e.name.resize(len);
    if (!is.read(e.name.data(), len)) throw IoError("checkpoint " + path.string() + ": truncated");
    const auto rank = get_le<std::uint32_t>(is, path);
    if (rank > 8) throw IoError("checkpoint " + path.string() + ": implausible rank");
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(get_le<std::uint64_t>(is, path));
    const auto n = numel(e.shape);
    if (n > (1u << 28)) throw IoError("checkpoint " + path.string() + ": implausible tensor size");
    e.data.resize(n);
    for (auto& v : e.data) v = get_le<double>(is, path);
    out.push_back(std::move(e));
  }
  return out;
}

void load_checkpoint(ParameterStore& store, const std::filesystem::path& path) {
  const auto entries = read_checkpoint(path);
  if (entries.size() != store.size()) {
    throw ValidationError("checkpoint " + path.string() + " holds " + std::to_string(entries.size()) +
                          " parameters, model has " + std::to_string(store.size()));
  }
  for (const auto& e : entries) {
    const Parameter& p = store.at(e.id);
    if (p.name != e.name || p.value.shape() != e.shape) {
      throw ValidationError("checkpoint " + path.string() + ": parameter " + std::to_string(e.id) + " is '" + e.name +
                            "' " + shape_str(e.shape) + ", model expects '" + p.name + "' " +
                            shape_str(p.value.shape()));
    }
  }
  for (const auto& e : entries) {
    Tensor t = store.at(e.id).value;
    std::copy(e.data.begin(), e.data.end(), t.mutable_data().begin());
  }
}

std::vector<std::string> checkpoint_diff(const std::vector<CheckpointEntry>& before,
                                         const std::vector<CheckpointEntry>& after) {
  std::map<ParamId, const CheckpointEntry*> index;
  for (const auto& e : before) index[e.id] = &e;
  std::vector<std::string> changed;
  for (const auto& e : after) {
    auto it = index.find(e.id);
    if (it == index.end() || it->second->shape != e.shape ||
        std::memcmp(it->second->data.data(), e.data.data(), e.data.size() * sizeof(double)) != 0) {
      changed.push_back(e.name);
    }
  }
  return changed;
}

bool glob_match(std::string_view pattern, std::string_view text) {
  std::size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

}  // namespace vprompt::ad
