#include "darkside/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "darkside/common.hpp"

namespace darkside {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'A', 'R'};

enum class DtypeCode : uint8_t { kF32 = 0, kF64 = 1, kI64 = 2, kU8 = 3 };

DtypeCode dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return DtypeCode::kF32;
    case torch::kFloat64: return DtypeCode::kF64;
    case torch::kInt64: return DtypeCode::kI64;
    case torch::kUInt8: return DtypeCode::kU8;
    default: throw ValidationError("checkpoint: unsupported tensor dtype");
  }
}

torch::ScalarType dtype_of(DtypeCode c) {
  switch (c) {
    case DtypeCode::kF32: return torch::kFloat32;
    case DtypeCode::kF64: return torch::kFloat64;
    case DtypeCode::kI64: return torch::kInt64;
    case DtypeCode::kU8: return torch::kUInt8;
  }
  throw ValidationError("checkpoint: unknown dtype code");
}

template <typename T>
void append_pod(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(const std::string& buf, size_t& off) {
  if (off + sizeof(T) > buf.size()) throw ValidationError("checkpoint: truncated data");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void BlobArchive::add(const std::string& name, std::string bytes) {
  entries_[name] = std::move(bytes);
}

void BlobArchive::add_json(const std::string& name, const std::string& json_text) {
  add(name, json_text);
}

void BlobArchive::add_tensor(const std::string& name, const torch::Tensor& t) {
  auto cpu = t.detach().to(torch::kCPU).contiguous();
  std::string payload;
  append_pod<uint8_t>(payload, static_cast<uint8_t>(dtype_code(cpu.scalar_type())));
  append_pod<uint8_t>(payload, static_cast<uint8_t>(cpu.dim()));
  for (int64_t i = 0; i < cpu.dim(); ++i) append_pod<int64_t>(payload, cpu.size(i));
  payload.append(reinterpret_cast<const char*>(cpu.data_ptr()),
                 cpu.numel() * cpu.element_size());
  add(name, std::move(payload));
}

const std::string& BlobArchive::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ValidationError("checkpoint: missing blob '" + name + "'");
  return it->second;
}

torch::Tensor BlobArchive::get_tensor(const std::string& name) const {
  const std::string& payload = get(name);
  size_t off = 0;
  auto dtype = dtype_of(static_cast<DtypeCode>(read_pod<uint8_t>(payload, off)));
  int ndim = read_pod<uint8_t>(payload, off);
  std::vector<int64_t> dims(ndim);
  for (int i = 0; i < ndim; ++i) dims[i] = read_pod<int64_t>(payload, off);
  auto t = torch::empty(dims, dtype);
  size_t bytes = static_cast<size_t>(t.numel()) * t.element_size();
  if (payload.size() - off != bytes)
    throw ValidationError("checkpoint: tensor payload size mismatch for '" + name + "'");
  std::memcpy(t.data_ptr(), payload.data() + off, bytes);
  return t;
}

std::vector<std::string> BlobArchive::names() const {
  std::vector<std::string> out;
  for (auto& [k, _] : entries_) out.push_back(k);
  return out;
}

std::vector<std::string> BlobArchive::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (auto& [k, _] : entries_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

void BlobArchive::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint: " + path.string());
  out.write(kMagic, 4);
  uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  uint32_t count = static_cast<uint32_t>(entries_.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, payload] : entries_) {
    uint32_t name_len = static_cast<uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(name.data(), name_len);
    uint64_t size = payload.size();
    out.write(reinterpret_cast<const char*>(&size), sizeof(size));
    out.write(payload.data(), static_cast<std::streamsize>(size));
  }
  if (!out) throw ValidationError("failed writing checkpoint: " + path.string());
}

BlobArchive BlobArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("not a checkpoint archive: " + path.string());
  uint32_t version = 0, count = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version > kVersion)
    throw ValidationError("checkpoint format version " + std::to_string(version) +
                          " is newer than supported version " + std::to_string(kVersion));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  BlobArchive ar;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint64_t size = 0;
    in.read(reinterpret_cast<char*>(&size), sizeof(size));
    std::string payload(size, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(size));
    if (!in) throw ValidationError("checkpoint truncated: " + path.string());
    ar.entries_[name] = std::move(payload);
  }
  return ar;
}

void save_module(BlobArchive& ar, const std::string& prefix, const torch::nn::Module& module) {
  for (const auto& p : module.named_parameters(/*recurse=*/true))
    ar.add_tensor(prefix + "/param/" + p.key(), p.value());
  for (const auto& b : module.named_buffers(/*recurse=*/true))
    ar.add_tensor(prefix + "/buffer/" + b.key(), b.value());
}

void load_module(const BlobArchive& ar, const std::string& prefix, torch::nn::Module& module) {
  torch::NoGradGuard guard;
  for (auto p : module.named_parameters(/*recurse=*/true)) {
    auto t = ar.get_tensor(prefix + "/param/" + p.key());
    if (!t.sizes().equals(p.value().sizes()))
      throw ValidationError("checkpoint: shape mismatch for parameter '" + p.key() + "'");
    p.value().copy_(t);
  }
  for (auto b : module.named_buffers(/*recurse=*/true)) {
    auto t = ar.get_tensor(prefix + "/buffer/" + b.key());
    if (!t.sizes().equals(b.value().sizes()))
      throw ValidationError("checkpoint: shape mismatch for buffer '" + b.key() + "'");
    b.value().copy_(t.to(b.value().scalar_type()));
  }
}

void save_optimizer(BlobArchive& ar, const std::string& name, torch::optim::Optimizer& opt) {
  std::string bytes;
  torch::serialize::OutputArchive archive;
  opt.save(archive);
  archive.save_to([&bytes](const void* data, size_t n) {
    bytes.append(static_cast<const char*>(data), n);
    return n;
  });
  ar.add(name, std::move(bytes));
}

void load_optimizer(const BlobArchive& ar, const std::string& name, torch::optim::Optimizer& opt) {
  const std::string& bytes = ar.get(name);
  torch::serialize::InputArchive archive;
  archive.load_from(bytes.data(), bytes.size());
  opt.load(archive);
}

void save_rng(BlobArchive& ar, const std::string& prefix, const RngStream& rng) {
  ar.add(prefix + "/sampler", rng.serialize());
  auto gen = at::detail::getDefaultCPUGenerator();
  ar.add_tensor(prefix + "/torch_cpu", gen.get_state());
}

RngStream load_rng(const BlobArchive& ar, const std::string& prefix) {
  auto gen = at::detail::getDefaultCPUGenerator();
  gen.set_state(ar.get_tensor(prefix + "/torch_cpu"));
  return RngStream::deserialize(ar.get(prefix + "/sampler"));
}

}  // namespace darkside
