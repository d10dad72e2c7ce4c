#include "ddosnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ddosnet::checkpoint {

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw CheckpointError("checkpoint truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<T>(v);
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (std::uint64_t{1} << 32)) throw CheckpointError("checkpoint field too large");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace

const Array* Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

void save(const std::filesystem::path& path, const nlohmann::json& metadata, const ndgrad::StateList& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kFormatVersion);
  const std::string meta = metadata.dump();
  put<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint64_t>(out, state.size());
  for (const auto& t : state) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    const auto& shape = t.tensor.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put<std::uint64_t>(out, d);
    for (double v : t.tensor.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  if (!out) throw CheckpointError("write failed for checkpoint '" + path.string() + "'");
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw CheckpointError("'" + path.string() + "' is not a checkpoint");
  auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  try {
    ck.metadata = nlohmann::json::parse(get_bytes(in, get<std::uint64_t>(in)));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  }
  auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    Array a;
    a.name = get_bytes(in, get<std::uint32_t>(in));
    auto rank = get<std::uint32_t>(in);
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      a.shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in)));
      n *= a.shape.back();
    }
    if (n > (std::size_t{1} << 30)) throw CheckpointError("checkpoint array '" + a.name + "' too large");
    a.values.resize(n);
    for (auto& v : a.values) v = std::bit_cast<float>(get<std::uint32_t>(in));
    ck.arrays.push_back(std::move(a));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in checkpoint");
  return ck;
}

void restore(const ndgrad::StateList& target, const Checkpoint& ckpt) {
  for (const auto& t : target) {
    const Array* a = ckpt.find(t.name);
    if (!a) throw CheckpointError("checkpoint lacks array '" + t.name + "'");
    if (a->shape != t.tensor.shape())
      throw CheckpointError("array '" + t.name + "' has shape " + ndgrad::shape_string(a->shape) + ", expected " +
                            ndgrad::shape_string(t.tensor.shape()));
    ndgrad::Tensor handle = t.tensor;
    auto dst = handle.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(a->values[i]);
  }
}

}  // namespace ddosnet::checkpoint
