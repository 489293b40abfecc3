#include "terla/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "terla/error.hpp"

namespace terla::harness {

namespace {

constexpr char kMagic[8] = {'T', 'E', 'R', 'L', 'A', 'C', 'K', 'P'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("corrupt checkpoint: truncated while reading ") + what);
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, ckpt.version);
  const std::string meta = ckpt.metadata.dump();
  put_u64(out, meta.size());
  out.insert(out.end(), meta.begin(), meta.end());
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (numeric::shape_size(t.shape) != t.data.size()) {
      throw CheckpointError("tensor '" + t.name + "' payload does not match its shape");
    }
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_u64(out, d);
    for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(sizeof(kMagic), "header");
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a TERLA checkpoint (bad magic)");
  }
  Checkpoint ckpt;
  ckpt.version = in.u32("version");
  if (ckpt.version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(ckpt.version) +
                          " is not supported (this build reads version " + std::to_string(kCheckpointVersion) +
                          ")");
  }
  const auto meta_len = in.u64("metadata length");
  auto meta = in.take(meta_len, "metadata");
  try {
    ckpt.metadata = nlohmann::json::parse(meta.begin(), meta.end());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what());
  }
  const auto count = in.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = in.u32("tensor name");
    auto name = in.take(name_len, "tensor name");
    t.name.assign(name.begin(), name.end());
    const auto rank = in.u32("tensor rank");
    if (rank > 8) throw CheckpointError("corrupt checkpoint: tensor '" + t.name + "' has rank " + std::to_string(rank));
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(static_cast<std::size_t>(in.u64("tensor shape")));
      n *= t.shape.back();
    }
    if (n > bytes.size()) throw CheckpointError("corrupt checkpoint: tensor '" + t.name + "' is larger than the file");
    t.data.resize(n);
    for (auto& f : t.data) f = std::bit_cast<float>(in.u32("tensor payload"));
    ckpt.tensors.push_back(std::move(t));
  }
  if (!in.at_end()) throw CheckpointError("corrupt checkpoint: trailing bytes after the last tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::string shape_manifest(const Checkpoint& ckpt) {
  std::ostringstream os;
  for (const auto& t : ckpt.tensors) os << t.name << ' ' << numeric::shape_str(t.shape) << '\n';
  return os.str();
}

std::vector<NamedTensor> capture_parameters(const numeric::ParameterStore<float>& store) {
  std::vector<NamedTensor> out;
  for (const auto* p : store.list()) {
    const auto d = p->value().data();
    out.push_back({p->name(), p->value().shape(), std::vector<float>(d.begin(), d.end())});
  }
  return out;
}

void restore_parameters(numeric::ParameterStore<float>& store, const std::vector<NamedTensor>& tensors) {
  auto params = store.list();
  if (params.size() != tensors.size()) {
    throw SchemaError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, network expects " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    auto* p = params[i];
    if (t.name != p->name() || t.shape != p->value().shape()) {
      throw SchemaError("checkpoint tensor '" + t.name + "' " + numeric::shape_str(t.shape) +
                        " does not match network parameter '" + p->name() + "' " +
                        numeric::shape_str(p->value().shape()));
    }
    p->assign(numeric::Tensor(t.shape, t.data));
  }
}

}  // namespace terla::harness
