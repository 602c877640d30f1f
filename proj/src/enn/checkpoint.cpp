#include "epinet_bandit/enn/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "epinet_bandit/errors.h"
#include "epinet_bandit/nn/rng.h"

namespace epinet_bandit::enn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'E', 'P', 'N', 'B', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& offset) {
  if (offset + sizeof(T) > bytes.size()) throw LoadError("checkpoint truncated");
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::vector<std::size_t> dims_from_json(const nlohmann::json& j) { return j.get<std::vector<std::size_t>>(); }

}  // namespace

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& checkpoint) {
  std::string payload;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& t : checkpoint.tensors) {
    entries.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
    payload.append(reinterpret_cast<const char*>(t.value.data()),
                   sizeof(double) * static_cast<std::size_t>(t.value.size()));
  }
  nlohmann::json header = {{"version", kCheckpointVersion},
                           {"tensors", entries},
                           {"payload_fnv1a", hex64(nn::fnv1a64(payload.data(), payload.size()))},
                           {"meta", checkpoint.meta}};
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  out += payload;
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw LoadError("not a checkpoint (bad magic)");
  std::size_t offset = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, offset);
  if (version != kCheckpointVersion)
    throw LoadError("checkpoint version " + std::to_string(version) + " is not supported");
  const auto header_len = take<std::uint64_t>(bytes, offset);
  if (header_len > bytes.size() - offset) throw LoadError("checkpoint header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(offset, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  offset += header_len;

  Checkpoint result;
  try {
    if (header.at("version").get<std::uint32_t>() != version) throw LoadError("checkpoint header version mismatch");
    const std::string_view payload = bytes.substr(offset);
    if (header.at("payload_fnv1a").get<std::string>() != hex64(nn::fnv1a64(payload.data(), payload.size())))
      throw LoadError("checkpoint payload checksum mismatch");
    result.meta = header.at("meta");
    std::size_t cursor = 0;
    for (const auto& entry : header.at("tensors")) {
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      if (rows < 0 || cols < 0) throw LoadError("checkpoint tensor has a negative shape");
      const std::size_t n = static_cast<std::size_t>(rows * cols);
      if (cursor + n * sizeof(double) > payload.size()) throw LoadError("checkpoint payload truncated");
      nn::Tensor2 value(rows, cols);
      std::memcpy(value.data(), payload.data() + cursor, n * sizeof(double));
      cursor += n * sizeof(double);
      result.tensors.push_back({entry.at("name").get<std::string>(), std::move(value)});
    }
    if (cursor != payload.size()) throw LoadError("checkpoint has trailing bytes");
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed checkpoint header: ") + e.what());
  }
  return result;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_checkpoint(checkpoint);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_checkpoint(buffer.str());
}

void append_stores(Checkpoint& checkpoint, std::span<const nn::ParameterStore* const> stores) {
  for (const auto* store : stores)
    for (const auto& p : *store) checkpoint.tensors.push_back({p.name, p.value});
}

void restore_stores(const Checkpoint& checkpoint, std::span<nn::ParameterStore* const> stores) {
  for (const auto* store : stores) {
    for (const auto& p : *store) {
      const auto* t = checkpoint.find(p.name);
      if (t == nullptr) throw LoadError("checkpoint is missing tensor '" + p.name + "'");
      if (t->value.rows() != p.value.rows() || t->value.cols() != p.value.cols())
        throw LoadError("checkpoint tensor '" + p.name + "' has the wrong shape");
    }
  }
  for (auto* store : stores) {
    for (auto& p : *store) {
      p.value = checkpoint.find(p.name)->value;
      p.grad.setZero();
    }
  }
}

Checkpoint epinet_checkpoint(const EpinetHead& head) {
  Checkpoint c;
  const auto& cfg = head.config();
  c.meta = {{"variant", to_string(head.variant())},
            {"prior_scale", cfg.prior_scale},
            {"index_dim", cfg.index_dim},
            {"input_dim", cfg.input_dim},
            {"base_hidden", cfg.base_hidden},
            {"epinet_hidden", cfg.epinet_hidden}};
  append_stores(c, head.all_stores());
  return c;
}

EpinetHead load_epinet(const Checkpoint& checkpoint) {
  EpinetConfig cfg;
  try {
    const auto& m = checkpoint.meta;
    if (m.at("variant").get<std::string>() != "epinet") throw LoadError("checkpoint does not hold an epinet");
    cfg.prior_scale = m.at("prior_scale").get<double>();
    cfg.index_dim = m.at("index_dim").get<std::size_t>();
    cfg.input_dim = m.at("input_dim").get<std::size_t>();
    cfg.base_hidden = dims_from_json(m.at("base_hidden"));
    cfg.epinet_hidden = dims_from_json(m.at("epinet_hidden"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("epinet checkpoint meta is incomplete: ") + e.what());
  }
  nn::Rng unused(0);
  EpinetHead head(cfg, unused);
  auto& prior_params = head.mutable_prior_net().params();
  nn::ParameterStore* stores[] = {&head.base_mlp().params(), &head.learnable_net().params(), &prior_params};
  restore_stores(checkpoint, stores);
  return head;
}

}  // namespace epinet_bandit::enn
