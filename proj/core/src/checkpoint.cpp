#include "partshot/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "partshot/errors.hpp"
#include "partshot/hash.hpp"

namespace partshot {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'S', 'C', 'K', 'P', 'T', '0', '1'};

nlohmann::json tensor_table(const EncoderParams& p) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& t : p.tensors) {
    table.push_back({{"name", t.name}, {"shape", t.shape}, {"trainable", t.trainable}});
  }
  return table;
}

void write_tensors(std::ofstream& out, const EncoderParams& p) {
  for (const auto& t : p.tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
}

EncoderParams read_tensors(std::ifstream& in, const EncoderSpec& spec, const nlohmann::json& table,
                           const std::filesystem::path& path) {
  EncoderParams p;
  p.spec = spec;
  for (const auto& entry : table) {
    Tensor t;
    t.name = entry.at("name").get<std::string>();
    t.shape = entry.at("shape").get<std::vector<int>>();
    t.trainable = entry.value("trainable", true);
    std::size_t n = 1;
    for (int d : t.shape) n *= static_cast<std::size_t>(d);
    t.data.resize(n);
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float)) {
      throw StoreError("truncated checkpoint " + path.string());
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  nlohmann::json header;
  header["format"] = 1;
  header["spec"] = checkpoint.online.spec.to_json();
  header["step"] = checkpoint.step;
  header["config_hash"] = checkpoint.config_hash;
  header["tensors"] = tensor_table(checkpoint.online);
  header["momentum"] = checkpoint.momentum ? nlohmann::json(checkpoint.momentum->m) : nlohmann::json(nullptr);
  header["extra"] = checkpoint.extra;
  if (checkpoint.momentum && !checkpoint.online.same_layout(checkpoint.momentum->params)) {
    throw ShapeError("momentum encoder layout differs from online encoder");
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreError("cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_tensors(out, checkpoint.online);
    if (checkpoint.momentum) write_tensors(out, checkpoint.momentum->params);
    if (!out) throw StoreError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw StoreError(path.string() + " is not a checkpoint");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 26)) throw StoreError("corrupt checkpoint header in " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(in.gcount()) != len) throw StoreError("truncated checkpoint " + path.string());

  const auto header = nlohmann::json::parse(text);
  if (header.at("format").get<int>() != 1) throw StoreError("unsupported checkpoint format");
  Checkpoint ck;
  const EncoderSpec spec = EncoderSpec::from_json(header.at("spec"));
  ck.online = read_tensors(in, spec, header.at("tensors"), path);
  if (!header.at("momentum").is_null()) {
    ck.momentum = MomentumEncoder{read_tensors(in, spec, header.at("tensors"), path), header.at("momentum").get<double>()};
  }
  ck.step = header.at("step").get<std::int64_t>();
  ck.config_hash = header.at("config_hash").get<std::string>();
  ck.extra = header.at("extra");
  if (in.peek() != std::char_traits<char>::eof()) throw StoreError("trailing bytes in checkpoint " + path.string());
  return ck;
}

std::string checkpoint_hash(const std::filesystem::path& path) { return to_hex(fnv1a_file(path)); }

}  // namespace partshot
