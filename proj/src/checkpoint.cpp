#include "latentaug/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "latentaug/error.hpp"

namespace latentaug {

namespace {

void append_f32_le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<char>(bits & 0xFF));
  out.push_back(static_cast<char>((bits >> 8) & 0xFF));
  out.push_back(static_cast<char>((bits >> 16) & 0xFF));
  out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

float read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t offset, const std::string& what) {
  throw ParseError(path.string() + ": " + what + " (byte offset " + std::to_string(offset) + ")");
}

}  // namespace

const std::string& Checkpoint::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw ParseError("checkpoint: missing metadata key '" + key + "'");
}

bool Checkpoint::has_meta(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return true;
  }
  return false;
}

void write_checkpoint(const std::filesystem::path& path, const std::string& magic,
                      const std::vector<std::pair<std::string, std::string>>& meta,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::string blob = magic + "\n";
  for (const auto& [k, v] : meta) blob += "meta " + k + " " + v + "\n";
  for (const auto& [name, t] : tensors) {
    blob += "tensor " + name + " " + std::to_string(t->rank());
    for (auto d : t->shape()) blob += " " + std::to_string(d);
    blob += "\n";
  }
  blob += "end\n";
  for (const auto& [name, t] : tensors) {
    for (std::int64_t i = 0; i < t->size(); ++i) append_f32_le(blob, static_cast<float>((*t)[i]));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path, const std::string& expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  std::size_t pos = 0;
  auto read_line = [&](std::string& line) -> bool {
    if (pos >= blob.size()) return false;
    const std::size_t nl = blob.find('\n', pos);
    if (nl == std::string::npos) parse_fail(path, pos, "unterminated header line");
    line = blob.substr(pos, nl - pos);
    pos = nl + 1;
    return true;
  };

  std::string line;
  if (!read_line(line)) parse_fail(path, 0, "empty file");
  if (line != expected_magic) {
    throw VersionError(path.string() + ": format '" + line + "' does not match expected '" +
                       expected_magic + "'");
  }
  ckpt.magic = line;

  struct PendingTensor {
    std::string name;
    Shape shape;
  };
  std::vector<PendingTensor> pending;
  bool saw_end = false;
  while (true) {
    const std::size_t line_start = pos;
    if (!read_line(line)) break;
    if (line == "end") {
      saw_end = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      if (key.empty()) parse_fail(path, line_start, "meta line without a key");
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta.emplace_back(key, value);
    } else if (kind == "tensor") {
      PendingTensor t;
      std::int64_t rank = -1;
      ls >> t.name >> rank;
      if (t.name.empty() || rank < 0) parse_fail(path, line_start, "malformed tensor declaration");
      for (std::int64_t i = 0; i < rank; ++i) {
        std::int64_t d = 0;
        if (!(ls >> d) || d <= 0) parse_fail(path, line_start, "malformed tensor shape");
        t.shape.push_back(d);
      }
      pending.push_back(std::move(t));
    } else {
      parse_fail(path, line_start, "unknown header record '" + kind + "'");
    }
  }
  if (!saw_end) parse_fail(path, pos, "missing 'end' marker");

  for (auto& p : pending) {
    const std::int64_t count = numel(p.shape);
    if (pos + static_cast<std::size_t>(count) * 4 > blob.size()) {
      parse_fail(path, pos, "payload truncated while reading tensor '" + p.name + "'");
    }
    Tensor::Array data(count);
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    for (std::int64_t i = 0; i < count; ++i) {
      data[i] = static_cast<double>(read_f32_le(bytes + pos));
      pos += 4;
    }
    ckpt.tensors.push_back(NamedTensor{std::move(p.name), Tensor(std::move(p.shape), std::move(data))});
  }
  if (pos != blob.size()) parse_fail(path, pos, "trailing bytes after payload");
  return ckpt;
}

}  // namespace latentaug
