#include "bcr/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace bcr {

namespace {

constexpr char kMagic[8] = {'B', 'C', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_u64(std::string& out, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

void put_doubles(std::string& out, const double* p, int64_t n) {
  out.append(reinterpret_cast<const char*>(p), static_cast<size_t>(n) * 8);
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) fail(ErrKind::Checkpoint, "checkpoint: truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  void doubles(double* dst, int64_t n) {
    need(static_cast<size_t>(n) * 8);
    std::memcpy(dst, buf.data() + pos, static_cast<size_t>(n) * 8);
    pos += static_cast<size_t>(n) * 8;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrKind::Io, "checkpoint: cannot open: " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// Parses and validates everything into staging buffers; nothing is applied
// to a ParamStore until the whole file checks out.
struct Staged {
  CheckpointMeta meta;
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<double> value, m, v;
  };
  std::vector<Entry> entries;
};

Staged parse(const std::string& bytes) {
  if (bytes.size() < 12 + 4) fail(ErrKind::Checkpoint, "checkpoint: file too small");
  uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  const uint32_t actual_crc = static_cast<uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(bytes.size() - 4)));
  if (stored_crc != actual_crc)
    fail(ErrKind::Checkpoint, "checkpoint: checksum mismatch (corrupted file)");

  Reader r{bytes};
  if (r.str(8) != std::string(kMagic, 8)) fail(ErrKind::Checkpoint, "checkpoint: bad magic");
  const uint32_t version = r.u32();
  if (version != kVersion)
    fail(ErrKind::Checkpoint, "checkpoint: incompatible version " + std::to_string(version) +
                                  " (expected " + std::to_string(kVersion) + ")");
  Staged st;
  st.meta.config_text = r.str(r.u32());
  const uint32_t n_params = r.u32();
  st.entries.resize(n_params);
  for (auto& e : st.entries) {
    e.name = r.str(r.u32());
    const uint32_t rank = r.u32();
    e.shape.resize(rank);
    int64_t n = 1;
    for (auto& d : e.shape) {
      d = static_cast<int>(r.u32());
      n *= d;
    }
    e.value.resize(static_cast<size_t>(n));
    r.doubles(e.value.data(), n);
  }
  st.meta.step = static_cast<int64_t>(r.u64());
  for (auto& e : st.entries) {
    const int64_t n = static_cast<int64_t>(e.value.size());
    e.m.resize(static_cast<size_t>(n));
    e.v.resize(static_cast<size_t>(n));
    r.doubles(e.m.data(), n);
    r.doubles(e.v.data(), n);
  }
  st.meta.epoch = static_cast<int>(r.u32());
  for (auto& w : st.meta.rng_state) w = r.u64();
  return st;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const CheckpointMeta& meta) {
  std::string out(kMagic, 8);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(meta.config_text.size()));
  out += meta.config_text;
  put_u32(out, static_cast<uint32_t>(params.all().size()));
  for (const auto& p : params.all()) {
    put_u32(out, static_cast<uint32_t>(p->name.size()));
    out += p->name;
    put_u32(out, static_cast<uint32_t>(p->value.rank()));
    for (int d : p->value.shape()) put_u32(out, static_cast<uint32_t>(d));
    put_doubles(out, p->value.data(), p->value.size());
  }
  put_u64(out, static_cast<uint64_t>(meta.step));
  for (const auto& p : params.all()) {
    const int64_t n = p->value.size();
    std::vector<double> zero;
    const double* m = p->m.size() == static_cast<size_t>(n) ? p->m.data() : nullptr;
    const double* v = p->v.size() == static_cast<size_t>(n) ? p->v.data() : nullptr;
    if (!m || !v) zero.assign(static_cast<size_t>(n), 0.0);
    put_doubles(out, m ? m : zero.data(), n);
    put_doubles(out, v ? v : zero.data(), n);
  }
  put_u32(out, static_cast<uint32_t>(meta.epoch));
  for (uint64_t w : meta.rng_state) put_u64(out, w);
  const uint32_t crc = static_cast<uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size())));
  put_u32(out, crc);

  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrKind::Io, "checkpoint: cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrKind::Io, "checkpoint: write failed: " + path);
}

CheckpointMeta peek_checkpoint(const std::string& path) { return parse(read_file(path)).meta; }

CheckpointMeta load_checkpoint(const std::string& path, ParamStore& params) {
  Staged st = parse(read_file(path));
  if (st.entries.size() != params.all().size())
    fail(ErrKind::Checkpoint, "checkpoint: parameter count mismatch");
  // validate everything before mutating any state
  for (const auto& e : st.entries) {
    Parameter* p = params.find(e.name);
    if (!p) fail(ErrKind::Checkpoint, "checkpoint: unknown parameter " + e.name);
    if (p->value.shape() != e.shape)
      fail(ErrKind::Checkpoint, "checkpoint: shape mismatch for " + e.name);
  }
  for (auto& e : st.entries) {
    Parameter* p = params.find(e.name);
    std::copy(e.value.begin(), e.value.end(), p->value.data());
    p->m = std::move(e.m);
    p->v = std::move(e.v);
  }
  return st.meta;
}

}  // namespace bcr
