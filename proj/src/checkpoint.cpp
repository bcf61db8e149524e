#include "grin/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "grin/errors.hpp"

namespace grin {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'I', 'N'};
constexpr std::size_t kMaxNameLen = 4096;
constexpr std::uint64_t kMaxElements = 1ull << 28;

const char* const kAdamScalarNames[5] = {"adam/beta1", "adam/beta2", "adam/eps", "adam/lr",
                                         "adam/t"};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_entry(std::string& out, const std::string& name, const std::vector<std::uint64_t>& dims,
               const double* values, std::size_t count) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (std::uint64_t d : dims) put_u64(out, d);
  for (std::size_t i = 0; i < count; ++i) put_f64(out, values[i]);
}

void put_scalar_entry(std::string& out, const std::string& name, double v) {
  put_entry(out, name, {}, &v, 1);
}

void put_param_entry(std::string& out, const std::string& name, const ParamValue& v) {
  if (const auto* t = std::get_if<Tensor4>(&v)) {
    put_entry(out, name,
              {static_cast<std::uint64_t>(t->n), static_cast<std::uint64_t>(t->c),
               static_cast<std::uint64_t>(t->h), static_cast<std::uint64_t>(t->w)},
              t->data.data(), t->data.size());
  } else {
    const Matrix& m = std::get<Matrix>(v);
    put_entry(out, name,
              {static_cast<std::uint64_t>(m.rows), static_cast<std::uint64_t>(m.cols)},
              m.data.data(), m.data.size());
  }
}

// Cursor over the raw file bytes. Every read names what it was after, so
// truncation errors point at the exact field.
struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t count, const std::string& what) {
    if (pos + count > buf.size()) {
      throw FormatError("checkpoint: truncated while reading " + what);
    }
  }

  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }

  std::uint64_t u64(const std::string& what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
  }

  double f64(const std::string& what) { return std::bit_cast<double>(u64(what)); }

  std::string bytes(std::size_t count, const std::string& what) {
    need(count, what);
    std::string v = buf.substr(pos, count);
    pos += count;
    return v;
  }
};

struct RawEntry {
  std::string name;
  std::uint32_t rank = 0;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

RawEntry read_entry(Reader& r, std::uint64_t index) {
  const std::string label = "entry " + std::to_string(index);
  RawEntry e;
  const std::uint32_t name_len = r.u32(label + " name length");
  if (name_len == 0 || name_len > kMaxNameLen) {
    throw FormatError("checkpoint: " + label + " has invalid name length " +
                      std::to_string(name_len));
  }
  e.name = r.bytes(name_len, label + " name");
  e.rank = r.u32("rank of '" + e.name + "'");
  if (e.rank != 0 && e.rank != 2 && e.rank != 4) {
    throw FormatError("checkpoint: entry '" + e.name + "' has invalid rank " +
                      std::to_string(e.rank));
  }
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < e.rank; ++i) {
    const std::uint64_t d = r.u64("dim " + std::to_string(i) + " of '" + e.name + "'");
    if (d == 0 || d > kMaxElements || count > kMaxElements / d) {
      throw FormatError("checkpoint: entry '" + e.name + "' has invalid dimension " +
                        std::to_string(d));
    }
    e.dims.push_back(d);
    count *= d;
  }
  e.values.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    e.values.push_back(r.f64("values of '" + e.name + "'"));
  }
  return e;
}

ParamValue entry_to_value(const RawEntry& e) {
  if (e.rank == 2) {
    Matrix m(static_cast<int>(e.dims[0]), static_cast<int>(e.dims[1]));
    m.data = e.values;
    return m;
  }
  if (e.rank == 4) {
    Tensor4 t(static_cast<int>(e.dims[0]), static_cast<int>(e.dims[1]),
              static_cast<int>(e.dims[2]), static_cast<int>(e.dims[3]));
    t.data = e.values;
    return t;
  }
  throw FormatError("checkpoint: entry '" + e.name + "' must be rank 2 or 4, got rank " +
                    std::to_string(e.rank));
}

double entry_to_scalar(const RawEntry& e) {
  if (e.rank != 0) {
    throw FormatError("checkpoint: entry '" + e.name + "' must be rank 0, got rank " +
                      std::to_string(e.rank));
  }
  return e.values[0];
}

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

std::uint64_t scalar_to_u64(double v, const std::string& name) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 9.007199254740992e15) {
    throw FormatError("checkpoint: entry '" + name + "' is not a valid unsigned integer");
  }
  return static_cast<std::uint64_t>(v);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamMap& params, const AdamState& adam,
                     bool has_adam, std::uint64_t encoder_seed) {
  std::uint64_t entries = params.size() + 1;  // params + meta/encoder_seed
  if (has_adam) entries += 5 + adam.m.size() + adam.v.size();

  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, entries);

  for (const auto& [name, value] : params) put_param_entry(out, name, value);
  if (has_adam) {
    put_scalar_entry(out, "adam/beta1", adam.beta1);
    put_scalar_entry(out, "adam/beta2", adam.beta2);
    put_scalar_entry(out, "adam/eps", adam.eps);
    put_scalar_entry(out, "adam/lr", adam.lr);
    put_scalar_entry(out, "adam/t", static_cast<double>(adam.t));
    for (const auto& [name, value] : adam.m) put_param_entry(out, "adam/m/" + name, value);
    for (const auto& [name, value] : adam.v) put_param_entry(out, "adam/v/" + name, value);
  }
  put_scalar_entry(out, "meta/encoder_seed", static_cast<double>(encoder_seed));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  file.flush();
  if (!file) throw IoError("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("checkpoint: cannot open '" + path + "' for reading");
  std::string buf((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (file.bad()) throw IoError("checkpoint: read from '" + path + "' failed");

  Reader r{buf};
  const std::string magic = r.bytes(4, "magic");
  if (magic != std::string(kMagic, sizeof(kMagic))) {
    throw FormatError("checkpoint: bad magic, expected \"GRIN\"");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                      ", expected " + std::to_string(kCheckpointVersion));
  }
  const std::uint64_t count = r.u64("entry count");

  std::vector<RawEntry> entries;
  std::set<std::string> seen;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    RawEntry e = read_entry(r, i);
    if (!seen.insert(e.name).second) {
      throw FormatError("checkpoint: duplicate entry '" + e.name + "'");
    }
    entries.push_back(std::move(e));
  }
  if (r.pos != buf.size()) {
    throw FormatError("checkpoint: " + std::to_string(buf.size() - r.pos) +
                      " trailing bytes after the last entry");
  }

  Checkpoint ck;
  int adam_scalars = 0;
  for (const RawEntry& e : entries) {
    if (starts_with(e.name, "adam/m/")) {
      ck.adam.m[e.name.substr(7)] = entry_to_value(e);
    } else if (starts_with(e.name, "adam/v/")) {
      ck.adam.v[e.name.substr(7)] = entry_to_value(e);
    } else if (e.name == "adam/beta1") {
      ck.adam.beta1 = entry_to_scalar(e);
      ++adam_scalars;
    } else if (e.name == "adam/beta2") {
      ck.adam.beta2 = entry_to_scalar(e);
      ++adam_scalars;
    } else if (e.name == "adam/eps") {
      ck.adam.eps = entry_to_scalar(e);
      ++adam_scalars;
    } else if (e.name == "adam/lr") {
      ck.adam.lr = entry_to_scalar(e);
      ++adam_scalars;
    } else if (e.name == "adam/t") {
      ck.adam.t = scalar_to_u64(entry_to_scalar(e), e.name);
      ++adam_scalars;
    } else if (e.name == "meta/encoder_seed") {
      ck.encoder_seed = scalar_to_u64(entry_to_scalar(e), e.name);
    } else if (starts_with(e.name, "adam/") || starts_with(e.name, "meta/")) {
      throw FormatError("checkpoint: unknown reserved entry '" + e.name + "'");
    } else {
      ck.params[e.name] = entry_to_value(e);
    }
  }
  if (adam_scalars != 0 && adam_scalars != 5) {
    throw FormatError("checkpoint: optimizer state is incomplete (" +
                      std::to_string(adam_scalars) + " of 5 scalars present)");
  }
  ck.has_adam = adam_scalars == 5;
  if (!ck.has_adam && (!ck.adam.m.empty() || !ck.adam.v.empty())) {
    throw FormatError("checkpoint: moment entries present without the optimizer scalars");
  }
  return ck;
}

}  // namespace grin
