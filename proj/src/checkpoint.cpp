#include "cdl/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cdl/error.hpp"
#include "cdl/hash.hpp"

namespace cdl {

namespace {
constexpr char kMagic[4] = {'C', 'D', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t from_hex(const std::string& s) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used, 16);
    if (used != s.size()) throw IntegrityError("bad hex value '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw IntegrityError("bad hex value '" + s + "'");
  }
}

std::uint64_t write_parameter_blob(const ag::ParameterStore& params, const std::filesystem::path& path) {
  std::ostringstream out;
  auto put = [&](const void* d, std::size_t n) { out.write(static_cast<const char*>(d), static_cast<std::streamsize>(n)); };
  put(kMagic, 4);
  put(&kVersion, sizeof kVersion);
  const auto count = static_cast<std::uint64_t>(params.size());
  put(&count, sizeof count);
  for (const auto& p : params) {
    const auto len = static_cast<std::uint32_t>(p.name.size());
    put(&len, sizeof len);
    put(p.name.data(), len);
    const auto rows = static_cast<std::int64_t>(p.value.rows());
    const auto cols = static_cast<std::int64_t>(p.value.cols());
    put(&rows, sizeof rows);
    put(&cols, sizeof cols);
    put(p.value.data(), sizeof(double) * static_cast<std::size_t>(p.value.size()));
  }
  const std::string bytes = out.str();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing " + path.string());
  Fnv1a h;
  h.update(bytes);
  return h.digest();
}

void read_parameter_blob(const std::filesystem::path& path, ag::ParameterStore& params,
                         std::uint64_t expected_checksum) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IntegrityError("missing parameter blob " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string bytes = ss.str();
  Fnv1a h;
  h.update(bytes);
  if (h.digest() != expected_checksum) throw IntegrityError("checksum mismatch in " + path.string());

  std::size_t off = 0;
  auto get = [&](void* d, std::size_t n) {
    if (off + n > bytes.size()) throw IntegrityError("truncated parameter blob " + path.string());
    std::memcpy(d, bytes.data() + off, n);
    off += n;
  };
  char magic[4];
  get(magic, 4);
  std::uint32_t version = 0;
  get(&version, sizeof version);
  if (std::memcmp(magic, kMagic, 4) != 0 || version != kVersion)
    throw IntegrityError("not a parameter blob: " + path.string());
  std::uint64_t count = 0;
  get(&count, sizeof count);
  if (count != params.size()) throw IntegrityError("parameter count mismatch in " + path.string());
  for (auto& p : params) {
    std::uint32_t len = 0;
    get(&len, sizeof len);
    std::string name(len, '\0');
    get(name.data(), len);
    std::int64_t rows = 0, cols = 0;
    get(&rows, sizeof rows);
    get(&cols, sizeof cols);
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols())
      throw IntegrityError("parameter '" + name + "' does not match the expected layout ('" + p.name + "')");
    get(p.value.data(), sizeof(double) * static_cast<std::size_t>(p.value.size()));
  }
  if (off != bytes.size()) throw IntegrityError("trailing bytes in parameter blob " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IntegrityError("missing file " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw IntegrityError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

}  // namespace cdl
