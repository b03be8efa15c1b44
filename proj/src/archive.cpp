#include "ccax/archive.hpp"

#include "ccax/error.hpp"
#include "ccax/io.hpp"

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace ccax {
namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != 8) throw FormatError(what + ": truncated archive");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const std::string& what) {
  if (n > (std::uint64_t{1} << 32)) throw FormatError(what + ": implausible length field");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n) throw FormatError(what + ": truncated archive");
  return s;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

void ModelArchive::set(std::string key, std::string value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
    throw InvalidArgument("archive manifest keys and values must be single-line and keys must not contain '='");
  }
  for (auto& [k, v] : manifest_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  manifest_.emplace_back(std::move(key), std::move(value));
}

void ModelArchive::set(std::string key, double value) { set(std::move(key), format_double(value)); }

void ModelArchive::set(std::string key, long long value) { set(std::move(key), std::to_string(value)); }

bool ModelArchive::has(std::string_view key) const {
  for (const auto& [k, v] : manifest_) {
    if (k == key) return true;
  }
  return false;
}

const std::string& ModelArchive::get(std::string_view key) const {
  for (const auto& [k, v] : manifest_) {
    if (k == key) return v;
  }
  throw FormatError("archive manifest has no key '" + std::string(key) + "'");
}

double ModelArchive::get_double(std::string_view key) const {
  const auto& text = get(key);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("archive manifest key '" + std::string(key) + "' is not a number: " + text);
  }
  return v;
}

long long ModelArchive::get_int(std::string_view key) const {
  const auto& text = get(key);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("archive manifest key '" + std::string(key) + "' is not an integer: " + text);
  }
  return v;
}

void ModelArchive::add_blob(std::string name, FeatureMatrix blob) {
  if (name.empty()) throw InvalidArgument("archive blob names must be non-empty");
  if (has_blob(name)) throw InvalidArgument("duplicate archive blob '" + name + "'");
  blobs_.emplace_back(std::move(name), std::move(blob));
}

bool ModelArchive::has_blob(std::string_view name) const {
  for (const auto& [n, b] : blobs_) {
    if (n == name) return true;
  }
  return false;
}

const FeatureMatrix& ModelArchive::blob(std::string_view name) const {
  for (const auto& [n, b] : blobs_) {
    if (n == name) return b;
  }
  throw FormatError("archive has no blob '" + std::string(name) + "'");
}

std::string ModelArchive::manifest_text() const {
  std::string text;
  for (const auto& [k, v] : manifest_) {
    text += k;
    text += '=';
    text += v;
    text += '\n';
  }
  return text;
}

void save_archive(const ModelArchive& archive, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::out | std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(kArchiveMagic.data(), static_cast<std::streamsize>(kArchiveMagic.size()));
  const auto manifest = archive.manifest_text();
  put_u64(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const auto& [name, blob] : archive.blobs()) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_fmat(out, blob.values());
  }
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ModelArchive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::in | std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const auto what = path.string();
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 8 || std::string_view(magic.data(), magic.size()) != kArchiveMagic) {
    throw FormatError(what + ": bad archive magic");
  }
  ModelArchive archive;
  const auto manifest = get_bytes(in, get_u64(in, what), what);
  std::istringstream lines(manifest);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(what + ": manifest line without '=': " + line);
    archive.set(line.substr(0, eq), line.substr(eq + 1));
  }
  while (in.peek() != std::char_traits<char>::eof()) {
    auto name = get_bytes(in, get_u64(in, what), what);
    auto blob = read_fmat(in, what + " blob '" + name + "'");
    archive.add_blob(std::move(name), std::move(blob));
  }
  return archive;
}

}  // namespace ccax
