#include "csiadv/cli/manifest.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "csiadv/binary_io.hpp"
#include "csiadv/errors.hpp"

namespace csiadv::cli {

std::string sha256_bytes(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error("sha256: digest computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return sha256_bytes(std::string_view(bytes.data(), bytes.size()));
}

std::vector<ManifestEntry> build_manifest(const std::filesystem::path& root,
                                          const std::string& exclude) {
  std::vector<ManifestEntry> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = std::filesystem::relative(e.path(), root).generic_string();
    if (rel == exclude) continue;
    out.push_back({rel, sha256_file(e.path())});
  }
  std::sort(out.begin(), out.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  return out;
}

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += e.sha256 + "  " + e.path + "\n";
  return out;
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  std::vector<ManifestEntry> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.size() < 67 || line.substr(64, 2) != "  ") {
      throw FormatError(FormatErrorKind::kShapeMismatch, "manifest: malformed line \"" + line + "\"");
    }
    out.push_back({line.substr(66), line.substr(0, 64)});
  }
  return out;
}

}  // namespace csiadv::cli
