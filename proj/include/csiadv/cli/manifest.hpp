#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace csiadv::cli {

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

struct ManifestEntry {
  std::string path;    // relative to the run root, '/' separated
  std::string sha256;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Every regular file below `root` except `exclude`, sorted by path.
std::vector<ManifestEntry> build_manifest(const std::filesystem::path& root,
                                          const std::string& exclude = "manifest.txt");

/// "<sha256>  <path>" lines.
std::string format_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(const std::string& text);

}  // namespace csiadv::cli
