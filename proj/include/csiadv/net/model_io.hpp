#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "csiadv/net/csinet.hpp"

namespace csiadv::net {

inline constexpr std::uint16_t kModelVersion = 1;

/// Model file bytes. Tensor records follow parameters() order; each conv
/// block's batch-norm running mean and variance follow its beta.
std::vector<char> serialize_model(const CsiNetParams<float>& model);

void save_model(const CsiNetParams<float>& model, const std::filesystem::path& path);

/// Loads a model; with `expected`, a header that disagrees is a shape mismatch.
/// Loaded parameters are trainable; callers freeze as needed.
CsiNetParams<float> load_model(const std::filesystem::path& path,
                               const std::optional<ModelConfig>& expected = std::nullopt);

CsiNetParams<float> deserialize_model(std::vector<char> bytes, const std::string& origin,
                                      const std::optional<ModelConfig>& expected = std::nullopt);

}  // namespace csiadv::net
