#pragma once

#include <filesystem>

#include "you2me/common.hpp"

namespace you2me {

// Binary matrix container: magic "Y2ME", u32 version, u64 rows, u64 cols
// (little endian), then rows*cols float32 row-major. Writes go through a
// temp file and rename so readers never see partial payloads.
inline constexpr std::uint32_t kBlobVersion = 1;

void write_blob(const std::filesystem::path& path, const MatX<float>& m);
MatX<float> read_blob(const std::filesystem::path& path);

}  // namespace you2me
