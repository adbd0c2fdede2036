#pragma once

// Binary session container (little-endian):
//   header  magic "DRVSESS\0", u32 format_version, f64 fps, u8 mode,
//           i32 map_h, i32 map_w, i32 scene_h, i32 scene_w, i32 scene_c,
//           u64 frame_count, u64 config_hash, u8 has_ego, str session_id
//   frames  u64 record_length, then f64 timestamp, u8 kind, u8 intention,
//           u8 distraction, f64 dist (+inf for open road), f64[h*w] gt,
//           u8 has_webcam, [f64[h*w] webcam], u8[scene] pixels
//   ego     f64 x, f64 y per frame (when has_ego)
// Strings are u32 length + bytes.

#include <cstdint>
#include <filesystem>

#include "drivatt/types.hpp"

namespace drivatt::pipeline {

inline constexpr std::uint32_t kSessionFormatVersion = 1;

void save_session(const std::filesystem::path& path, const SessionRecord& session, std::uint64_t config_hash = 0);

// Throws TruncatedFile, VersionMismatch or FormatError (bad magic or
// dimension mismatch between header and records).
SessionRecord load_session(const std::filesystem::path& path);

// Config hash stored in a session file header.
std::uint64_t session_config_hash(const std::filesystem::path& path);

}  // namespace drivatt::pipeline
