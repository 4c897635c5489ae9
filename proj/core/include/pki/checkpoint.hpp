#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pki/protocol.hpp"

namespace pki {

// Checkpoint container, little-endian:
//   "PKIC" | u16 version=1 | u32 header_len | header (UTF-8 JSON) | f64 payload
// The header holds the config snapshot, layout, ensemble metadata (mode, k,
// alpha, session, tensor counts), classifier shape, memory class ids with
// their origin sessions, and the PRNG cursor (root seed + next session).
// The payload holds, in order: stored projectors, residual sum, current
// projector, last frozen projector (each W1 b1 W2 b2 W3 b3), classifier W
// and b, memory means by class id, then the accuracy history.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ProtocolResult& result);
ProtocolResult decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const ProtocolResult& result);
ProtocolResult load_checkpoint(const std::filesystem::path& path);

}  // namespace pki
