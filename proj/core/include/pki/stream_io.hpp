#pragma once

#include <filesystem>
#include <string>

#include "pki/data.hpp"

namespace pki {

// A stream on disk is a directory holding session_<t>_train.pkif and
// session_<t>_test.pkif for every session plus a stream.json manifest:
//
//   {"schema_version": 1, "dim": d,
//    "layout": {"base_classes": B, "num_incremental": T, "n_way": N, "k_shot": K},
//    "sessions": [{"train": "session_0_train.pkif", "test": "session_0_test.pkif",
//                  "train_examples": n, "test_examples": m}, ...]}
//
// File names in the manifest are relative to the directory.
inline constexpr const char* kStreamManifest = "stream.json";

void save_stream(const std::filesystem::path& dir, const SessionStream& stream);

// Loads and validates. ParseError for a malformed manifest or feature file,
// StreamViolation if the loaded sessions break the layout.
SessionStream load_stream(const std::filesystem::path& dir);

std::string session_file_name(std::size_t session, bool train);

}  // namespace pki
