#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pki/nn.hpp"

namespace pki {

using ClassId = std::uint32_t;

// Labeled intermediate features, i.e. frozen-backbone outputs.
struct FeatureDataset {
  std::size_t dim = 0;
  std::vector<Vector> features;
  std::vector<ClassId> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::set<ClassId> classes() const;
  void add(Vector f, ClassId y);

  bool operator==(const FeatureDataset&) const = default;
};

// Concatenation in argument order. All parts must share a dimension.
FeatureDataset concat(const std::vector<const FeatureDataset*>& parts);

struct SessionLayout {
  std::size_t base_classes = 60;
  std::size_t num_incremental = 8;
  std::size_t n_way = 5;
  std::size_t k_shot = 5;

  std::size_t total_classes() const { return base_classes + num_incremental * n_way; }
  std::size_t num_sessions() const { return num_incremental + 1; }
  // Dense class ids: base classes are [0, B), session t > 0 owns [B+(t-1)N, B+tN).
  ClassId first_class(std::size_t session) const;
  std::size_t classes_in(std::size_t session) const;
  // Session that introduced `c`.
  std::size_t origin_of(ClassId c) const;

  void validate() const;
  bool operator==(const SessionLayout&) const = default;
};

struct Session {
  FeatureDataset train;
  FeatureDataset test;
};

struct SessionStream {
  SessionLayout layout;
  std::vector<Session> sessions;

  std::size_t dim() const { return sessions.empty() ? 0 : sessions.front().train.dim; }
};

struct SynthSpec {
  std::size_t dim = 32;
  SessionLayout layout;
  double cluster_std = 0.1;
  double center_scale = 5.0;
  std::size_t train_per_base_class = 100;
  std::size_t test_per_class = 100;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const SynthSpec&) const = default;
};

// Class centers ~ U[-center_scale, center_scale]^d, examples are
// center + N(0, cluster_std^2 I). Deterministic in spec.seed.
SessionStream make_synthetic_stream(const SynthSpec& spec);

// Throws StreamViolation describing the first broken invariant:
// session count, shared dimension, pairwise-disjoint train label spaces,
// N-way K-shot layout for t > 0, and test labels confined to L^(t).
void validate_stream(const SessionStream& stream);

// Binary PKIF format, little-endian:
//   "PKIF" | u16 version=1 | u8 dtype=1 (f64) | u32 d | u32 n | n x (u32 label, d x f64)
// Paths ending in .csv or .txt use the text variant: one `label,f1,...,fd` line per example.
void save_feature_file(const std::filesystem::path& path, const FeatureDataset& ds);
FeatureDataset load_feature_file(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_pkif(const FeatureDataset& ds);
FeatureDataset decode_pkif(std::span<const std::uint8_t> bytes);

std::string encode_feature_text(const FeatureDataset& ds);
FeatureDataset decode_feature_text(std::string_view text);

}  // namespace pki
