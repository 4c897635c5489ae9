#include "pki/data.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <string>

#include "binary_io.hpp"
#include "pki/errors.hpp"
#include "pki/rng.hpp"

namespace pki {
namespace {

constexpr char kMagic[4] = {'P', 'K', 'I', 'F'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;
constexpr std::size_t kHeaderSize = 4 + 2 + 1 + 4 + 4;

bool is_text_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return ext == ".csv" || ext == ".txt";
}

[[noreturn]] void violation(StreamViolationKind kind, std::size_t session, std::int64_t cls,
                            const std::string& what) {
  throw StreamViolation(kind, session, cls, "session " + std::to_string(session) + ": " + what);
}

}  // namespace

std::set<ClassId> FeatureDataset::classes() const { return {labels.begin(), labels.end()}; }

void FeatureDataset::add(Vector f, ClassId y) {
  if (empty() && dim == 0) dim = f.size();
  if (f.size() != dim) {
    throw InvalidArgument("FeatureDataset::add: feature has dimension " + std::to_string(f.size()) +
                          ", dataset has " + std::to_string(dim));
  }
  features.push_back(std::move(f));
  labels.push_back(y);
}

FeatureDataset concat(const std::vector<const FeatureDataset*>& parts) {
  FeatureDataset out;
  for (const auto* part : parts) {
    if (part->empty()) continue;
    if (out.dim == 0) out.dim = part->dim;
    if (part->dim != out.dim) throw InvalidArgument("concat: datasets have different dimensions");
    out.features.insert(out.features.end(), part->features.begin(), part->features.end());
    out.labels.insert(out.labels.end(), part->labels.begin(), part->labels.end());
  }
  return out;
}

ClassId SessionLayout::first_class(std::size_t session) const {
  if (session == 0) return 0;
  return static_cast<ClassId>(base_classes + (session - 1) * n_way);
}

std::size_t SessionLayout::classes_in(std::size_t session) const {
  return session == 0 ? base_classes : n_way;
}

std::size_t SessionLayout::origin_of(ClassId c) const {
  if (c < base_classes) return 0;
  return 1 + (c - base_classes) / n_way;
}

void SessionLayout::validate() const {
  if (base_classes == 0 || n_way == 0 || k_shot == 0) {
    throw InvalidArgument("SessionLayout: base_classes, n_way and k_shot must be positive");
  }
}

void SynthSpec::validate() const {
  layout.validate();
  if (dim == 0) throw InvalidArgument("SynthSpec: d must be >= 1");
  if (!(cluster_std > 0.0)) throw InvalidArgument("SynthSpec: cluster_std must be > 0");
  if (!(center_scale > 0.0)) throw InvalidArgument("SynthSpec: center_scale must be > 0");
  if (train_per_base_class == 0 || test_per_class == 0) {
    throw InvalidArgument("SynthSpec: per-class example counts must be positive");
  }
}

SessionStream make_synthetic_stream(const SynthSpec& spec) {
  spec.validate();
  const SessionLayout& layout = spec.layout;
  const std::size_t total = layout.total_classes();

  std::vector<Vector> centers(total, Vector(spec.dim));
  SplitMix64 center_rng(derive_seed(spec.seed, RngStream::kSynthCenters));
  for (auto& c : centers) {
    for (double& x : c) x = center_rng.uniform(-spec.center_scale, spec.center_scale);
  }

  auto sample = [&](FeatureDataset& ds, ClassId c, std::size_t count, SplitMix64& rng) {
    for (std::size_t i = 0; i < count; ++i) {
      Vector f(spec.dim);
      for (std::size_t j = 0; j < spec.dim; ++j) f[j] = centers[c][j] + spec.cluster_std * rng.normal();
      ds.add(std::move(f), c);
    }
  };

  SessionStream stream;
  stream.layout = layout;
  for (std::size_t s = 0; s < layout.num_sessions(); ++s) {
    Session session;
    session.train.dim = spec.dim;
    session.test.dim = spec.dim;
    const std::size_t per_class = s == 0 ? spec.train_per_base_class : layout.k_shot;
    for (std::size_t i = 0; i < layout.classes_in(s); ++i) {
      const ClassId c = layout.first_class(s) + static_cast<ClassId>(i);
      SplitMix64 train_rng(derive_seed(spec.seed, RngStream::kSynthSamples, c));
      SplitMix64 test_rng(derive_seed(spec.seed, RngStream::kTestData, c));
      sample(session.train, c, per_class, train_rng);
      sample(session.test, c, spec.test_per_class, test_rng);
    }
    stream.sessions.push_back(std::move(session));
  }
  return stream;
}

void validate_stream(const SessionStream& stream) {
  const SessionLayout& layout = stream.layout;
  if (stream.sessions.size() != layout.num_sessions()) {
    violation(StreamViolationKind::kSessionCount, 0, -1,
              "layout expects " + std::to_string(layout.num_sessions()) + " sessions, stream has " +
                  std::to_string(stream.sessions.size()));
  }
  const std::size_t dim = stream.dim();
  std::map<ClassId, std::size_t> owner;
  for (std::size_t s = 0; s < stream.sessions.size(); ++s) {
    const Session& session = stream.sessions[s];
    if (session.train.empty()) violation(StreamViolationKind::kEmpty, s, -1, "empty training set");
    for (const auto* ds : {&session.train, &session.test}) {
      if (ds->features.size() != ds->labels.size()) {
        violation(StreamViolationKind::kDimensionMismatch, s, -1, "feature/label count mismatch");
      }
      if (ds->dim != dim && !ds->empty()) {
        violation(StreamViolationKind::kDimensionMismatch, s, -1,
                  "feature dimension " + std::to_string(ds->dim) + " differs from " +
                      std::to_string(dim));
      }
      for (const auto& f : ds->features) {
        if (f.size() != dim) {
          violation(StreamViolationKind::kDimensionMismatch, s, -1,
                    "example with dimension " + std::to_string(f.size()) + ", expected " +
                        std::to_string(dim));
        }
      }
    }

    std::map<ClassId, std::size_t> counts;
    for (ClassId y : session.train.labels) ++counts[y];
    for (const auto& [c, n] : counts) {
      auto [it, inserted] = owner.emplace(c, s);
      if (!inserted) {
        violation(StreamViolationKind::kOverlap, s, c,
                  "class " + std::to_string(c) + " already appeared in session " +
                      std::to_string(it->second) + " (label spaces must be disjoint)");
      }
    }
    if (s == 0) {
      if (counts.size() != layout.base_classes) {
        violation(StreamViolationKind::kWayCount, s, -1,
                  "base session has " + std::to_string(counts.size()) + " classes, layout expects " +
                      std::to_string(layout.base_classes));
      }
    } else {
      if (counts.size() != layout.n_way) {
        violation(StreamViolationKind::kWayCount, s, -1,
                  std::to_string(counts.size()) + " classes, expected " +
                      std::to_string(layout.n_way) + "-way");
      }
      for (const auto& [c, n] : counts) {
        if (n != layout.k_shot) {
          violation(StreamViolationKind::kShotCount, s, c,
                    "class " + std::to_string(c) + " has " + std::to_string(n) +
                        " examples, expected " + std::to_string(layout.k_shot) + "-shot");
        }
      }
    }
    for (ClassId y : session.test.labels) {
      if (!counts.contains(y)) {
        violation(StreamViolationKind::kTestLabel, s, y,
                  "test label " + std::to_string(y) + " is not in this session's label space");
      }
    }
  }
}

std::vector<std::uint8_t> encode_pkif(const FeatureDataset& ds) {
  detail::ByteWriter w;
  w.bytes({kMagic, 4});
  w.u16(kVersion);
  w.u8(kDtypeF64);
  w.u32(static_cast<std::uint32_t>(ds.dim));
  w.u32(static_cast<std::uint32_t>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.features[i].size() != ds.dim) {
      throw InvalidArgument("encode_pkif: example " + std::to_string(i) + " has wrong dimension");
    }
    w.u32(ds.labels[i]);
    w.f64s(ds.features[i]);
  }
  return w.take();
}

FeatureDataset decode_pkif(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "PKIF");
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    r.fail("bad magic, expected \"PKIF\"", 0);
  }
  r.bytes(4);
  const std::size_t version_at = r.offset();
  if (const auto v = r.u16(); v != kVersion) {
    r.fail("unsupported version " + std::to_string(v), version_at);
  }
  const std::size_t dtype_at = r.offset();
  if (const auto t = r.u8(); t != kDtypeF64) {
    r.fail("unsupported dtype " + std::to_string(t) + " (only 1 = f64)", dtype_at);
  }
  const std::size_t dim_at = r.offset();
  FeatureDataset ds;
  ds.dim = r.u32();
  if (ds.dim == 0) r.fail("feature dimension must be >= 1", dim_at);
  const std::size_t n = r.u32();
  const std::size_t record = 4 + 8 * ds.dim;
  if (r.remaining() < n * record) {
    const std::size_t complete = r.remaining() / record;
    r.fail("truncated: header declares " + std::to_string(n) + " records, only " +
               std::to_string(complete) + " present",
           kHeaderSize + complete * record);
  }
  ds.features.reserve(n);
  ds.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ClassId y = r.u32();
    Vector f(ds.dim);
    r.f64s(f);
    ds.features.push_back(std::move(f));
    ds.labels.push_back(y);
  }
  if (r.remaining() != 0) {
    r.fail(std::to_string(r.remaining()) + " trailing bytes after last record", r.offset());
  }
  return ds;
}

std::string encode_feature_text(const FeatureDataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out += std::to_string(ds.labels[i]);
    for (double x : ds.features[i]) {
      out += ',';
      out += detail::format_double(x);
    }
    out += '\n';
  }
  return out;
}

FeatureDataset decode_feature_text(std::string_view text) {
  FeatureDataset ds;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) {
      std::vector<std::string_view> fields;
      std::vector<std::size_t> starts;
      std::size_t fpos = 0;
      while (true) {
        const std::size_t comma = line.find(',', fpos);
        fields.push_back(line.substr(fpos, comma == std::string_view::npos ? std::string_view::npos
                                                                           : comma - fpos));
        starts.push_back(pos + fpos);
        if (comma == std::string_view::npos) break;
        fpos = comma + 1;
      }
      if (fields.size() < 2) throw ParseError("feature text: line has no feature values", pos);
      ClassId y = 0;
      {
        const auto f = fields[0];
        const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), y);
        if (ec != std::errc() || p != f.data() + f.size()) {
          throw ParseError("feature text: bad label '" + std::string(f) + "'", starts[0]);
        }
      }
      Vector values(fields.size() - 1);
      for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto f = fields[i];
        const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), values[i - 1]);
        if (ec != std::errc() || p != f.data() + f.size()) {
          throw ParseError("feature text: bad number '" + std::string(f) + "'", starts[i]);
        }
      }
      if (!ds.empty() && values.size() != ds.dim) {
        throw ParseError("feature text: line has " + std::to_string(values.size()) +
                             " features, expected " + std::to_string(ds.dim),
                         pos);
      }
      ds.add(std::move(values), y);
    }
    pos = end + 1;
  }
  return ds;
}

void save_feature_file(const std::filesystem::path& path, const FeatureDataset& ds) {
  if (is_text_path(path)) {
    detail::write_text_file(path, encode_feature_text(ds));
  } else {
    detail::write_file(path, encode_pkif(ds));
  }
}

FeatureDataset load_feature_file(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (is_text_path(path)) {
    return decode_feature_text({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
  }
  return decode_pkif(bytes);
}

}  // namespace pki
