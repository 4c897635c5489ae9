#include "pki/stream_io.hpp"

#include "binary_io.hpp"
#include "config_json.hpp"
#include "pki/errors.hpp"

namespace pki {

using nlohmann::json;

std::string session_file_name(std::size_t session, bool train) {
  return "session_" + std::to_string(session) + (train ? "_train.pkif" : "_test.pkif");
}

void save_stream(const std::filesystem::path& dir, const SessionStream& stream) {
  std::filesystem::create_directories(dir);
  json sessions = json::array();
  for (std::size_t t = 0; t < stream.sessions.size(); ++t) {
    const auto& s = stream.sessions[t];
    save_feature_file(dir / session_file_name(t, true), s.train);
    save_feature_file(dir / session_file_name(t, false), s.test);
    sessions.push_back({{"train", session_file_name(t, true)},
                        {"test", session_file_name(t, false)},
                        {"train_examples", s.train.size()},
                        {"test_examples", s.test.size()}});
  }
  json manifest = {{"schema_version", 1},
                   {"dim", stream.dim()},
                   {"layout", detail::to_json(stream.layout)},
                   {"sessions", sessions}};
  detail::write_text_file(dir / kStreamManifest, manifest.dump(2) + "\n");
}

SessionStream load_stream(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kStreamManifest;
  json manifest;
  try {
    manifest = json::parse(detail::read_text_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw ParseError(manifest_path.string() + ": " + e.what(), e.byte);
  }
  SessionStream stream;
  std::size_t dim = 0;
  try {
    if (manifest.at("schema_version").get<int>() != 1) {
      throw ParseError(manifest_path.string() + ": unsupported schema_version", 0);
    }
    dim = manifest.at("dim").get<std::size_t>();
    stream.layout = detail::layout_from_json(manifest.at("layout"));
    for (const auto& entry : manifest.at("sessions")) {
      Session s;
      s.train = load_feature_file(dir / entry.at("train").get<std::string>());
      s.test = load_feature_file(dir / entry.at("test").get<std::string>());
      stream.sessions.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what(), 0);
  }
  if (stream.dim() != dim) {
    throw ParseError(manifest_path.string() + ": dim " + std::to_string(dim) +
                         " differs from the feature files (" + std::to_string(stream.dim()) + ")",
                     0);
  }
  validate_stream(stream);
  return stream;
}

}  // namespace pki
