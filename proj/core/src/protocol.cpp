#include "pki/protocol.hpp"

#include "pki/errors.hpp"

namespace pki {

std::vector<const FeatureDataset*> seen_test_sets(const SessionStream& stream, std::size_t t) {
  std::vector<const FeatureDataset*> out;
  for (std::size_t s = 0; s <= t && s < stream.sessions.size(); ++s) {
    out.push_back(&stream.sessions[s].test);
  }
  return out;
}

ProtocolResult run_protocol(const SessionStream& stream, const TrainConfig& cfg,
                            const SessionCallback& on_session) {
  validate_stream(stream);
  ProtocolResult result{base_train(stream.sessions[0].train, cfg, stream.layout), {}};
  result.accuracy.append(evaluate_session(result.state, seen_test_sets(stream, 0)));
  if (on_session) on_session(result);
  return resume_protocol(std::move(result), stream, cfg, on_session);
}

ProtocolResult resume_protocol(ProtocolResult from, const SessionStream& stream,
                               const TrainConfig& cfg, const SessionCallback& on_session) {
  validate_stream(stream);
  if (!(from.state.layout == stream.layout)) {
    throw InvalidState("resume: checkpoint layout does not match the stream");
  }
  if (from.accuracy.sessions() != from.state.session() + 1) {
    throw InvalidState("resume: accuracy history does not cover sessions 0.." +
                       std::to_string(from.state.session()));
  }
  for (std::size_t t = from.state.session() + 1; t < stream.sessions.size(); ++t) {
    from.state = incremental_train(std::move(from.state), stream.sessions[t].train, cfg);
    from.accuracy.append(evaluate_session(from.state, seen_test_sets(stream, t)));
    if (on_session) on_session(from);
  }
  return from;
}

}  // namespace pki
