#pragma once

#include <functional>

#include "pki/data.hpp"
#include "pki/eval.hpp"
#include "pki/trainer.hpp"

namespace pki {

struct ProtocolResult {
  ModelState state;
  AccuracyMatrix accuracy;
};

// Called after each session has been trained and evaluated.
using SessionCallback = std::function<void(const ProtocolResult&)>;

// Base session, then every incremental session, evaluating after each on
// the union of the test sets seen so far. Validates the stream first.
ProtocolResult run_protocol(const SessionStream& stream, const TrainConfig& cfg,
                            const SessionCallback& on_session = {});

// Continues a run from a state saved after some session t: trains sessions
// t+1..T with `cfg` and appends their evaluations.
ProtocolResult resume_protocol(ProtocolResult from, const SessionStream& stream,
                               const TrainConfig& cfg, const SessionCallback& on_session = {});

// Test sets of sessions 0..t.
std::vector<const FeatureDataset*> seen_test_sets(const SessionStream& stream, std::size_t t);

}  // namespace pki
