#include "pki/checkpoint.hpp"

#include <algorithm>
#include <optional>

#include "binary_io.hpp"
#include "config_json.hpp"
#include "pki/errors.hpp"

namespace pki {
namespace {

using nlohmann::json;
constexpr char kMagic[4] = {'P', 'K', 'I', 'C'};

void write_projector(detail::ByteWriter& w, const Projector& p) {
  for (const auto& t : p.tensors()) w.f64s(t);
}

Projector read_projector(detail::ByteReader& r, std::size_t d, std::size_t h, std::size_t p) {
  Projector proj = zero_projector(d, h, p);
  for (auto t : proj.tensors()) r.f64s(t);
  return proj;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ProtocolResult& result) {
  const ModelState& s = result.state;
  const ProjectorEnsemble& ens = s.ensemble;
  const Projector& shape = ens.has_current()       ? ens.current()
                           : ens.residual()        ? *ens.residual()
                                                   : ens.stored().front();
  json memory = json::array();
  for (const auto& [c, entry] : s.memory.entries()) memory.push_back({c, entry.origin_session});

  const json header{
      {"format", "pki-checkpoint"},
      {"config", detail::to_json(s.config)},
      {"layout", detail::to_json(s.layout)},
      {"dim", s.dim},
      {"session", s.session()},
      {"rng", {{"seed", s.config.seed}, {"next_session", s.session() + 1}}},
      {"ensemble",
       {{"mode", to_string(ens.mode())},
        {"k", ens.settings().k},
        {"alpha", ens.settings().alpha},
        {"d", shape.input_dim()},
        {"h", shape.hidden_dim()},
        {"p", shape.output_dim()},
        {"stored", ens.stored().size()},
        {"residual", ens.residual().has_value()},
        {"current", ens.has_current()},
        {"last_frozen", ens.last_frozen().has_value()}}},
      {"classifier", {{"rows", s.classifier.num_classes()}, {"cols", s.classifier.input_dim()}}},
      {"memory", memory},
      {"history", result.accuracy.sessions()},
  };
  const std::string header_text = header.dump();

  detail::ByteWriter w;
  w.bytes({kMagic, 4});
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(header_text.size()));
  w.bytes(header_text);
  for (const auto& p : ens.stored()) write_projector(w, p);
  if (ens.residual()) write_projector(w, *ens.residual());
  if (ens.has_current()) write_projector(w, ens.current());
  if (ens.last_frozen()) write_projector(w, *ens.last_frozen());
  w.f64s(s.classifier.w.data);
  w.f64s(s.classifier.b);
  for (const auto& [c, entry] : s.memory.entries()) w.f64s(entry.mean);
  w.f64s(result.accuracy.per_session);
  for (const auto& row : result.accuracy.per_origin) {
    w.u32(static_cast<std::uint32_t>(row.size()));
    w.f64s(row);
  }
  return w.take();
}

ProtocolResult decode_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    r.fail("bad magic, expected \"PKIC\"", 0);
  }
  r.bytes(4);
  const std::size_t version_at = r.offset();
  if (const auto v = r.u16(); v != kCheckpointVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(v), version_at);
  }
  const std::uint32_t header_len = r.u32();
  const std::size_t header_at = r.offset();
  const std::string header_text = r.bytes(header_len);

  try {
    const json h = json::parse(header_text);
    if (h.at("format") != "pki-checkpoint") r.fail("header is not a pki checkpoint", header_at);
    const TrainConfig cfg = detail::train_config_from_json(h.at("config"));
    const SessionLayout layout = detail::layout_from_json(h.at("layout"));
    const json& e = h.at("ensemble");
    EnsembleSettings settings{parse_ensemble_mode(e.at("mode").get<std::string>()),
                              e.at("k").get<std::size_t>(), e.at("alpha").get<double>()};
    const std::size_t d = e.at("d"), hd = e.at("h"), p = e.at("p");

    std::vector<Projector> stored;
    for (std::size_t i = 0, n = e.at("stored"); i < n; ++i) stored.push_back(read_projector(r, d, hd, p));
    std::optional<Projector> residual, current, last_frozen;
    if (e.at("residual").get<bool>()) residual = read_projector(r, d, hd, p);
    if (e.at("current").get<bool>()) current = read_projector(r, d, hd, p);
    if (e.at("last_frozen").get<bool>()) last_frozen = read_projector(r, d, hd, p);
    ProjectorEnsemble ens = ProjectorEnsemble::restore(settings, h.at("session"), std::move(stored),
                                                       std::move(residual), std::move(current),
                                                       std::move(last_frozen));

    Classifier clf;
    clf.w = Matrix(h.at("classifier").at("rows"), h.at("classifier").at("cols"));
    clf.b.assign(clf.w.rows, 0.0);
    r.f64s(clf.w.data);
    r.f64s(clf.b);

    const std::size_t dim = h.at("dim");
    ClassMeanMemory memory;
    for (const auto& item : h.at("memory")) {
      Vector mean(dim);
      r.f64s(mean);
      memory.insert(item.at(0).get<ClassId>(), {std::move(mean), item.at(1).get<std::size_t>()});
    }

    AccuracyMatrix acc;
    const std::size_t sessions = h.at("history");
    acc.per_session.resize(sessions);
    r.f64s(acc.per_session);
    for (std::size_t s = 0; s < sessions; ++s) {
      Vector row(r.u32());
      r.f64s(row);
      acc.per_origin.push_back(std::move(row));
    }
    if (r.remaining() != 0) r.fail("trailing bytes after payload", r.offset());

    return {ModelState{cfg, layout, dim, std::move(ens), std::move(clf), std::move(memory)},
            std::move(acc)};
  } catch (const json::exception& ex) {
    throw ParseError(std::string("checkpoint header: ") + ex.what(), header_at);
  } catch (const InvalidArgument& ex) {
    throw ParseError(std::string("checkpoint: ") + ex.what(), header_at);
  } catch (const InvalidState& ex) {
    throw ParseError(std::string("checkpoint: ") + ex.what(), header_at);
  }
}

void save_checkpoint(const std::filesystem::path& path, const ProtocolResult& result) {
  detail::write_file(path, encode_checkpoint(result));
}

ProtocolResult load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace pki
