#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "pki/checkpoint.hpp"
#include "pki/config.hpp"
#include "pki/errors.hpp"
#include "pki/gradcheck.hpp"
#include "pki/protocol.hpp"
#include "pki/stream_io.hpp"

namespace fs = std::filesystem;

namespace pki::cli {
namespace {

// Raised for refusals the user can fix with a flag; maps to kExitUsage.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string raw(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

TableFormat table_format(const std::string& s) {
  try {
    return parse_table_format(s);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("--format: ") + e.what());
  }
}

bool has_content(const fs::path& p) {
  if (!fs::exists(p)) return false;
  if (!fs::is_directory(p)) return true;
  return fs::directory_iterator(p) != fs::directory_iterator();
}

// Existing non-empty destinations need --overwrite; with it they are cleared.
void claim_dir(const fs::path& dir, bool overwrite) {
  if (has_content(dir)) {
    if (!overwrite) {
      throw UsageError(dir.string() + " already exists; pass --overwrite to replace it");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void claim_file(const fs::path& file, bool overwrite) {
  if (fs::exists(file) && !overwrite) {
    throw UsageError(file.string() + " already exists; pass --overwrite to replace it");
  }
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool overwrite = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthSpec spec = a.config.empty() ? SynthSpec{} : load_synth_spec(a.config);
  if (a.seed) spec.seed = *a.seed;
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const SessionStream stream = make_synthetic_stream(spec);
  claim_dir(a.out, a.overwrite);
  save_stream(a.out, stream);
  write_text(fs::path(a.out) / "synth.json", dump_synth_spec(spec));
  out << "wrote " << stream.sessions.size() << " sessions (" << stream.layout.total_classes()
      << " classes, d=" << stream.dim() << ") to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- run

struct RunArgs {
  std::string config;
  std::string synth;
  std::string stream;
  std::vector<std::string> modes;
  std::vector<std::string> ks;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> init;
  std::optional<std::size_t> iters;
  std::string out;
  std::string format = "csv";
  bool overwrite = false;
};

struct Variant {
  std::string label;
  TrainConfig cfg;
};

std::size_t parse_k(const std::string& s, const SessionLayout& layout) {
  // "T" means one group spanning every session, i.e. PKIV-1 behaviour.
  if (s == "T") return layout.num_incremental + 1;
  std::size_t k = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), k);
  if (ec != std::errc{} || ptr != s.data() + s.size() || k == 0) {
    throw ConfigError("--k: expected a positive integer or T, got '" + s + "'");
  }
  return k;
}

std::vector<Variant> expand_variants(const TrainConfig& base, const RunArgs& a, const SessionLayout& layout) {
  std::vector<std::string> modes = a.modes;
  if (modes.empty()) modes.push_back(to_string(base.ensemble.mode));
  std::vector<Variant> out;
  for (const auto& m : modes) {
    TrainConfig cfg = base;
    try {
      cfg.ensemble.mode = parse_ensemble_mode(m);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (cfg.ensemble.mode != EnsembleMode::kPkiV2) {
      out.push_back({m, cfg});
      continue;
    }
    if (a.ks.empty()) {
      out.push_back({"pkiv2_k" + std::to_string(cfg.ensemble.k), cfg});
      continue;
    }
    for (const auto& ks : a.ks) {
      cfg.ensemble.k = parse_k(ks, layout);
      out.push_back({"pkiv2_k" + ks, cfg});
    }
  }
  if (out.empty()) throw ConfigError("no runs requested");
  for (auto& v : out) {
    try {
      v.cfg.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

std::string accuracy_csv(const AccuracyMatrix& acc) {
  const std::size_t n = acc.sessions();
  std::string s = "session,joint";
  for (std::size_t i = 0; i < n; ++i) s += ",o" + std::to_string(i);
  s += "\n";
  for (std::size_t t = 0; t < n; ++t) {
    s += std::to_string(t) + "," + raw(acc.per_session[t]);
    for (std::size_t i = 0; i < n; ++i) {
      s += ",";
      if (i < acc.per_origin[t].size()) s += raw(acc.per_origin[t][i]);
    }
    s += "\n";
  }
  return s;
}

fs::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutRootEnv); env && *env) return env;
  return "pki_runs";
}

int cmd_run(const RunArgs& a, std::ostream& out) {
  TrainConfig base = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
  if (a.alpha) base.ensemble.alpha = *a.alpha;
  if (a.iters) base.incr_iters = *a.iters;
  if (a.init) {
    try {
      base.init_mode = parse_init_mode(*a.init);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (a.synth.empty() == a.stream.empty()) throw ConfigError("give exactly one of --synth or --stream");
  const TableFormat format = table_format(a.format);

  std::vector<std::uint64_t> seeds = a.seeds;
  if (a.seed) seeds.insert(seeds.begin(), *a.seed);
  if (seeds.empty()) seeds.push_back(base.seed);

  std::string source;
  SessionStream stream;
  if (!a.synth.empty()) {
    const SynthSpec spec = load_synth_spec(a.synth);
    try {
      spec.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    stream = make_synthetic_stream(spec);
    source = "synth:" + a.synth;
  } else {
    stream = load_stream(a.stream);
    source = "stream:" + a.stream;
  }
  const std::vector<Variant> variants = expand_variants(base, a, stream.layout);

  const fs::path root = output_root(a.out);
  const fs::path summary = root / (format == TableFormat::kCsv ? "summary.csv" : "summary.md");
  claim_file(summary, a.overwrite);
  for (const auto& v : variants) {
    for (auto s : seeds) {
      const fs::path dir = root / v.label / ("seed_" + std::to_string(s));
      if (has_content(dir) && !a.overwrite) {
        throw UsageError(dir.string() + " already exists; pass --overwrite to replace it");
      }
    }
  }

  Report report;
  for (const auto& v : variants) {
    std::vector<double> mean(stream.sessions.size(), 0.0);
    for (auto s : seeds) {
      TrainConfig cfg = v.cfg;
      cfg.seed = s;
      const fs::path dir = root / v.label / ("seed_" + std::to_string(s));
      claim_dir(dir, a.overwrite);
      const ProtocolResult result = run_protocol(stream, cfg, [&](const ProtocolResult& r) {
        save_checkpoint(dir / ("checkpoint_s" + std::to_string(r.state.session()) + ".pkic"), r);
      });
      write_text(dir / "accuracy.csv", accuracy_csv(result.accuracy));
      nlohmann::json meta = {
          {"label", v.label},
          {"seed", s},
          {"source", source},
          {"sessions", result.accuracy.sessions()},
          {"final_joint", result.accuracy.per_session.back()},
          {"average", average_accuracy(result.accuracy.per_session)},
          {"materialized_projectors", result.state.ensemble.materialized_count()},
          {"config", nlohmann::json::parse(dump_train_config(cfg))}};
      write_text(dir / "meta.json", meta.dump(2) + "\n");
      for (std::size_t t = 0; t < mean.size(); ++t) mean[t] += result.accuracy.per_session[t];
      out << v.label << " seed " << s << ": final " << format_percent(100.0 * result.accuracy.per_session.back())
          << "\n";
    }
    ReportRow row{v.label, {}};
    for (double m : mean) row.values.push_back(100.0 * m / static_cast<double>(seeds.size()));
    report.rows.push_back(std::move(row));
  }
  const std::string table = emit_table(report, format);
  write_text(summary, table);
  out << table;
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> dirs;
  std::string format = "csv";
  std::string reference;
  std::string out;
  bool overwrite = false;
};

std::vector<double> read_joint_column(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw ParseError("cannot read " + csv.string(), 0);
  std::string line;
  std::getline(in, line);
  if (line.rfind("session,joint", 0) != 0) {
    throw ParseError(csv.string() + ": header must start with 'session,joint'", 0);
  }
  std::vector<double> joint;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos) throw ParseError(csv.string() + ": line " + std::to_string(lineno) + " is malformed", 0);
    const std::string cell = line.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !(v >= 0.0 && v <= 1.0)) {
      throw ParseError(csv.string() + ": line " + std::to_string(lineno) + ": bad accuracy '" + cell + "'", 0);
    }
    joint.push_back(v);
  }
  if (joint.empty()) throw ParseError(csv.string() + ": no sessions", 0);
  return joint;
}

std::string row_name(const fs::path& dir) {
  const fs::path p = dir.lexically_normal();
  std::string name = p.filename().string();
  if (name.empty()) name = p.parent_path().filename().string();
  return name.empty() ? p.string() : name;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const TableFormat format = table_format(a.format);
  Report report;
  for (const auto& d : a.dirs) {
    if (!fs::is_directory(d)) throw std::runtime_error(d + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(d)) {
      if (e.is_regular_file() && e.path().filename() == "accuracy.csv") files.push_back(e.path());
    }
    if (files.empty()) throw std::runtime_error("no accuracy.csv under " + d);
    std::sort(files.begin(), files.end());
    std::vector<double> sum;
    for (const auto& f : files) {
      const auto joint = read_joint_column(f);
      if (sum.empty()) sum.assign(joint.size(), 0.0);
      if (joint.size() != sum.size()) {
        throw std::runtime_error(f.string() + ": session count differs from other runs under " + d);
      }
      for (std::size_t t = 0; t < joint.size(); ++t) sum[t] += joint[t];
    }
    ReportRow row{row_name(d), {}};
    for (double s : sum) row.values.push_back(100.0 * s / static_cast<double>(files.size()));
    report.rows.push_back(std::move(row));
  }
  if (!a.reference.empty()) {
    report.reference = a.reference;
    const bool known = std::any_of(report.rows.begin(), report.rows.end(),
                                   [&](const ReportRow& r) { return r.name == a.reference; });
    if (!known) throw ConfigError("--reference '" + a.reference + "' is not one of the reported rows");
  }
  const std::string table = emit_table(report, format);
  if (!a.out.empty()) {
    claim_file(a.out, a.overwrite);
    write_text(a.out, table);
  }
  out << table;
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  GradcheckOptions opt;
  std::string mode = "pki";
  std::string reduction = "sum";
  std::size_t seeds = 1;
};

int cmd_gradcheck(GradcheckArgs a, std::ostream& out, std::ostream& err) {
  try {
    a.opt.ensemble.mode = parse_ensemble_mode(a.mode);
    a.opt.reduction = parse_reduction(a.reduction);
    a.opt.ensemble.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (a.opt.d == 0 || a.opt.h == 0 || a.opt.p == 0 || a.opt.classes < 2 ||
      a.opt.new_classes == 0 || a.opt.new_classes >= a.opt.classes) {
    throw ConfigError("gradcheck: need d, h, p >= 1 and 1 <= new-classes < classes");
  }
  bool passed = true;
  std::vector<std::string> offending;
  const std::uint64_t first = a.opt.seed;
  for (std::size_t i = 0; i < a.seeds; ++i) {
    a.opt.seed = first + i;
    const GradcheckReport r = run_gradcheck(a.opt);
    out << "seed " << a.opt.seed << " (" << a.mode << ", t=" << a.opt.session << ")\n";
    for (const auto& t : r.tensors) {
      const bool ok = t.max_rel_error < a.opt.tolerance;
      char line[160];
      std::snprintf(line, sizeof line, "  %-14s %6zu  max_rel %.3e  max_abs %.3e  %s\n", t.name.c_str(),
                    t.entries, t.max_rel_error, t.max_abs_error, ok ? "ok" : "FAIL");
      out << line;
      if (!ok) offending.push_back(t.name + " (seed " + std::to_string(a.opt.seed) + ")");
    }
    passed = passed && r.passed;
  }
  if (!passed) {
    err << "gradcheck failed (tolerance " << a.opt.tolerance << "):";
    for (const auto& o : offending) err << " " << o;
    err << "\n";
    return kExitCheckFailed;
  }
  out << "gradcheck passed\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Projector ensemble few-shot class-incremental learning on feature streams", "pki"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write a synthetic session stream");
  s->add_option("--config", synth.config, "synthetic spec (JSON)");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--seed", synth.seed, "override the spec seed");
  s->add_flag("--overwrite", synth.overwrite, "replace an existing directory");

  RunArgs run;
  auto* r = app.add_subcommand("run", "train and evaluate the full session protocol");
  r->add_option("--config", run.config, "training config (JSON)");
  r->add_option("--synth", run.synth, "synthetic spec to generate the stream from");
  r->add_option("--stream", run.stream, "directory written by `pki synth`");
  r->add_option("--mode", run.modes, "pki, pkiv1, pkiv2 (comma list allowed)")->delimiter(',');
  r->add_option("--k", run.ks, "PKIV-2 group size(s); T for one group over all sessions")->delimiter(',');
  r->add_option("--alpha", run.alpha, "influence factor in (0, 1]");
  r->add_option("--seed", run.seed, "training seed");
  r->add_option("--seeds", run.seeds, "comma list of training seeds")->delimiter(',');
  r->add_option("--init", run.init, "random or previous");
  r->add_option("--iters", run.iters, "iterations per incremental session");
  r->add_option("--out", run.out, std::string("output root (default $") + kOutRootEnv + " or ./pki_runs)");
  r->add_option("--format", run.format, "summary format: csv or md");
  r->add_flag("--overwrite", run.overwrite, "replace existing results");

  ReportArgs rep;
  auto* p = app.add_subcommand("report", "merge result directories into one table");
  p->add_option("dirs", rep.dirs, "result directories, one table row each")->required();
  p->add_option("--format", rep.format, "csv or md");
  p->add_option("--reference", rep.reference, "row to measure the improvement column against");
  p->add_option("--out", rep.out, "also write the table here");
  p->add_flag("--overwrite", rep.overwrite, "replace an existing --out file");

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of the incremental objective");
  g->set_help_flag("--help", "print this help");
  g->add_option("--d", gc.opt.d, "feature dimension");
  g->add_option("--h", gc.opt.h, "hidden width");
  g->add_option("--p", gc.opt.p, "embedding dimension");
  g->add_option("--classes", gc.opt.classes, "total classes C");
  g->add_option("--new-classes", gc.opt.new_classes, "classes introduced by the session");
  g->add_option("--session", gc.opt.session, "frozen projectors before the current one");
  g->add_option("--mode", gc.mode, "pki, pkiv1 or pkiv2");
  g->add_option("--k", gc.opt.ensemble.k, "PKIV-2 group size");
  g->add_option("--alpha", gc.opt.ensemble.alpha, "influence factor");
  g->add_option("--reduction", gc.reduction, "sum or mean");
  g->add_option("--seed", gc.opt.seed, "first seed");
  g->add_option("--seeds", gc.seeds, "number of consecutive seeds");
  g->add_option("--tol", gc.opt.tolerance, "max relative error allowed");
  g->add_option("--step", gc.opt.step, "finite-difference step");

  std::vector<std::string> argv_store{"pki"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (r->parsed()) return cmd_run(run, out);
    if (p->parsed()) return cmd_report(rep, out);
    if (g->parsed()) return cmd_gradcheck(gc, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace pki::cli
