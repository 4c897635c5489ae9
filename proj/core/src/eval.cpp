#include "pki/eval.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdio>
#include <limits>

#include "pki/errors.hpp"

namespace pki {

void AccuracyMatrix::append(const SessionEvaluation& e) {
  per_session.push_back(e.joint);
  per_origin.push_back(e.per_origin);
}

SessionEvaluation evaluate_session(const ModelState& state,
                                   const std::vector<const FeatureDataset*>& test_sets) {
  SessionEvaluation out;
  std::vector<std::size_t> correct(test_sets.size(), 0);
  out.origin_counts.assign(test_sets.size(), 0);
  const std::size_t num_classes = state.classifier.num_classes();
  std::size_t total = 0, total_correct = 0;
  for (std::size_t s = 0; s < test_sets.size(); ++s) {
    const FeatureDataset& ds = *test_sets[s];
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] >= num_classes) {
        throw InvalidArgument("evaluate: test label " + std::to_string(ds.labels[i]) +
                              " is not a seen class (" + std::to_string(num_classes) + " known)");
      }
      if (predict(state, ds.features[i]) == ds.labels[i]) ++correct[s];
    }
    out.origin_counts[s] = ds.size();
    total += ds.size();
    total_correct += correct[s];
  }
  if (total == 0) throw InvalidArgument("evaluate: no test examples");
  out.joint = static_cast<double>(total_correct) / static_cast<double>(total);
  out.per_origin.resize(test_sets.size());
  for (std::size_t s = 0; s < test_sets.size(); ++s) {
    out.per_origin[s] = out.origin_counts[s] == 0 ? 0.0
                                                  : static_cast<double>(correct[s]) /
                                                        static_cast<double>(out.origin_counts[s]);
  }
  return out;
}

double evaluate_joint(const ModelState& state, const std::vector<const FeatureDataset*>& test_sets) {
  return evaluate_session(state, test_sets).joint;
}

double average_accuracy(const std::vector<double>& per_session) {
  if (per_session.empty()) throw InvalidArgument("average_accuracy: empty list");
  double sum = 0.0;
  for (double x : per_session) sum += x;
  return sum / static_cast<double>(per_session.size());
}

double nearest_class_mean_accuracy(const ClassMeanMemory& memory,
                                   const std::vector<const FeatureDataset*>& test_sets) {
  if (memory.empty()) throw InvalidArgument("nearest_class_mean_accuracy: memory is empty");
  std::size_t total = 0, correct = 0;
  for (const auto* ds : test_sets) {
    for (std::size_t i = 0; i < ds->size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      ClassId best_c = 0;
      for (const auto& [c, entry] : memory.entries()) {
        double dist = 0.0;
        for (std::size_t j = 0; j < entry.mean.size(); ++j) {
          const double diff = ds->features[i][j] - entry.mean[j];
          dist += diff * diff;
        }
        if (dist < best) {
          best = dist;
          best_c = c;
        }
      }
      correct += best_c == ds->labels[i];
      ++total;
    }
  }
  if (total == 0) throw InvalidArgument("nearest_class_mean_accuracy: no test examples");
  return static_cast<double>(correct) / static_cast<double>(total);
}

void Report::add(std::string name, const AccuracyMatrix& acc) {
  ReportRow row{std::move(name), {}};
  for (double a : acc.per_session) row.values.push_back(100.0 * a);
  rows.push_back(std::move(row));
}

TableFormat parse_table_format(const std::string& s) {
  if (s == "csv") return TableFormat::kCsv;
  if (s == "md" || s == "markdown") return TableFormat::kMarkdown;
  throw InvalidArgument("unknown table format '" + s + "' (expected csv or md)");
}

std::string format_percent(double value) {
  // nearbyint honours the default round-to-nearest-even mode.
  const double cents = std::nearbyint(value * 100.0);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", cents / 100.0);
  return buf;
}

std::string emit_table(const Report& report, TableFormat format) {
  std::size_t sessions = 0;
  for (const auto& row : report.rows) sessions = std::max(sessions, row.values.size());

  std::optional<double> reference_avg;
  if (report.reference) {
    auto it = std::find_if(report.rows.begin(), report.rows.end(),
                           [&](const ReportRow& r) { return r.name == *report.reference; });
    if (it == report.rows.end()) {
      throw InvalidArgument("emit_table: reference row '" + *report.reference + "' not found");
    }
    reference_avg = average_accuracy(it->values);
  }

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"method"};
  for (std::size_t s = 0; s < sessions; ++s) header.push_back("s" + std::to_string(s));
  header.push_back("avg");
  if (reference_avg) header.push_back("improvement");
  cells.push_back(header);

  for (const auto& row : report.rows) {
    std::vector<std::string> line{row.name};
    for (std::size_t s = 0; s < sessions; ++s) {
      line.push_back(s < row.values.size() ? format_percent(row.values[s]) : "");
    }
    const double avg = average_accuracy(row.values);
    line.push_back(format_percent(avg));
    if (reference_avg) {
      if (row.name == *report.reference) {
        line.push_back("-");
      } else {
        const double diff = *reference_avg - avg;
        line.push_back((diff >= 0 ? "+" : "") + format_percent(diff));
      }
    }
    cells.push_back(std::move(line));
  }

  std::string out;
  if (format == TableFormat::kCsv) {
    for (const auto& line : cells) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (i) out += ',';
        out += line[i];
      }
      out += '\n';
    }
    return out;
  }
  auto md_line = [&](const std::vector<std::string>& line) {
    out += '|';
    for (const auto& c : line) out += ' ' + c + " |";
    out += '\n';
  };
  md_line(cells.front());
  out += '|';
  for (std::size_t i = 0; i < cells.front().size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += '\n';
  for (std::size_t r = 1; r < cells.size(); ++r) md_line(cells[r]);
  return out;
}

}  // namespace pki
