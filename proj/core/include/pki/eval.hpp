#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pki/data.hpp"
#include "pki/trainer.hpp"

namespace pki {

// Accuracy of a model over the cumulative test sets of sessions 0..t.
struct SessionEvaluation {
  double joint = 0.0;
  std::vector<double> per_origin;         // accuracy on classes introduced in session i
  std::vector<std::size_t> origin_counts;  // test examples per origin session
};

// Per-session joint accuracy plus a lower-triangular origin breakdown:
// per_origin[s][i] is the accuracy after session s on classes from session i.
struct AccuracyMatrix {
  std::vector<double> per_session;
  std::vector<std::vector<double>> per_origin;

  std::size_t sessions() const { return per_session.size(); }
  void append(const SessionEvaluation& e);
  bool operator==(const AccuracyMatrix&) const = default;
};

// Fraction of examples in the concatenated test sets whose argmax logit
// (lowest id on ties) is the true class. Throws InvalidArgument if a test
// label has no classifier row.
double evaluate_joint(const ModelState& state, const std::vector<const FeatureDataset*>& test_sets);

// Joint accuracy plus the per-origin split, test_sets[i] being session i's.
SessionEvaluation evaluate_session(const ModelState& state,
                                   const std::vector<const FeatureDataset*>& test_sets);

// Arithmetic mean; throws InvalidArgument on an empty list.
double average_accuracy(const std::vector<double>& per_session);

// Accuracy of classifying each test feature to the nearest stored class
// mean (Euclidean), over the given test sets.
double nearest_class_mean_accuracy(const ClassMeanMemory& memory,
                                   const std::vector<const FeatureDataset*>& test_sets);

struct ReportRow {
  std::string name;
  std::vector<double> values;  // per-session accuracy in percent
};

struct Report {
  std::vector<ReportRow> rows;
  // Row whose average the "improvement" column is measured against:
  // improvement = reference average - row average, "-" on the reference row.
  std::optional<std::string> reference;

  void add(std::string name, const AccuracyMatrix& acc);
};

enum class TableFormat { kCsv, kMarkdown };

TableFormat parse_table_format(const std::string& s);

// Columns: method, s0..sT, avg[, improvement]. Values to two decimals,
// rounding half to even.
std::string emit_table(const Report& report, TableFormat format);

std::string format_percent(double value);

}  // namespace pki
