#pragma once

#include <string>
#include <vector>

#include "hemocnn/metrics.hpp"

namespace hemocnn {

enum class ReportFormat { Markdown, Csv, Json };

/// "markdown" | "csv" | "json"; throws ConfigError otherwise.
ReportFormat parse_report_format(const std::string& name);

/// Free-text provenance lines printed with the report (which split was
/// evaluated, which loss picked the checkpoint, ...).
struct ReportContext {
    std::vector<std::pair<std::string, std::string>> notes;
};

/// Confusion matrix block, a per-class table (Type, Truth = row total,
/// Classified = column total, Accuracy, Precision, Recall, F-measure), and
/// overall/macro/micro footers. Rates carry 4 decimals in every format.
///
/// JSON keys: class_names, confusion (rows = truth), per_class[] {type, truth,
/// classified, tp, fp, fn, tn, accuracy, precision, recall, f_measure},
/// total, correct, overall_accuracy, macro {accuracy, precision, recall,
/// f_measure}, micro {same}, notes {key: value}.
std::string render_report(const ConfusionMatrix& cm, const std::vector<ClassMetrics>& metrics, ReportFormat format,
                          const ReportContext& context = {});

/// Rounds to the 4 decimals the report prints.
double report_round(double v);

}  // namespace hemocnn
