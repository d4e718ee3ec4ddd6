#include "hemocnn/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "hemocnn/errors.hpp"

namespace hemocnn {

ReportFormat parse_report_format(const std::string& name) {
    if (name == "markdown" || name == "md") return ReportFormat::Markdown;
    if (name == "csv") return ReportFormat::Csv;
    if (name == "json") return ReportFormat::Json;
    throw ConfigError("unknown report format '" + name + "' (expected markdown, csv or json)");
}

double report_round(double v) { return std::round(v * 1e4) / 1e4; }

namespace {

std::string rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", report_round(v));
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

constexpr const char* kDefinitions =
    "Per-class accuracy is one-vs-rest (tp+tn)/total; overall accuracy is trace/total; "
    "0/0 rates are reported as 0.";

std::string render_markdown(const ConfusionMatrix& cm, const std::vector<ClassMetrics>& metrics,
                            const ReportContext& ctx) {
    std::ostringstream out;
    const auto& names = cm.class_names();
    out << "## Confusion matrix (rows: truth, columns: predicted)\n\n| Class |";
    for (const auto& n : names) out << ' ' << n << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < cm.k(); ++i) out << "---:|";
    out << '\n';
    for (std::size_t t = 0; t < cm.k(); ++t) {
        out << "| " << names[t] << " |";
        for (std::size_t p = 0; p < cm.k(); ++p) out << ' ' << cm(t, p) << " |";
        out << '\n';
    }

    out << "\n## Per-class results\n\n"
        << "| Type | Truth | Classified | Accuracy | Precision | Recall | F-measure |\n"
        << "|---|---:|---:|---:|---:|---:|---:|\n";
    for (std::size_t c = 0; c < cm.k(); ++c) {
        const auto& m = metrics[c];
        out << "| " << names[c] << " | " << cm.row_total(c) << " | " << cm.column_total(c) << " | " << rate(m.accuracy)
            << " | " << rate(m.precision) << " | " << rate(m.recall) << " | " << rate(m.f_measure) << " |\n";
    }

    const auto macro = macro_average(metrics);
    const auto micro = micro_average(metrics);
    out << "\nOverall accuracy: " << rate(overall_accuracy(cm)) << " (" << cm.trace() << "/" << cm.total() << ")\n"
        << "Macro average: accuracy " << rate(macro.accuracy) << ", precision " << rate(macro.precision) << ", recall "
        << rate(macro.recall) << ", F-measure " << rate(macro.f_measure) << '\n'
        << "Micro average: precision " << rate(micro.precision) << ", recall " << rate(micro.recall)
        << ", F-measure " << rate(micro.f_measure) << '\n'
        << "\n" << kDefinitions << '\n';
    for (const auto& [k, v] : ctx.notes) out << k << ": " << v << '\n';
    return out.str();
}

std::string render_csv(const ConfusionMatrix& cm, const std::vector<ClassMetrics>& metrics, const ReportContext& ctx) {
    std::ostringstream out;
    const auto& names = cm.class_names();
    out << "truth\\predicted";
    for (const auto& n : names) out << ',' << csv_field(n);
    out << '\n';
    for (std::size_t t = 0; t < cm.k(); ++t) {
        out << csv_field(names[t]);
        for (std::size_t p = 0; p < cm.k(); ++p) out << ',' << cm(t, p);
        out << '\n';
    }
    out << "\ntype,truth,classified,tp,fp,fn,tn,accuracy,precision,recall,f_measure\n";
    for (std::size_t c = 0; c < cm.k(); ++c) {
        const auto& m = metrics[c];
        out << csv_field(names[c]) << ',' << cm.row_total(c) << ',' << cm.column_total(c) << ',' << m.tp << ','
            << m.fp << ',' << m.fn << ',' << m.tn << ',' << rate(m.accuracy) << ',' << rate(m.precision) << ','
            << rate(m.recall) << ',' << rate(m.f_measure) << '\n';
    }
    const auto macro = macro_average(metrics);
    const auto micro = micro_average(metrics);
    out << "\nmetric,value\n"
        << "overall_accuracy," << rate(overall_accuracy(cm)) << '\n'
        << "correct," << cm.trace() << '\n'
        << "total," << cm.total() << '\n'
        << "macro_accuracy," << rate(macro.accuracy) << '\n'
        << "macro_precision," << rate(macro.precision) << '\n'
        << "macro_recall," << rate(macro.recall) << '\n'
        << "macro_f_measure," << rate(macro.f_measure) << '\n'
        << "micro_precision," << rate(micro.precision) << '\n'
        << "micro_recall," << rate(micro.recall) << '\n'
        << "micro_f_measure," << rate(micro.f_measure) << '\n';
    for (const auto& [k, v] : ctx.notes) out << csv_field(k) << ',' << csv_field(v) << '\n';
    return out.str();
}

nlohmann::json averaged_json(const AveragedMetrics& a) {
    return {{"accuracy", report_round(a.accuracy)},
            {"precision", report_round(a.precision)},
            {"recall", report_round(a.recall)},
            {"f_measure", report_round(a.f_measure)}};
}

std::string render_json(const ConfusionMatrix& cm, const std::vector<ClassMetrics>& metrics, const ReportContext& ctx) {
    nlohmann::json j;
    j["class_names"] = cm.class_names();
    auto rows = nlohmann::json::array();
    for (std::size_t t = 0; t < cm.k(); ++t) {
        auto row = nlohmann::json::array();
        for (std::size_t p = 0; p < cm.k(); ++p) row.push_back(cm(t, p));
        rows.push_back(row);
    }
    j["confusion"] = rows;
    auto per = nlohmann::json::array();
    for (std::size_t c = 0; c < cm.k(); ++c) {
        const auto& m = metrics[c];
        per.push_back({{"type", cm.class_names()[c]},
                       {"truth", cm.row_total(c)},
                       {"classified", cm.column_total(c)},
                       {"tp", m.tp},
                       {"fp", m.fp},
                       {"fn", m.fn},
                       {"tn", m.tn},
                       {"accuracy", report_round(m.accuracy)},
                       {"precision", report_round(m.precision)},
                       {"recall", report_round(m.recall)},
                       {"f_measure", report_round(m.f_measure)}});
    }
    j["per_class"] = per;
    j["total"] = cm.total();
    j["correct"] = cm.trace();
    j["overall_accuracy"] = report_round(overall_accuracy(cm));
    j["macro"] = averaged_json(macro_average(metrics));
    j["micro"] = averaged_json(micro_average(metrics));
    j["notes"] = nlohmann::json::object();
    j["notes"]["definitions"] = kDefinitions;
    for (const auto& [k, v] : ctx.notes) j["notes"][k] = v;
    return j.dump(2) + "\n";
}

}  // namespace

std::string render_report(const ConfusionMatrix& cm, const std::vector<ClassMetrics>& metrics, ReportFormat format,
                          const ReportContext& context) {
    if (metrics.size() != cm.k()) throw Error("render_report: metrics do not match the confusion matrix");
    switch (format) {
        case ReportFormat::Markdown: return render_markdown(cm, metrics, context);
        case ReportFormat::Csv: return render_csv(cm, metrics, context);
        case ReportFormat::Json: return render_json(cm, metrics, context);
    }
    throw ConfigError("unknown report format");
}

}  // namespace hemocnn
