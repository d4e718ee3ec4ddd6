#include "hemocnn/metrics.hpp"

#include <numeric>

#include "hemocnn/errors.hpp"

namespace hemocnn {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t k, std::vector<std::string> class_names)
    : k_(k), counts_(k * k, 0), names_(std::move(class_names)) {
    if (k_ == 0) throw Error("confusion matrix needs at least one class");
    if (names_.empty()) {
        for (std::size_t i = 0; i < k_; ++i) names_.push_back("class " + std::to_string(i));
    }
    if (names_.size() != k_) throw Error("confusion matrix: class name count does not match k");
}

ConfusionMatrix::ConfusionMatrix(std::vector<std::vector<std::uint64_t>> counts, std::vector<std::string> class_names)
    : ConfusionMatrix(counts.size(), std::move(class_names)) {
    for (std::size_t t = 0; t < k_; ++t) {
        if (counts[t].size() != k_) throw Error("confusion matrix rows must have k entries");
        for (std::size_t p = 0; p < k_; ++p) counts_[t * k_ + p] = counts[t][p];
    }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t n) {
    if (truth >= k_ || predicted >= k_) throw Error("confusion matrix index out of range");
    counts_[truth * k_ + predicted] += n;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < k_; ++i) t += (*this)(i, i);
    return t;
}

std::uint64_t ConfusionMatrix::row_total(std::size_t truth) const {
    std::uint64_t t = 0;
    for (std::size_t p = 0; p < k_; ++p) t += (*this)(truth, p);
    return t;
}

std::uint64_t ConfusionMatrix::column_total(std::size_t predicted) const {
    std::uint64_t t = 0;
    for (std::size_t r = 0; r < k_; ++r) t += (*this)(r, predicted);
    return t;
}

ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> predicted, std::size_t k,
                          std::vector<std::string> class_names) {
    if (truth.size() != predicted.size()) {
        throw Error("confusion: " + std::to_string(truth.size()) + " true labels vs " +
                    std::to_string(predicted.size()) + " predictions");
    }
    ConfusionMatrix cm(k, std::move(class_names));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= k || predicted[i] >= k) {
            throw LabelError("sample " + std::to_string(i) + ": label outside [0, " + std::to_string(k) + ")", i);
        }
        cm.add(truth[i], predicted[i]);
    }
    return cm;
}

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    std::vector<ClassMetrics> out(cm.k());
    for (std::size_t c = 0; c < cm.k(); ++c) {
        auto& m = out[c];
        m.tp = cm(c, c);
        m.fn = cm.row_total(c) - m.tp;
        m.fp = cm.column_total(c) - m.tp;
        m.tn = total - m.tp - m.fn - m.fp;
        m.accuracy = ratio(m.tp + m.tn, total);
        m.precision = ratio(m.tp, m.tp + m.fp);
        m.recall = ratio(m.tp, m.tp + m.fn);
        m.f_measure = harmonic(m.precision, m.recall);
    }
    return out;
}

double overall_accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw Error("overall accuracy of an empty confusion matrix");
    return ratio(cm.trace(), total);
}

AveragedMetrics macro_average(const std::vector<ClassMetrics>& metrics) {
    AveragedMetrics a;
    if (metrics.empty()) return a;
    for (const auto& m : metrics) {
        a.accuracy += m.accuracy;
        a.precision += m.precision;
        a.recall += m.recall;
        a.f_measure += m.f_measure;
    }
    const double n = static_cast<double>(metrics.size());
    a.accuracy /= n;
    a.precision /= n;
    a.recall /= n;
    a.f_measure /= n;
    return a;
}

AveragedMetrics micro_average(const std::vector<ClassMetrics>& metrics) {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& m : metrics) {
        tp += m.tp;
        fp += m.fp;
        fn += m.fn;
        tn += m.tn;
    }
    AveragedMetrics a;
    a.precision = ratio(tp, tp + fp);
    a.recall = ratio(tp, tp + fn);
    a.f_measure = harmonic(a.precision, a.recall);
    a.accuracy = ratio(tp + tn, tp + tn + fp + fn);
    return a;
}

}  // namespace hemocnn
