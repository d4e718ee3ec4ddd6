#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hemocnn {

/// K x K counts; rows are the true class, columns the predicted class.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t k, std::vector<std::string> class_names = {});
    ConfusionMatrix(std::vector<std::vector<std::uint64_t>> counts, std::vector<std::string> class_names = {});

    std::size_t k() const noexcept { return k_; }
    const std::vector<std::string>& class_names() const noexcept { return names_; }

    std::uint64_t operator()(std::size_t truth, std::size_t predicted) const { return counts_[truth * k_ + predicted]; }
    void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1);

    std::uint64_t total() const;
    std::uint64_t trace() const;
    std::uint64_t row_total(std::size_t truth) const;
    std::uint64_t column_total(std::size_t predicted) const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
    std::vector<std::string> names_;
};

/// Tallies (truth, prediction) pairs. Throws Error on length mismatch and
/// LabelError on labels outside [0, k).
ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> predicted, std::size_t k,
                          std::vector<std::string> class_names = {});

/// One-vs-rest counts and rates for one class. 0/0 is reported as 0.
struct ClassMetrics {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double accuracy = 0;   // (tp + tn) / total
    double precision = 0;  // tp / (tp + fp)
    double recall = 0;     // tp / (tp + fn)
    double f_measure = 0;  // 2pr / (p + r)
};

std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm);

/// trace / total. Throws Error for an empty matrix.
double overall_accuracy(const ConfusionMatrix& cm);

struct AveragedMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f_measure = 0;
};

/// Unweighted mean over classes.
AveragedMetrics macro_average(const std::vector<ClassMetrics>& metrics);

/// Rates from pooled counts; for single-label data precision = recall = accuracy.
AveragedMetrics micro_average(const std::vector<ClassMetrics>& metrics);

}  // namespace hemocnn
