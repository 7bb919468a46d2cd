#pragma once

#include "flowae/matrix.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace flowae {

struct ClassScore {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    /// Set when the denominator was zero and the metric was reported as 0.
    bool precision_undefined = false;
    bool recall_undefined = false;
};

struct Misclassified {
    std::string name;
    std::size_t errors = 0;
};

struct ClassificationReport {
    std::vector<std::string> class_names;
    std::size_t n = 0;
    double accuracy = 0.0;
    std::vector<ClassScore> classes;
    /// Averages over classes with non-zero support.
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    /// Rows scaled by true-class support; NaN rows for zero support.
    Matrix confusion_normalized;
    std::size_t total_misclassifications = 0;
    std::vector<Misclassified> top_misclassified;
    std::vector<std::string> notes;
};

ClassificationReport score(std::span<const int> y_true, std::span<const int> y_pred,
                           const std::vector<std::string>& class_names);

/// Classes with at least one error, by (support - true positives) descending, ties by name.
std::vector<Misclassified> misclassification_ranking(const ClassificationReport& report);

struct ComparisonReport {
    ClassificationReport original;
    ClassificationReport compressed;
    double delta_accuracy = 0.0;
    double delta_macro_f1 = 0.0;
    double delta_weighted_f1 = 0.0;
    /// compressed / original misclassifications; NaN when the original made none.
    double misclassification_ratio = 0.0;
};

ComparisonReport compare(const ClassificationReport& original, const ClassificationReport& compressed);

std::string classification_to_json(const ClassificationReport& report);
std::string comparison_to_json(const ComparisonReport& report);
/// Per-class precision/recall/F1/support table plus averages.
std::string classification_text(const ClassificationReport& report);
/// Side-by-side accuracy/F1 table and top-5 misclassified classes.
std::string comparison_text(const ComparisonReport& report);
std::string confusion_csv(const ClassificationReport& report, bool normalized);

}  // namespace flowae
