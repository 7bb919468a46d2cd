#include "flowae/classify_eval.hpp"

#include "flowae/error.hpp"
#include "flowae/io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace flowae {
namespace {

constexpr std::size_t kTopMisclassified = 5;

nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

std::string fixed(double v, int digits = 6) {
    if (!std::isfinite(v)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

}  // namespace

ClassificationReport score(std::span<const int> y_true, std::span<const int> y_pred,
                           const std::vector<std::string>& class_names) {
    if (y_true.size() != y_pred.size()) throw DataError("score: y_true and y_pred lengths differ");
    const std::size_t k = class_names.size();
    ClassificationReport rep;
    rep.class_names = class_names;
    rep.n = y_true.size();
    rep.confusion.assign(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const auto t = static_cast<std::size_t>(y_true[i]);
        const auto p = static_cast<std::size_t>(y_pred[i]);
        if (y_true[i] < 0 || y_pred[i] < 0 || t >= k || p >= k) throw DataError("score: class id out of range");
        ++rep.confusion[t][p];
    }

    std::size_t trace = 0;
    std::vector<std::size_t> predicted(k, 0);
    for (std::size_t t = 0; t < k; ++t) {
        trace += rep.confusion[t][t];
        for (std::size_t p = 0; p < k; ++p) predicted[p] += rep.confusion[t][p];
    }
    rep.accuracy = rep.n ? static_cast<double>(trace) / static_cast<double>(rep.n) : 0.0;
    rep.total_misclassifications = rep.n - trace;

    rep.confusion_normalized = Matrix(k, k, std::numeric_limits<double>::quiet_NaN());
    std::size_t supported = 0;
    for (std::size_t c = 0; c < k; ++c) {
        ClassScore s;
        s.name = class_names[c];
        const std::size_t tp = rep.confusion[c][c];
        for (std::size_t p = 0; p < k; ++p) s.support += rep.confusion[c][p];
        if (predicted[c]) s.precision = static_cast<double>(tp) / static_cast<double>(predicted[c]);
        else s.precision_undefined = true;
        if (s.support) s.recall = static_cast<double>(tp) / static_cast<double>(s.support);
        else s.recall_undefined = true;
        if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);

        if (s.support) {
            ++supported;
            for (std::size_t p = 0; p < k; ++p) {
                rep.confusion_normalized(c, p) = static_cast<double>(rep.confusion[c][p]) / static_cast<double>(s.support);
            }
            rep.macro_precision += s.precision;
            rep.macro_recall += s.recall;
            rep.macro_f1 += s.f1;
            const double w = static_cast<double>(s.support);
            rep.weighted_precision += w * s.precision;
            rep.weighted_recall += w * s.recall;
            rep.weighted_f1 += w * s.f1;
        } else {
            rep.notes.push_back("class '" + s.name + "' has no test support; excluded from averages");
        }
        if (s.precision_undefined && s.support) {
            rep.notes.push_back("class '" + s.name + "' was never predicted; precision reported as 0");
        }
        rep.classes.push_back(std::move(s));
    }
    if (supported) {
        const double ks = static_cast<double>(supported);
        rep.macro_precision /= ks;
        rep.macro_recall /= ks;
        rep.macro_f1 /= ks;
    }
    if (rep.n) {
        const double n = static_cast<double>(rep.n);
        rep.weighted_precision /= n;
        rep.weighted_recall /= n;
        rep.weighted_f1 /= n;
    }
    rep.top_misclassified = misclassification_ranking(rep);
    return rep;
}

std::vector<Misclassified> misclassification_ranking(const ClassificationReport& report) {
    std::vector<Misclassified> out;
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
        const std::size_t errors = report.classes[c].support - report.confusion[c][c];
        if (errors) out.push_back({report.classes[c].name, errors});
    }
    std::sort(out.begin(), out.end(), [](const Misclassified& a, const Misclassified& b) {
        if (a.errors != b.errors) return a.errors > b.errors;
        return a.name < b.name;
    });
    return out;
}

ComparisonReport compare(const ClassificationReport& original, const ClassificationReport& compressed) {
    if (original.class_names != compressed.class_names) throw DataError("compare: reports have different class sets");
    ComparisonReport c;
    c.original = original;
    c.compressed = compressed;
    c.delta_accuracy = compressed.accuracy - original.accuracy;
    c.delta_macro_f1 = compressed.macro_f1 - original.macro_f1;
    c.delta_weighted_f1 = compressed.weighted_f1 - original.weighted_f1;
    if (original.total_misclassifications) {
        c.misclassification_ratio = static_cast<double>(compressed.total_misclassifications) /
                                    static_cast<double>(original.total_misclassifications);
    } else {
        c.misclassification_ratio = compressed.total_misclassifications ? std::numeric_limits<double>::quiet_NaN() : 1.0;
    }
    return c;
}

namespace {

nlohmann::json classification_json(const ClassificationReport& r) {
    nlohmann::json j;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["macro_avg"] = {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}};
    j["weighted_avg"] = {{"precision", r.weighted_precision}, {"recall", r.weighted_recall}, {"f1", r.weighted_f1}};
    auto classes = nlohmann::json::array();
    for (const auto& s : r.classes) {
        classes.push_back({{"class", s.name},
                           {"precision", s.precision},
                           {"recall", s.recall},
                           {"f1", s.f1},
                           {"support", s.support},
                           {"precision_undefined", s.precision_undefined},
                           {"recall_undefined", s.recall_undefined}});
    }
    j["classes"] = classes;
    j["class_names"] = r.class_names;
    j["confusion"] = r.confusion;
    auto norm = nlohmann::json::array();
    for (std::size_t i = 0; i < r.confusion_normalized.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (double v : r.confusion_normalized.row(i)) row.push_back(number_or_null(v));
        norm.push_back(row);
    }
    j["confusion_normalized"] = norm;
    j["total_misclassifications"] = r.total_misclassifications;
    auto top = nlohmann::json::array();
    for (const auto& m : r.top_misclassified) top.push_back({{"class", m.name}, {"errors", m.errors}});
    j["misclassified_ranking"] = top;
    j["notes"] = r.notes;
    return j;
}

}  // namespace

std::string classification_to_json(const ClassificationReport& report) {
    return classification_json(report).dump(2) + "\n";
}

std::string comparison_to_json(const ComparisonReport& report) {
    nlohmann::json j;
    j["original"] = classification_json(report.original);
    j["compressed"] = classification_json(report.compressed);
    j["difference"] = {{"accuracy", report.delta_accuracy},
                       {"macro_f1", report.delta_macro_f1},
                       {"weighted_f1", report.delta_weighted_f1}};
    j["misclassification_ratio"] = number_or_null(report.misclassification_ratio);
    return j.dump(2) + "\n";
}

std::string classification_text(const ClassificationReport& r) {
    std::size_t w = 12;
    for (const auto& s : r.classes) w = std::max(w, s.name.size() + 2);
    std::string out = pad("class", w) + pad("precision", 12) + pad("recall", 12) + pad("f1", 12) + "support\n";
    for (const auto& s : r.classes) {
        out += pad(s.name, w) + pad(fixed(s.precision, 4), 12) + pad(fixed(s.recall, 4), 12) + pad(fixed(s.f1, 4), 12) +
               std::to_string(s.support) + "\n";
    }
    out += "\n" + pad("accuracy", w) + fixed(r.accuracy) + "\n";
    out += pad("macro avg", w) + pad(fixed(r.macro_precision, 4), 12) + pad(fixed(r.macro_recall, 4), 12) +
           fixed(r.macro_f1, 4) + "\n";
    out += pad("weighted avg", w) + pad(fixed(r.weighted_precision, 4), 12) + pad(fixed(r.weighted_recall, 4), 12) +
           fixed(r.weighted_f1, 4) + "\n";
    out += "total misclassifications: " + std::to_string(r.total_misclassifications) + "\n";
    return out;
}

std::string comparison_text(const ComparisonReport& c) {
    std::string out;
    out += pad("Metric", 24) + pad("Original", 14) + pad("Compressed", 14) + "Difference\n";
    auto line = [&](const char* name, double a, double b) {
        out += pad(name, 24) + pad(fixed(a), 14) + pad(fixed(b), 14) + fixed(b - a) + "\n";
    };
    line("Accuracy", c.original.accuracy, c.compressed.accuracy);
    line("Macro Avg F1-score", c.original.macro_f1, c.compressed.macro_f1);
    line("Weighted Avg F1-score", c.original.weighted_f1, c.compressed.weighted_f1);
    out += "\n";
    out += pad("Total Misclassifications", 24) + pad(std::to_string(c.original.total_misclassifications), 28) +
           std::to_string(c.compressed.total_misclassifications) + "\n";
    out += "Misclassification ratio (compressed / original): " + fixed(c.misclassification_ratio, 2) + "\n";
    out += "Top " + std::to_string(kTopMisclassified) + " Misclassified Classes:\n";
    for (std::size_t i = 0; i < kTopMisclassified; ++i) {
        auto cell = [&](const std::vector<Misclassified>& v) {
            return i < v.size() ? v[i].name + " (" + std::to_string(v[i].errors) + ")" : std::string("-");
        };
        out += pad(std::to_string(i + 1), 4) + pad(cell(c.original.top_misclassified), 34) +
               cell(c.compressed.top_misclassified) + "\n";
    }
    return out;
}

std::string confusion_csv(const ClassificationReport& report, bool normalized) {
    std::string out = "true\\predicted";
    for (const auto& n : report.class_names) out += "," + io::csv_escape(n);
    out += "\n";
    for (std::size_t t = 0; t < report.class_names.size(); ++t) {
        out += io::csv_escape(report.class_names[t]);
        for (std::size_t p = 0; p < report.class_names.size(); ++p) {
            out += ",";
            if (normalized) {
                const double v = report.confusion_normalized(t, p);
                if (std::isfinite(v)) out += io::format_double(v);
            } else {
                out += std::to_string(report.confusion[t][p]);
            }
        }
        out += "\n";
    }
    return out;
}

}  // namespace flowae
