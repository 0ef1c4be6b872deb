#pragma once

#include <vector>

namespace lesiongen::metrics {

// K x K count matrix, rows = ground truth, columns = prediction.
struct ConfusionMatrix {
    int k = 0;
    std::vector<int64_t> counts;

    explicit ConfusionMatrix(int classes = 0)
        : k(classes), counts(static_cast<size_t>(classes) * classes, 0) {}

    int64_t& at(int truth, int pred) { return counts[static_cast<size_t>(truth) * k + pred]; }
    int64_t at(int truth, int pred) const { return counts[static_cast<size_t>(truth) * k + pred]; }
    int64_t total() const;
    int64_t tp(int c) const;
    int64_t fn(int c) const;
    int64_t fp(int c) const;
    int64_t tn(int c) const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& truth,
                                 int k);

// Accuracy plus macro-averaged one-vs-rest sensitivity/precision/F1 with the
// 0/0 -> 0 convention per class.
struct ClassificationReport {
    double accuracy = 0.0;
    double macro_sensitivity = 0.0;
    double macro_precision = 0.0;
    double macro_f1 = 0.0;
    std::vector<double> sensitivity;  // per class
    std::vector<double> precision;
    std::vector<double> f1;
};

ClassificationReport classification_report(const ConfusionMatrix& cm);

}  // namespace lesiongen::metrics
