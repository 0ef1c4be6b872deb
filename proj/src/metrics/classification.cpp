#include "lesiongen/metrics/classification.hpp"

#include <numeric>

#include "lesiongen/core/error.hpp"

namespace lesiongen::metrics {

int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), int64_t{0});
}

int64_t ConfusionMatrix::tp(int c) const { return at(c, c); }

int64_t ConfusionMatrix::fn(int c) const {
    int64_t s = 0;
    for (int p = 0; p < k; ++p)
        if (p != c) s += at(c, p);
    return s;
}

int64_t ConfusionMatrix::fp(int c) const {
    int64_t s = 0;
    for (int t = 0; t < k; ++t)
        if (t != c) s += at(t, c);
    return s;
}

int64_t ConfusionMatrix::tn(int c) const { return total() - tp(c) - fn(c) - fp(c); }

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& truth,
                                 int k) {
    if (preds.size() != truth.size()) throw ArgumentError("confusion_matrix: length mismatch");
    if (k < 1) throw ArgumentError("confusion_matrix: k must be >= 1");
    ConfusionMatrix cm(k);
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= k || truth[i] < 0 || truth[i] >= k)
            throw ArgumentError("confusion_matrix: label out of range at index " +
                                std::to_string(i));
        ++cm.at(truth[i], preds[i]);
    }
    return cm;
}

ClassificationReport classification_report(const ConfusionMatrix& cm) {
    if (cm.k < 1 || cm.total() == 0) throw ArgumentError("classification_report: empty matrix");
    ClassificationReport r;
    int64_t diag = 0;
    for (int c = 0; c < cm.k; ++c) diag += cm.tp(c);
    r.accuracy = static_cast<double>(diag) / static_cast<double>(cm.total());

    auto ratio = [](int64_t num, int64_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    for (int c = 0; c < cm.k; ++c) {
        const double sens = ratio(cm.tp(c), cm.tp(c) + cm.fn(c));
        const double prec = ratio(cm.tp(c), cm.tp(c) + cm.fp(c));
        const double f1 = (prec + sens) == 0.0 ? 0.0 : 2.0 * prec * sens / (prec + sens);
        r.sensitivity.push_back(sens);
        r.precision.push_back(prec);
        r.f1.push_back(f1);
        r.macro_sensitivity += sens / cm.k;
        r.macro_precision += prec / cm.k;
        r.macro_f1 += f1 / cm.k;
    }
    return r;
}

}  // namespace lesiongen::metrics
