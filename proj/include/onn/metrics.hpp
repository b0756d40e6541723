#pragma once

// Normalization into [-1, 1], the SNR regression metric, and pixelwise
// segmentation metrics (CE, precision, recall, F1) with mask thresholding.

#include <cmath>
#include <limits>
#include <sstream>

#include "onn/errors.hpp"
#include "onn/map2d.hpp"

namespace onn {

// p' = 2 (p - min) / (max - min) - 1. Min/max come from the container's
// declared range (e.g. 0..255 for 8-bit images), not per-image extremes.
inline Map2D normalize(const Map2D& image, double min_v, double max_v) {
    if (!(max_v > min_v)) {
        std::ostringstream os;
        os << "normalize: need max > min, got [" << min_v << ", " << max_v << "]";
        throw InputError(os.str());
    }
    Map2D out = image;
    const double scale = 2.0 / (max_v - min_v);
    for (double& v : out.data)
        v = (v - min_v) * scale - 1.0;
    return out;
}

// Population variance with mean removal.
inline double variance(const Map2D& m) {
    double mean = 0.0;
    for (double v : m.data)
        mean += v;
    mean /= m.size();
    double acc = 0.0;
    for (double v : m.data) {
        const double d = v - mean;
        acc += d * d;
    }
    return acc / m.size();
}

inline double mean_square(const Map2D& m) {
    double acc = 0.0;
    for (double v : m.data)
        acc += v * v;
    return acc / m.size();
}

// 10*log10(signal power / noise power) where signal is the target, noise is
// target - output, and power is the (mean-removed) variance. Zero noise power
// reports the +infinity sentinel. The mean-square power alternative is
// available behind the flag.
inline double snr_db(const Map2D& target, const Map2D& output, bool power_as_mean_square = false) {
    if (!target.same_dims(output)) {
        std::ostringstream os;
        os << "snr_db dims mismatch: " << target.rows << "x" << target.cols << " vs "
           << output.rows << "x" << output.cols;
        throw DimensionError(os.str());
    }
    Map2D noise(target.rows, target.cols);
    for (int i = 0; i < noise.size(); ++i)
        noise.data[i] = target.data[i] - output.data[i];
    const double signal_power = power_as_mean_square ? mean_square(target) : variance(target);
    const double noise_power = power_as_mean_square ? mean_square(noise) : variance(noise);
    if (!(signal_power > 0.0))
        throw InputError("snr_db: zero signal power");
    if (noise_power == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal_power / noise_power);
}

struct MetricReport {
    double mse = 0.0;
    double snr_db = 0.0;
    bool has_segmentation = false;
    double accuracy = 0.0;
    double ce = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_defined = true; // false when no pixel was predicted positive
    bool recall_defined = true;    // false when the truth has no positive pixel
};

// Pixelwise confusion against a strictly binary {-1, +1} truth mask; the
// prediction is output >= threshold. An undefined precision or recall (zero
// denominator) reports 0 with its flag cleared.
inline MetricReport segmentation_metrics(const Map2D& output, const Map2D& truth_mask,
                                         double threshold) {
    if (!output.same_dims(truth_mask)) {
        std::ostringstream os;
        os << "segmentation_metrics dims mismatch: " << output.rows << "x" << output.cols
           << " vs " << truth_mask.rows << "x" << truth_mask.cols;
        throw DimensionError(os.str());
    }
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (int i = 0; i < output.size(); ++i) {
        const double tv = truth_mask.data[i];
        if (tv != 1.0 && tv != -1.0) {
            std::ostringstream os;
            os << "segmentation_metrics: truth mask must be strictly {-1, +1}, found " << tv;
            throw InputError(os.str());
        }
        const bool pred = output.data[i] >= threshold;
        const bool real = tv == 1.0;
        if (pred && real)
            ++tp;
        else if (pred && !real)
            ++fp;
        else if (!pred && real)
            ++fn;
        else
            ++tn;
    }
    MetricReport r;
    r.has_segmentation = true;
    const long total = tp + fp + fn + tn;
    r.accuracy = static_cast<double>(tp + tn) / total;
    r.ce = 1.0 - r.accuracy;
    r.precision_defined = (tp + fp) > 0;
    r.recall_defined = (tp + fn) > 0;
    r.precision = r.precision_defined ? static_cast<double>(tp) / (tp + fp) : 0.0;
    r.recall = r.recall_defined ? static_cast<double>(tp) / (tp + fn) : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

} // namespace onn
