#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace hyperscore::detail {

inline constexpr float kLayerNormEps = 1e-6f;

/// Inner product with eight independent partial sums. The reduction order is
/// fixed, so every caller (single-row, batch, flat baseline) gets identical
/// bits for identical inputs.
inline float dot(const float* a, const float* b, std::size_t n) noexcept {
    float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
    }
    float tail = 0.0f;
    for (; i < n; ++i) tail += a[i] * b[i];
    return (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) +
           tail;
}

inline float dot(std::span<const float> a, std::span<const float> b) noexcept {
    return dot(a.data(), b.data(), std::min(a.size(), b.size()));
}

inline void relu_inplace(std::span<float> x) noexcept {
    for (float& v : x) v = v > 0.0f ? v : 0.0f;
}

/// Normalizes over all features without affine terms. A constant input (zero
/// variance) maps to the zero vector.
inline void layer_norm_inplace(std::span<float> x, float eps = kLayerNormEps) noexcept {
    if (x.empty()) return;
    const float first = x[0];
    if (std::all_of(x.begin(), x.end(), [first](float v) { return v == first; })) {
        std::fill(x.begin(), x.end(), 0.0f);
        return;
    }
    const float n = static_cast<float>(x.size());
    float mean = 0.0f;
    for (float v : x) mean += v;
    mean /= n;
    float var = 0.0f;
    for (float v : x) var += (v - mean) * (v - mean);
    var /= n;
    const float inv = 1.0f / std::sqrt(var + eps);
    for (float& v : x) v = (v - mean) * inv;
}

/// Max-subtracted softmax.
inline void softmax_inplace(std::span<float> x) noexcept {
    if (x.empty()) return;
    const float top = *std::max_element(x.begin(), x.end());
    float sum = 0.0f;
    for (float& v : x) {
        v = std::exp(v - top);
        sum += v;
    }
    for (float& v : x) v /= sum;
}

} // namespace hyperscore::detail
