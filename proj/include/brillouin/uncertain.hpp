#pragma once

#include <cmath>

namespace brillouin {

// A central value with a one-standard-deviation uncertainty. Arithmetic
// helpers assume uncorrelated operands (first-order propagation).
struct Uncertain {
    double value = 0.0;
    double sigma = 0.0;

    double relative() const { return value != 0.0 ? sigma / std::abs(value) : 0.0; }
};

inline Uncertain operator*(Uncertain a, Uncertain b) {
    const double v = a.value * b.value;
    return {v, std::hypot(a.sigma * b.value, b.sigma * a.value)};
}

inline Uncertain operator/(Uncertain a, Uncertain b) {
    const double v = a.value / b.value;
    return {v, std::hypot(a.sigma / b.value, v * b.sigma / b.value)};
}

inline Uncertain operator*(Uncertain a, double k) { return {a.value * k, a.sigma * std::abs(k)}; }
inline Uncertain operator*(double k, Uncertain a) { return a * k; }

inline Uncertain operator+(Uncertain a, Uncertain b) {
    return {a.value + b.value, std::hypot(a.sigma, b.sigma)};
}

inline Uncertain operator-(Uncertain a, Uncertain b) {
    return {a.value - b.value, std::hypot(a.sigma, b.sigma)};
}

}  // namespace brillouin
