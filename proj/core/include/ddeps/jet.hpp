// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <complex>

namespace ddeps {

/// Truncated Taylor series c0 + c1 t + c2 t^2 + c3 t^3 in one complex variable.
/// Coefficients are normalized (c_k = f^(k)/k!).
struct Jet3 {
    using cd = std::complex<double>;
    std::array<cd, 4> c{};

    Jet3() = default;
    Jet3(cd v) : c{v, 0.0, 0.0, 0.0} {}  // NOLINT: implicit lift of constants
    Jet3(double v) : c{cd(v), 0.0, 0.0, 0.0} {}  // NOLINT
    Jet3(cd c0, cd c1, cd c2, cd c3) : c{c0, c1, c2, c3} {}

    [[nodiscard]] static Jet3 variable(cd base, cd dir) { return {base, dir, 0.0, 0.0}; }
    [[nodiscard]] bool is_constant() const { return c[1] == 0.0 && c[2] == 0.0 && c[3] == 0.0; }

    /// Scalar function composition given f(c0), f'(c0), f''(c0), f'''(c0).
    [[nodiscard]] Jet3 compose(cd f0, cd f1, cd f2, cd f3) const {
        const cd a1 = c[1], a2 = c[2], a3 = c[3];
        return {f0, f1 * a1, f1 * a2 + 0.5 * f2 * a1 * a1, f1 * a3 + f2 * a1 * a2 + f3 / 6.0 * a1 * a1 * a1};
    }
};

inline Jet3 operator+(const Jet3& a, const Jet3& b) {
    return {a.c[0] + b.c[0], a.c[1] + b.c[1], a.c[2] + b.c[2], a.c[3] + b.c[3]};
}
inline Jet3 operator-(const Jet3& a, const Jet3& b) {
    return {a.c[0] - b.c[0], a.c[1] - b.c[1], a.c[2] - b.c[2], a.c[3] - b.c[3]};
}
inline Jet3 operator-(const Jet3& a) { return {-a.c[0], -a.c[1], -a.c[2], -a.c[3]}; }

inline Jet3 operator*(const Jet3& a, const Jet3& b) {
    return {a.c[0] * b.c[0], a.c[0] * b.c[1] + a.c[1] * b.c[0],
            a.c[0] * b.c[2] + a.c[1] * b.c[1] + a.c[2] * b.c[0],
            a.c[0] * b.c[3] + a.c[1] * b.c[2] + a.c[2] * b.c[1] + a.c[3] * b.c[0]};
}

/// Caller guarantees b.c[0] != 0.
inline Jet3 operator/(const Jet3& a, const Jet3& b) {
    Jet3 q;
    q.c[0] = a.c[0] / b.c[0];
    q.c[1] = (a.c[1] - b.c[1] * q.c[0]) / b.c[0];
    q.c[2] = (a.c[2] - b.c[1] * q.c[1] - b.c[2] * q.c[0]) / b.c[0];
    q.c[3] = (a.c[3] - b.c[1] * q.c[2] - b.c[2] * q.c[1] - b.c[3] * q.c[0]) / b.c[0];
    return q;
}

inline Jet3 exp(const Jet3& a) {
    const auto e = std::exp(a.c[0]);
    return a.compose(e, e, e, e);
}
inline Jet3 log(const Jet3& a) {
    const auto x = a.c[0];
    return a.compose(std::log(x), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x));
}
inline Jet3 sin(const Jet3& a) {
    const auto s = std::sin(a.c[0]), co = std::cos(a.c[0]);
    return a.compose(s, co, -s, -co);
}
inline Jet3 cos(const Jet3& a) {
    const auto s = std::sin(a.c[0]), co = std::cos(a.c[0]);
    return a.compose(co, -s, -co, s);
}

}  // namespace ddeps
