// Test-only oracles, independent of the library's computation paths.
#pragma once

#include <cmath>
#include <functional>

namespace oracle {

inline double chi2_pdf(double t, int df) {
    double a = df / 2.0;
    return std::exp((a - 1.0) * std::log(t) - t / 2.0 - a * std::log(2.0) - std::lgamma(a));
}

namespace detail {

inline double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive(const std::function<double(double)>& f, double a, double fa, double b,
                       double fb, double fm, double whole, double eps, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson(a, fa, m, fm, flm);
    double right = simpson(m, fm, b, fb, frm);
    if (depth > 40 || std::fabs(left + right - whole) < 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, fa, m, fm, flm, left, eps / 2.0, depth + 1) +
           adaptive(f, m, fm, b, fb, frm, right, eps / 2.0, depth + 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double eps) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = simpson(a, fa, b, fb, fm);
    return adaptive(f, a, fa, b, fb, fm, whole, std::max(eps * std::fabs(whole), 1e-300), 0);
}

}  // namespace detail

/// Upper-tail chi-square probability by brute-force quadrature of the
/// density. Segments are integrated until the analytic tail bound
/// (pdf decays at least like exp(-(t-T)/4) once t exceeds max(x, 2*df))
/// is negligible relative to the accumulated mass.
inline double chi_square_sf_oracle(double x, int df) {
    if (x <= 0.0) return 1.0;
    auto f = [df](double t) { return chi2_pdf(t, df); };
    double total = 0.0;
    double lo = x;
    const double step = std::max(10.0, static_cast<double>(df));
    while (true) {
        double hi = lo + step;
        total += detail::integrate(f, lo, hi, 1e-12);
        if (hi > std::max(x, 2.0 * df) + 10.0 && 4.0 * chi2_pdf(hi, df) < 1e-12 * total) break;
        lo = hi;
    }
    return total;
}

}  // namespace oracle
