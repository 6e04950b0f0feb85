#ifndef ZIBC_BRENT_HPP
#define ZIBC_BRENT_HPP

#include <cmath>
#include <sstream>

#include "zibc/errors.hpp"

namespace zibc {

struct RootResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
};

/// Bracketed Brent: inverse quadratic interpolation / secant with a bisection
/// fallback. Requires f(a) and f(b) of opposite sign.
template <class F>
RootResult brent_root(F&& f, double a, double b, double xtol, int max_iter = 200) {
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return {a, 0.0, 0};
    if (fb == 0.0) return {b, 0.0, 0};
    if ((fa > 0.0) == (fb > 0.0)) {
        std::ostringstream msg;
        msg << "root not bracketed: f(" << a << ")=" << fa << ", f(" << b << ")=" << fb;
        throw NumericalError(msg.str());
    }

    double c = a, fc = fa;
    double d = b - a, e = d;
    for (int iter = 1; iter <= max_iter; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) {
            return {b, fb, iter};
        }
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            const double s = fb / fa;
            double p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            const double min1 = 3.0 * xm * q - std::abs(tol1 * q);
            const double min2 = std::abs(e * q);
            if (2.0 * p < (min1 < min2 ? min1 : min2)) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if (std::abs(d) > tol1) {
            b += d;
        } else {
            b += xm >= 0.0 ? tol1 : -tol1;
        }
        fb = f(b);
    }
    throw NumericalError("Brent root finder exceeded maximum iterations");
}

} // namespace zibc

#endif
