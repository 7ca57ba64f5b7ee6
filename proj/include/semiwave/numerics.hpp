#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <vector>

namespace semiwave {

using Complex = std::complex<double>;

/// Neumaier-compensated accumulator. Summation order is the call order, so the
/// result is reproducible bit-for-bit for a fixed sequence of inputs.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            carry_ += (sum_ - t) + x;
        } else {
            carry_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

class CompensatedComplexSum {
public:
    void add(Complex z) {
        re_.add(z.real());
        im_.add(z.imag());
    }

    Complex value() const { return {re_.value(), im_.value()}; }

private:
    CompensatedSum re_;
    CompensatedSum im_;
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers with a static
/// contiguous partition. Each index is processed by exactly one worker, so any
/// per-index result is independent of the thread count. The exception thrown
/// for the lowest index (if any) is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1))));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::size_t> failed_at(workers, count);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        const std::size_t chunk = (count + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(count, begin + chunk);
            pool.emplace_back([&, w, begin, end] {
                for (std::size_t i = begin; i < end; ++i) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[w] = std::current_exception();
                        failed_at[w] = i;
                        return;
                    }
                }
            });
        }
    }
    std::size_t first = count;
    std::exception_ptr first_error;
    for (std::size_t w = 0; w < workers; ++w) {
        if (errors[w] && failed_at[w] < first) {
            first = failed_at[w];
            first_error = errors[w];
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
};

/// Ordinary least-squares line y = intercept + slope * x.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    LinearFit fit;
    if (n == 0) return fit;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss += r * r;
    }
    fit.rms_residual = std::sqrt(ss / static_cast<double>(n));
    return fit;
}

/// Slope of log(value) against log(abscissa).
inline double log_log_slope(std::span<const double> abscissa, std::span<const double> values) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < std::min(abscissa.size(), values.size()); ++i) {
        lx.push_back(std::log(abscissa[i]));
        ly.push_back(std::log(values[i]));
    }
    return fit_line(lx, ly).slope;
}

/// Composite trapezoid rule on a (possibly non-uniform) sample grid.
inline double trapezoid(std::span<const double> t, std::span<const double> y) {
    CompensatedSum acc;
    for (std::size_t k = 1; k < std::min(t.size(), y.size()); ++k) {
        acc.add(0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]));
    }
    return acc.value();
}

}  // namespace semiwave
