#ifndef ZIBC_ACCUM_HPP
#define ZIBC_ACCUM_HPP

#include <cmath>

namespace zibc {

// Neumaier compensated summation. Keeps likelihood/score sums accurate for
// large n without a separate pairwise pass.
class KahanSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double total() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

} // namespace zibc

#endif
