#pragma once

#include <vector>

namespace gluscope {

// Exact running sum of doubles kept as a non-overlapping expansion
// (Shewchuk). value() is the correctly rounded sum, so the result does not
// depend on the order of additions or on how partial sums are merged.
class ExactSum {
public:
    void add(double x);
    void add(const ExactSum& other);
    double value() const;

    bool empty() const { return partials_.empty(); }

private:
    std::vector<double> partials_; // increasing magnitude
};

} // namespace gluscope
