#include "stagedrisk/rng.hpp"

#include <cmath>

namespace staged {

double RngStream::box_muller(double u1, double u2) {
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

} // namespace staged
