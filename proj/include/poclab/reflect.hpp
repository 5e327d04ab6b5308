#pragma once

#include <span>
#include <utility>
#include <vector>

namespace poclab {

// Output of the one-dimensional Skorokhod map: x = y + z >= 0, z
// nondecreasing, z grows only while x = 0.
struct ReflectedPair {
  std::vector<double> t;
  std::vector<double> x;
  std::vector<double> z;
};

// Skorokhod map on the half-line for a path given by knots (t, y),
// piecewise linear between distinct knot times. Equal adjacent times
// encode a jump (value before, then value after); with the y(0-) = 0
// convention a negative first knot already triggers reflection. Knot
// times must be nondecreasing and the knot list nonempty.
//
// z(t) = sup_{s <= t} y(s)^-  is exact here because the negative part of
// a piecewise-linear path attains segment suprema at knots.
ReflectedPair skorokhod_map(std::span<const double> t,
                            std::span<const double> y);

// One Euler step of the reflected dynamics:
// x_new = max(0, x_prev + increment), dz = the deficit pushed back in.
std::pair<double, double> reflect_step(double x_prev, double increment);

// Verifier for the Skorokhod characterization on a knot grid: x = y + z,
// x >= 0, z nondecreasing with z(0) = y(0)^-, and sum x * dz below
// tol * path scale.
bool is_reflected_pair(std::span<const double> t, std::span<const double> y,
                       std::span<const double> x, std::span<const double> z,
                       double tol = 1e-12);

}  // namespace poclab
