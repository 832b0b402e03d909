#pragma once

#include <vector>

// Row-normalized per-class accuracy table of a reference 14-class run,
// rows and columns in canonical class order.
inline const std::vector<std::vector<double>> kReferenceRows{
    {0.61, 0, 0.072, 0.023, 0.01, 0.057, 0, 0.021, 0, 0.1, 0, 0, 0, 0},
    {0.048, 0, 0.066, 0.047, 0.034, 0, 0.18, 0.0102, 0.17, 0.01, 0.13, 0, 0, 0},
    {0.023, 0, 0.30, 0, 0.014, 0, 0.01, 0.11, 0, 0.12, 0.21, 0.048, 0, 0.091},
    {0.024, 0, 0.031, 0.26, 0, 0, 0.28, 0.026, 0, 0, 0.01, 0, 0, 0},
    {0, 0.13, 0, 0, 0.053, 0, 0.015, 0, 0.1, 0.23, 0.02, 0.12, 0.21, 0.069},
    {0, 0, 0.058, 0, 0, 0.60, 0, 0, 0.12, 0, 0.11, 0, 0, 0.004},
    {0.012, 0, 0, 0.015, 0.17, 0, 0.66, 0, 0, 0, 0, 0.0063, 0, 0},
    {0.0133, 0, 0, 0, 0, 0, 0, 0.78, 0, 0, 0, 0.023, 0, 0.23},
    {0.062, 0, 0, 0.016, 0.016, 0.016, 0.041, 0.033, 0.60, 0.078, 0, 0, 0.016, 0},
    {0, 0, 0.011, 0, 0, 0.011, 0.094, 0, 0.009, 0.50, 0, 0.29, 0, 0.0084},
    {0, 0, 0.0046, 0.0046, 0, 0.027, 0.003, 0.1, 0.06, 0, 0.27, 0, 0, 0.0066},
    {0, 0, 0.096, 0, 0, 0, 0.008, 0, 0, 0.11, 0, 0.80, 0.0031, 0},
    {0, 0, 0.036, 0.009, 0, 0, 0.019, 0, 0, 0.24, 0, 0.21, 0.30, 0},
    {0, 0, 0.025, 0, 0, 0, 0.012, 0, 0.23, 0, 0, 0, 0.0406, 0.60},
};
