#pragma once

#include <cmath>

namespace mecsim::units {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

// dBm -> W (0 dBm = 1 mW).
inline double dbm_to_watts(double dbm) { return db_to_linear(dbm - 30.0); }

inline constexpr double kSpeedOfLight = 3.0e8;

}  // namespace mecsim::units
