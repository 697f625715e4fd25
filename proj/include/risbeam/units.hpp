#pragma once

// Physical constants and unit conversions shared across the library.

#include <cmath>

namespace risbeam {

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Power conversions. 1 W -> 30 dBm, 1e-15 W -> -120 dBm.
inline double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_db(double watt) { return 10.0 * std::log10(watt); }
inline double db_to_watt(double db) { return std::pow(10.0, db / 10.0); }

} // namespace risbeam
