#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cherry {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// invalid or contradictory configuration input
struct ConfigError : Error {
    using Error::Error;
};

// connecting arc failed numeric monotonicity validation
struct BridgeError : Error {
    long grid_index = -1;
    BridgeError(const std::string& msg, long idx) : Error(msg), grid_index(idx) {}
};

// an orbit landed inside the singularity guard band
struct OrbitHitSingularity : Error {
    long orbit_index = -1;
    OrbitHitSingularity(const std::string& msg, long idx) : Error(msg), orbit_index(idx) {}
};

// parameter tuning could not bracket or refine the target
struct TuneError : Error {
    using Error::Error;
};

// a quantity fell below what the working precision can represent
struct PrecisionExhausted : Error {
    using Error::Error;
};

// return-time combinatorics inconsistent with continued-fraction arithmetic;
// carries both candidates when a direct scan disagrees with the predicted level
struct CombinatoricsError : Error {
    using Error::Error;
    long level = -1;
    std::int64_t predicted = 0;  // q_n from the continued fraction
    std::int64_t observed = 0;   // orbit index that actually minimized the distance
    CombinatoricsError(const std::string& msg, long lv, std::int64_t pred, std::int64_t obs)
        : Error(msg), level(lv), predicted(pred), observed(obs) {}
};

// images of the non-returning interval overlapped
struct DisjointnessError : Error {
    long step = -1;
    DisjointnessError(const std::string& msg, long n) : Error(msg), step(n) {}
};

// no parameter interval with the requested rational rotation number
struct TongueNotFound : Error {
    using Error::Error;
};

// periodic-orbit multiplier did not certify as parabolic
struct EndpointCertificationError : Error {
    using Error::Error;
};

// near-parabolic passage exceeded its iteration budget
struct PassageStalled : Error {
    using Error::Error;
};

// a construction stage could not be certified within retry limits
struct StageFailed : Error {
    using Error::Error;
};

} // namespace cherry
