#ifndef MRSUR_ERRORS_HPP
#define MRSUR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mrsur {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct CholeskyFailure : Error {
  explicit CholeskyFailure(const std::string& msg) : Error(msg) {}
};

struct UnknownLevel : Error {
  explicit UnknownLevel(const std::string& msg) : Error(msg) {}
};

struct InvalidSizes : Error {
  explicit InvalidSizes(const std::string& msg) : Error(msg) {}
};

struct EmptyCandidates : Error {
  explicit EmptyCandidates(const std::string& msg) : Error(msg) {}
};

struct SingularBatch : Error {
  explicit SingularBatch(const std::string& msg) : Error(msg) {}
};

struct DegenerateVariance : Error {
  explicit DegenerateVariance(const std::string& msg) : Error(msg) {}
};

struct InitInvalid : Error {
  explicit InitInvalid(const std::string& msg) : Error(msg) {}
};

struct AllZeroTrajectory : Error {
  explicit AllZeroTrajectory(const std::string& msg) : Error(msg) {}
};

struct RankDeficientBasis : Error {
  explicit RankDeficientBasis(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace mrsur

#endif  // MRSUR_ERRORS_HPP
