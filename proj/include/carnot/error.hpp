#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace carnot {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::string expected, std::string found)
      : Error("syntax error at position " + std::to_string(position) + ": expected " + expected +
              ", found " + found),
        position_(position),
        expected_(std::move(expected)) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

class UnknownVariable : public Error {
 public:
  using Error::Error;
};

/// Evaluation left the domain of some node (division by zero, ln of a
/// non-positive number, non-finite intermediate).
class DomainError : public Error {
 public:
  DomainError(std::string node, std::vector<double> point)
      : Error(describe(node, point)), node_(std::move(node)), point_(std::move(point)) {}

  const std::string& node() const noexcept { return node_; }
  const std::vector<double>& point() const noexcept { return point_; }

 private:
  static std::string describe(const std::string& node, const std::vector<double>& point) {
    std::string s = "domain error in '" + node + "' at (";
    for (std::size_t i = 0; i < point.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(point[i]);
    }
    return s + ")";
  }

  std::string node_;
  std::vector<double> point_;
};

#define CARNOT_DEFINE_ERROR(Name)  \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

CARNOT_DEFINE_ERROR(NonsmoothInput);
CARNOT_DEFINE_ERROR(NonpositiveEpsilon);
CARNOT_DEFINE_ERROR(InvalidWeights);
CARNOT_DEFINE_ERROR(SingularFrame);
CARNOT_DEFINE_ERROR(InvalidFrame);
CARNOT_DEFINE_ERROR(TrajectoryEscape);
CARNOT_DEFINE_ERROR(StepFailure);
CARNOT_DEFINE_ERROR(NewtonDivergence);
CARNOT_DEFINE_ERROR(BadPartition);
CARNOT_DEFINE_ERROR(DegenerateSample);
CARNOT_DEFINE_ERROR(UnboundedRatio);
CARNOT_DEFINE_ERROR(MissingSample);
CARNOT_DEFINE_ERROR(NonInvertibleL);
CARNOT_DEFINE_ERROR(SingularLambda);
CARNOT_DEFINE_ERROR(UnknownEntry);
CARNOT_DEFINE_ERROR(EvaluationFailure);
CARNOT_DEFINE_ERROR(InputError);

#undef CARNOT_DEFINE_ERROR

}  // namespace carnot
