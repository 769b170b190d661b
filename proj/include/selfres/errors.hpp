#pragma once

#include <stdexcept>
#include <string>

namespace selfres {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A parameter lies outside the domain an operation is defined on.
class domain_error : public error {
public:
  using error::error;
};

/// A formula would divide by a posterior that is exactly 0 or 1.
class degenerate_belief : public error {
public:
  using error::error;
};

/// A log argument of an incentive bound is not positive.
class out_of_range_error : public error {
public:
  using error::error;
};

/// The root finder could not bracket or verify a solution.
class no_solution : public error {
public:
  using error::error;
};

/// An enumeration would exceed the configured outcome cap.
class space_too_large : public error {
public:
  using error::error;
};

/// Inconsistent market, audit or CLI configuration.
class config_error : public error {
public:
  using error::error;
};

} // namespace selfres
