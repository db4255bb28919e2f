#pragma once

#include <stdexcept>
#include <string>

namespace qim {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: non-finite entries, out-of-range parameters, bad shapes.
class InputError : public Error {
 public:
  using Error::Error;
};

// A scalar function was evaluated outside its domain (log of 0, x^t with x < 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An operator precondition does not hold, e.g. H is not bounded below by I.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// The perturbation lies outside the chart neighbourhood. margin = (1 - beta) - ||X||_eps.
class OutOfHoodError : public Error {
 public:
  OutOfHoodError(const std::string& what, double margin) : Error(what), margin_(margin) {}
  double margin() const noexcept { return margin_; }

 private:
  double margin_;
};

// beta0 / (1 - a) would reach 1.
class BetaOverflowError : public Error {
 public:
  using Error::Error;
};

// Enumeration or memory cap exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qim
