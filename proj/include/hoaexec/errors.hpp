#pragma once

#include <stdexcept>
#include <string>

namespace hoaexec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An AP index, state id or set index does not fit the structure it is used with.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A semantic check would have to enumerate more valuations than allowed.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace hoaexec
