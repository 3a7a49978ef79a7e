#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fmn {

// Dimension mismatch between a tensor and the object consuming it.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed model / dataset / config file. `where` is a byte offset or a
// field path such as "layers[2].weights".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// Non-finite value produced while evaluating a model.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::size_t layer, const std::string& what)
      : std::runtime_error("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

// Violated precondition on a public operation.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace fmn
