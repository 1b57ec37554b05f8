// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace cosal {

/// Tensor/feature-map dimensions do not satisfy an operation's contract.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent run/model configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A dataset file is missing, unreadable, or undecodable.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a documented precondition (e.g. non-binary mask).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value (e.g. NaN loss during training).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void format_into(std::ostringstream&) {}

template <typename Arg, typename... Rest>
void format_into(std::ostringstream& os, Arg&& arg, Rest&&... rest) {
  os << std::forward<Arg>(arg);
  format_into(os, std::forward<Rest>(rest)...);
}

}  // namespace detail

template <typename... Args>
std::string msg(Args&&... args) {
  std::ostringstream os;
  detail::format_into(os, std::forward<Args>(args)...);
  return os.str();
}

template <typename Err = ShapeError, typename... Args>
void check(bool cond, Args&&... args) {
  if (!cond) throw Err(msg(std::forward<Args>(args)...));
}

}  // namespace cosal
