// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace agridet {

/// Base class for all agridet errors. The CLI maps the concrete classes
/// below onto distinct process exit codes (see tools/agridet.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad option, configuration value, or configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed annotation, detections table, manifest, or weight manifest.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or stream failure, including truncated binary payloads.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Tensor or feature-map dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value-level precondition was violated (degenerate box, bad range, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace agridet
