// Copyright (c) 2026 The tlearn Authors.
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
#pragma once

#include <stdexcept>
#include <string>

namespace tlearn {

/// Base class for all tlearn errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between tensors, layers, or models.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on argument values was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or wire bytes (bad magic, truncation, unknown tags).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Internal cross-references do not line up (plans, batches, positions).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Invalid run/experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Message delivery failure between orchestrator and nodes.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined for the given input (e.g. single-class AUC).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace tlearn
