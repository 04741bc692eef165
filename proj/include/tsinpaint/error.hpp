// Copyright 2026 The tsinpaint Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tsi {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters or configuration that cannot describe a valid model.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied data with the wrong shape, range or content.
class InputError : public Error {
 public:
  using Error::Error;
};

/// File system or codec failure. The message always carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or diverging loss during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// A randomized generator could not satisfy its constraints.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Wiring bug between network stages.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsi
