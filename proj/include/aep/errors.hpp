// Copyright 2026 The AEP Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace aep {

// Invalid arguments use std::invalid_argument; the categories below cover the
// remaining failure kinds callers need to tell apart.

/// A registry key, file or data source does not exist.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data exists but cannot be parsed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Persisting to disk failed.
class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aep
