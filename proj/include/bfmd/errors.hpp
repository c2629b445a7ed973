// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace bfmd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input text is not well-formed JSON.
struct MalformedDocument : Error {
  using Error::Error;
};

// Well-formed JSON that does not conform to the annotation schema.
// `path` is a JSON-pointer to the offending node.
struct SchemaViolation : Error {
  std::string path;
  SchemaViolation(std::string p, const std::string& msg)
      : Error(p + ": " + msg), path(std::move(p)) {}
};

struct EmptyCollection : Error {
  using Error::Error;
};

struct EmptyCorpus : Error {
  using Error::Error;
};

struct CorpusTooSmall : Error {
  using Error::Error;
};

struct InvalidParameter : Error {
  using Error::Error;
};

struct InvalidRatios : Error {
  using Error::Error;
};

struct DegenerateBox : Error {
  using Error::Error;
};

struct ModalityGap : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct SequenceTooLong : Error {
  using Error::Error;
};

struct AllPadded : Error {
  using Error::Error;
};

struct NonFiniteLoss : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace bfmd
