// Copyright 2026 The fmlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FMLAB_ERRORS_HPP_
#define FMLAB_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace fmlab {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An argument falls outside the operation's domain (times outside [0,1], s < t, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A non-finite value was produced. Carries the label of the offending node.
class NumericFault : public Error {
 public:
  NumericFault(std::string where, const std::string& what)
      : Error("numeric fault at " + where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

// Malformed file or configuration input.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Training gave up after too many consecutive faulted steps.
class TrainingAborted : public Error {
 public:
  using Error::Error;
};

}  // namespace fmlab

#endif  // FMLAB_ERRORS_HPP_
