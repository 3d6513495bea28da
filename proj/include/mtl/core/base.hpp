// mtl/core/base.hpp

// Copyright 2026  The mtl-ctc Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mtl {

/// Row-major dense matrix; rows are time steps wherever a sequence is stored.
template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Real>
using RowVector = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

// Error taxonomy. Each maps to one failure class the CLI reports with a
// distinct exit code (config -> 1, everything else -> 2).

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class InvalidTargetError : public Error {
 public:
  using Error::Error;
};

class InfeasibleTargetError : public InvalidTargetError {
 public:
  using InvalidTargetError::InvalidTargetError;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

class TransferError : public Error {
 public:
  TransferError(const std::string& what, std::vector<std::string> mismatched)
      : Error(what), mismatched_(std::move(mismatched)) {}
  const std::vector<std::string>& mismatched() const { return mismatched_; }

 private:
  std::vector<std::string> mismatched_;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void append(std::ostringstream&) {}

template <typename T, typename... Rest>
void append(std::ostringstream& os, T&& head, Rest&&... rest) {
  os << std::forward<T>(head);
  append(os, std::forward<Rest>(rest)...);
}

}  // namespace detail

template <typename... Args>
std::string str_cat(Args&&... args) {
  std::ostringstream os;
  detail::append(os, std::forward<Args>(args)...);
  return os.str();
}

template <typename E = ConfigError>
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw E(msg);
}

template <typename Real>
void require_shape(const Matrix<Real>& m, Eigen::Index rows, Eigen::Index cols,
                   const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ConfigError(str_cat(what, ": expected ", rows, "x", cols, ", got ",
                              m.rows(), "x", m.cols()));
  }
}

template <typename Real>
bool all_finite(const Matrix<Real>& m) {
  return m.allFinite();
}

/// A trainable tensor together with its accumulated gradient.
template <typename Real>
struct Parameter {
  std::string name;
  Matrix<Real> value;
  Matrix<Real> grad;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)),
        value(Matrix<Real>::Zero(rows, cols)),
        grad(Matrix<Real>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

template <typename Real>
using ParamRefs = std::vector<Parameter<Real>*>;

template <typename Real>
using ConstParamRefs = std::vector<const Parameter<Real>*>;

}  // namespace mtl
