// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dspace {

/// Evaluation outside an expression's natural domain: division by zero,
/// log of a non-positive argument, sqrt of a negative argument, or a
/// derivative taken exactly on the domain boundary.
class DomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A declared object (space, cube, scenario) fails its construction checks.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A generator exceeds the declared bound |g| <= 1 at an embedded point.
class BoundError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A dense-domain sampler could not produce a member point near the target.
class SamplerFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A face or boundary needs a continuous extension that does not exist
/// (or is not representable) on the requested slab.
class ExtensionRequired : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A sigma-presented form failed the multi-homogeneity check.
class HomogeneityError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Chain operands of different dimensions.
class DimensionMismatch : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The pullback coefficient of a form has no continuous extension, so the
/// integral is undefined; carries a human-readable witness description.
class NotIntegrable : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Adaptive quadrature exhausted its subdivision depth.
class NoConvergence : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The restricted ambient form disagrees with the declared point form.
class ExtensionMismatch : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text or scenario file.
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace dspace
