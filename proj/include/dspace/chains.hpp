// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "dspace/cubes.hpp"

namespace dspace {

/// Structural cube identity: space signature, domain signature, dimension and
/// normalized map components. Pointwise-equal composites that differ
/// structurally are merged separately by identify_equal().
std::string cube_key(const GeneralizedCube& cube);

/// A finitely supported real combination of generalized n-cubes.
class Chain {
public:
  static Chain zero(int dim);
  static Chain single(const GeneralizedCube& cube, double coeff = 1.0);

  int dim() const { return dim_; }
  bool is_zero() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  struct Entry {
    GeneralizedCube cube;
    double coeff = 0.0;
  };
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::vector<GeneralizedCube> support() const;

private:
  explicit Chain(int dim) : dim_(dim) {}
  int dim_ = 0;
  std::map<std::string, Entry> entries_;

  friend Chain add(const Chain& a, const Chain& b);
  friend Chain scale(double c, const Chain& chain);
};

/// Coefficient-wise sum; exact cancellations drop out of the support.
Chain add(const Chain& a, const Chain& b);
Chain scale(double c, const Chain& chain);

/// Signed chain of faces sum_{i,alpha} (-1)^(i+alpha) face(phi, i, alpha)
/// (1-based axis in the sign). Propagates ExtensionRequired from face().
Chain boundary(const GeneralizedCube& cube, const ExtensionConfig& cfg = {});

/// Linear extension of the boundary to chains.
Chain boundary_chain(const Chain& chain, const ExtensionConfig& cfg = {});

/// Merges entries whose cubes share a domain signature and whose maps agree
/// within tol on a sample grid; drops coefficients that cancel. Cubes whose
/// maps are not evaluable at grid points are left unmerged.
Chain identify_equal(const Chain& chain, int grid_per_axis = 5,
                     double tol = 1e-12);

} // namespace dspace
