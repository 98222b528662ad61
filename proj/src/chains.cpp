// SPDX-License-Identifier: Apache-2.0
#include "dspace/chains.hpp"

#include <cmath>
#include <sstream>

namespace dspace {

std::string cube_key(const GeneralizedCube& cube) {
  std::ostringstream os;
  os << cube.space->signature() << '|' << cube.domain->signature() << '|'
     << cube.dim() << '|';
  for (const auto& c : cube.map.components()) os << c.key() << ';';
  return os.str();
}

Chain Chain::zero(int dim) { return Chain(dim); }

Chain Chain::single(const GeneralizedCube& cube, double coeff) {
  Chain c(cube.dim());
  if (coeff != 0.0) c.entries_.emplace(cube_key(cube), Entry{cube, coeff});
  return c;
}

std::vector<GeneralizedCube> Chain::support() const {
  std::vector<GeneralizedCube> out;
  out.reserve(entries_.size());
  for (const auto& [key, e] : entries_) out.push_back(e.cube);
  return out;
}

Chain add(const Chain& a, const Chain& b) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("chain addition across different dimensions");
  Chain out(a.dim());
  out.entries_ = a.entries_;
  for (const auto& [key, e] : b.entries_) {
    auto it = out.entries_.find(key);
    if (it == out.entries_.end()) {
      out.entries_.emplace(key, e);
    } else {
      it->second.coeff += e.coeff;
      if (it->second.coeff == 0.0) out.entries_.erase(it);
    }
  }
  return out;
}

Chain scale(double c, const Chain& chain) {
  Chain out(chain.dim());
  if (c == 0.0) return out;
  out.entries_ = chain.entries_;
  for (auto& [key, e] : out.entries_) e.coeff *= c;
  return out;
}

Chain boundary(const GeneralizedCube& cube, const ExtensionConfig& cfg) {
  const int n = cube.dim();
  if (n < 1)
    throw std::invalid_argument("boundary: cube must have dimension >= 1");
  Chain out = Chain::zero(n - 1);
  for (int i = 0; i < n; ++i) {
    for (int alpha = 0; alpha <= 1; ++alpha) {
      double sign = ((i + 1 + alpha) % 2 == 0) ? 1.0 : -1.0;
      out = add(out, Chain::single(face(cube, i, alpha, cfg), sign));
    }
  }
  return out;
}

Chain boundary_chain(const Chain& chain, const ExtensionConfig& cfg) {
  if (chain.dim() < 1)
    throw std::invalid_argument("boundary_chain: chain dimension must be >= 1");
  Chain out = Chain::zero(chain.dim() - 1);
  for (const auto& [key, e] : chain.entries())
    out = add(out, scale(e.coeff, boundary(e.cube, cfg)));
  return out;
}

namespace {

std::vector<std::vector<double>> identification_grid(int dim, int per_axis) {
  std::vector<std::vector<double>> out;
  if (dim == 0) {
    out.push_back({});
    return out;
  }
  int g = std::max(per_axis, 2);
  std::vector<int> idx(dim, 0);
  while (true) {
    std::vector<double> t(dim);
    for (int i = 0; i < dim; ++i) t[i] = static_cast<double>(idx[i]) / (g - 1);
    out.push_back(std::move(t));
    int i = dim - 1;
    while (i >= 0 && ++idx[i] == g) idx[i--] = 0;
    if (i < 0) break;
  }
  return out;
}

} // namespace

Chain identify_equal(const Chain& chain, int grid_per_axis, double tol) {
  const int n = chain.dim();
  auto grid = identification_grid(n, grid_per_axis);

  struct Row {
    GeneralizedCube cube;
    double coeff;
    std::vector<std::vector<double>> values; // per grid point
    bool evaluable = true;
  };
  std::vector<Row> rows;
  for (const auto& [key, e] : chain.entries()) {
    Row r{e.cube, e.coeff, {}, true};
    for (const auto& t : grid) {
      try {
        r.values.push_back(eval(e.cube.map, t));
      } catch (const DomainError&) {
        r.evaluable = false;
        break;
      }
    }
    rows.push_back(std::move(r));
  }

  std::vector<bool> used(rows.size(), false);
  Chain out = Chain::zero(n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (used[i]) continue;
    double coeff = rows[i].coeff;
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      if (used[j] || !rows[i].evaluable || !rows[j].evaluable) continue;
      if (rows[i].cube.domain->signature() != rows[j].cube.domain->signature())
        continue;
      bool equal = true;
      for (std::size_t g = 0; g < grid.size() && equal; ++g)
        for (std::size_t c = 0; c < rows[i].values[g].size() && equal; ++c)
          if (std::abs(rows[i].values[g][c] - rows[j].values[g][c]) > tol)
            equal = false;
      if (equal) {
        coeff += rows[j].coeff;
        used[j] = true;
      }
    }
    used[i] = true;
    if (std::abs(coeff) > tol)
      out = add(out, Chain::single(rows[i].cube, coeff));
  }
  return out;
}

} // namespace dspace
