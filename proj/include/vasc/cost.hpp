/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_COST_HPP
#define VASC_COST_HPP

#include <cmath>
#include <span>

#include "vasc/common.hpp"

namespace vasc {

/// Weights of the vessel cost. Defaults are the rat-kidney values in um/N/s.
struct CostWeights {
  double w_c = 5e-8;             // N / (um^2 s), metabolic weight per volume
  double w_p = 1.0;              // power weight
  double viscosity = 3.6e-15;    // N s / um^2
};

/// One vessel incident to a star centre: the far endpoint plus the vessel's radius and flow.
template <typename Scalar>
struct EdgeTerm {
  Vector3<Scalar> other;
  Scalar radius;
  Scalar flow;
};

/// Cost per unit length of a vessel: w_c pi r^2 + w_p Q^2 8 mu / (pi r^4).
template <typename Scalar>
Scalar coefficient(const CostWeights& w, Scalar radius, Scalar flow) {
  if (!(radius > Scalar(0))) throw Error("vessel radius must be > 0");
  const Scalar pi = Scalar(units::kPi);
  const Scalar r2 = radius * radius;
  return Scalar(w.w_c) * pi * r2 + Scalar(w.w_p) * flow * flow * Scalar(8.0 * w.viscosity) / (pi * r2 * r2);
}

template <typename Scalar>
Scalar edge_cost(const CostWeights& w, Scalar radius, Scalar flow, Scalar length) {
  return coefficient(w, radius, flow) * length;
}

/// Sum of edge costs over the vessels incident to a node at `v`.
template <typename Scalar>
Scalar local_cost(const CostWeights& w, const Vector3<Scalar>& v, std::span<const EdgeTerm<Scalar>> terms) {
  Scalar sum(0);
  for (const auto& t : terms) sum += coefficient(w, t.radius, t.flow) * (v - t.other).norm();
  return sum;
}

/// Analytic gradient of `local_cost` with respect to `v`. Throws when `v` is within
/// `epsilon` of a neighbour, where the cost is not differentiable.
template <typename Scalar>
Vector3<Scalar> local_cost_gradient(const CostWeights& w, const Vector3<Scalar>& v,
                                    std::span<const EdgeTerm<Scalar>> terms, Scalar epsilon) {
  Vector3<Scalar> g = Vector3<Scalar>::Zero();
  for (const auto& t : terms) {
    const Vector3<Scalar> d = v - t.other;
    const Scalar len = d.norm();
    if (!(len > epsilon)) throw Error("cost gradient undefined: node coincides with a neighbour");
    g += coefficient(w, t.radius, t.flow) * d / len;
  }
  return g;
}

}  // namespace vasc

#endif  // VASC_COST_HPP
