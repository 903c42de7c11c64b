#ifndef ENDPT_BUILTIN_HPP
#define ENDPT_BUILTIN_HPP

#include <Eigen/Dense>
#include <vector>

#include "endpt/signals.hpp"
#include "endpt/vector_field.hpp"

namespace endpt::builtin {

/// f1 = d/dx1, f2 = (1 - x1) d/dx2 + x1^p d/dx3 on R^3.
std::vector<PolyVectorField> example_fields(int p);
/// Reference control u = (0, 1).
ControlSignal example_control();
/// Perturbation v = (2 pi sin(2 pi t), 1).
ControlSignal example_perturbation();
inline Eigen::VectorXd example_q0() { return Eigen::VectorXd::Zero(3); }

}  // namespace endpt::builtin

#endif  // ENDPT_BUILTIN_HPP
