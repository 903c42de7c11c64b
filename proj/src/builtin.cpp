#include "endpt/builtin.hpp"

#include <numbers>
#include <string>

#include "endpt/errors.hpp"

namespace endpt::builtin {

std::vector<PolyVectorField> example_fields(int p) {
  if (p < 1) throw ValidationError("builtin example needs p >= 1, got " + std::to_string(p));
  return {PolyVectorField::parse({"1", "0", "0"}, 3),
          PolyVectorField::parse({"0", "1 - x1", "x1^" + std::to_string(p)}, 3)};
}

ControlSignal example_control() { return ControlSignal::parse({"0", "1"}); }

ControlSignal example_perturbation() {
  return ControlSignal(std::vector<QuasiTrigPoly>{QuasiTrigPoly::trig(Phase::sin, 1, 2.0 * std::numbers::pi),
                                                  QuasiTrigPoly::constant(1.0)});
}

}  // namespace endpt::builtin
