#ifndef FLOWBENCH_INTERPRET_H_
#define FLOWBENCH_INTERPRET_H_

#include <string_view>

#include "flowbench/datamodel.h"
#include "flowbench/sim.h"

namespace flowbench {

// Turns operator text into an executable instruction. Accepts task-spec
// syntax (`orbit:target=car1,radius=3`) and the Fixed Command Set phrasings.
// A noun phrase ("the object", "the car", an object id) resolves to the
// nearest matching object inside the field of view, else the nearest overall.
// Throws kUnsupportedTask or kUnresolvedTarget.
Instruction InterpretInstruction(std::string_view text, const World& w, const SimConfig& cfg = {});

}  // namespace flowbench

#endif  // FLOWBENCH_INTERPRET_H_
