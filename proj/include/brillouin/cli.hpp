#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "brillouin/alignment.hpp"
#include "brillouin/cavity.hpp"
#include "brillouin/config.hpp"
#include "brillouin/model.hpp"
#include "brillouin/thermal.hpp"

namespace brillouin {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,      // unexpected (I/O, internal)
    kExitConfig = 2,       // ConfigError, InsufficientDataError, bad flags
    kExitPhysics = 3,      // InstabilityError, NoAdmissibleRootError, TrackingError
    kExitConvergence = 4,  // FitError and subclasses
    kExitUnphysical = 5,   // thermometry asymmetry <= 1 (report still written)
};

// `args` excludes the program name: {"simulate", "--config", "run.ini", ...}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Config readers shared with the tests. Rates are read in Hz and returned in
// rad/s; see docs/config.md for the keys.
SystemParams system_params_from_config(const Config& cfg);
LayerStack cavity_stack_from_config(const Config& cfg);
ThermalParams thermal_params_from_config(const Config& cfg);
AlignmentModel alignment_model_from_config(const Config& cfg);

}  // namespace brillouin
