#pragma once

namespace lyapds {

/// Exit codes: 0 success, 1 usage or configuration error, 2 data or contract
/// error, 3 numerical divergence.
int cli_main(int argc, char** argv);

}  // namespace lyapds
