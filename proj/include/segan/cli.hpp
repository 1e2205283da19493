#pragma once

namespace segan {

// Full command-line surface (synth, split, train, eval, crosseval, transfer, gradcheck).
// Returns the process exit status; errors print to stderr and yield nonzero.
int run_cli(int argc, const char* const* argv);

}  // namespace segan
