#pragma once

// Command-line front end: JSON config with flag overrides, experiment
// orchestration, and machine-readable outputs (CSV + JSON + manifest).
//
// Exit codes: 0 all assertions passed, 1 usage or configuration error,
// 2 solver non-convergence, 4 assertion failure in an otherwise clean run.

namespace fracdeg::cli {

int run_cli(int argc, char** argv);

}  // namespace fracdeg::cli
