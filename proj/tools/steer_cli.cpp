// SPDX-License-Identifier: Apache-2.0

#include "steer/cli.hpp"

int main(int argc, char** argv) { return steer::cli::run_main(argc, argv); }
