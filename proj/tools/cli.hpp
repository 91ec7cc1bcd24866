// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hbrb/vocabulary.hpp"

namespace hbrb::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kData = 2,
    kInternal = 3,
};

struct TrainOptions {
    std::string input;
    std::string out;
    std::string strategy = "hbrb";
    std::size_t k = kDefaultBranching;
    std::size_t levels = kDefaultLevels;
    std::uint64_t seed = 0;
    std::size_t max_iters = 100;
    std::string format;
};

/// Runs one CLI invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hbrb::cli
