// Copyright 2026 The HBRB-BoW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hbrb/bow.hpp"
#include "hbrb/clustering.hpp"
#include "hbrb/descriptor.hpp"
#include "hbrb/error.hpp"
#include "hbrb/evaluation.hpp"
#include "hbrb/io.hpp"
#include "hbrb/random.hpp"
#include "hbrb/vocabulary.hpp"
