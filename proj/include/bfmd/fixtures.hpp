// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "bfmd/annotation.hpp"

namespace bfmd {

// Deterministic 19-match corpus whose aggregate statistics reproduce the
// bundled reference table: 12 singles / 7 doubles, 1687 rallies, 16751 hits,
// 795 replays, 52 hawkeye segments, 419 net hits, 1556 landings, and the
// resulting 9.93 / 10.72 / 8.61 average hits per rally. data/fixtures/table1
// holds the serialized form.
std::vector<MatchRecord> reference_stats_corpus();

}  // namespace bfmd
