// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Writes the reference statistics corpus to a directory (one annotation
// JSON per match). Used to (re)generate data/fixtures/table1.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "bfmd/fixtures.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_reference_fixture <output-dir>\n";
    return 2;
  }
  const std::filesystem::path out = argv[1];
  std::filesystem::create_directories(out);
  for (const auto& match : bfmd::reference_stats_corpus()) {
    std::ofstream os(out / (match.match_id + ".json"));
    os << bfmd::serialize_match(match, -1) << "\n";
  }
  std::cout << "wrote 19 match files to " << out << "\n";
  return 0;
}
