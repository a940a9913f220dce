#pragma once

// Converts MITweet CSV files to the JSON Lines manifest format.
//
// Expected input: a directory with one CSV per split whose file name contains
// "train", "val" (or "dev"/"valid") and "test". Columns are located by header:
//   id (optional), topic, tweet (or text),
//   R{i} or R{i}-...  relevance of the i-th facet (1 = related, 0 = unrelated)
//   I{i} or I{i}-...  ideology of the i-th facet (0 left, 1 center, 2 right,
//                     -1 or empty when unrelated)
// where i counts facets from 1 in schema order.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "bico/data_io.hpp"

namespace bico {

std::vector<std::vector<std::string>> parse_csv(std::istream& in);

/// Rows of one CSV file as samples. `id_prefix` names rows without an id column.
std::vector<Sample> mitweet_samples(std::istream& csv, const std::vector<std::string>& facet_codes,
                                    const std::string& id_prefix);

struct ConvertSummary {
    std::size_t train = 0, val = 0, test = 0;
    std::size_t total() const { return train + val + test; }
};

/// Writes manifest.jsonl (all splits) plus train.jsonl, val.jsonl, test.jsonl.
ConvertSummary convert_mitweet(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                               const std::vector<std::string>& facet_codes);

}  // namespace bico
