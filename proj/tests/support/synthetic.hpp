#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "elm/embedding/record.hpp"

namespace elm::testing {

struct SyntheticAbstract {
    embedding::AbstractRecord record;
    int condition = 0;   // topic ground truth
    int population = 0;  // 0 men, 1 women, 2 children, 3 older adults, 4 adults
};

// Templated RCT abstracts drawn from small vocabularies. Same seed, same text.
std::vector<SyntheticAbstract> synthetic_abstracts(std::size_t n, std::uint64_t seed, bool all_sections = true);

std::vector<embedding::AbstractRecord> records_of(const std::vector<SyntheticAbstract>& items);

// Writes the PubMed-RCT line format ("###id", "LABEL\tsentence").
void write_pubmed_rct(const std::filesystem::path& path, const std::vector<embedding::AbstractRecord>& records);

// A fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

}  // namespace elm::testing
