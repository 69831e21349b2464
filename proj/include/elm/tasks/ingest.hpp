#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "elm/embedding/record.hpp"

namespace elm::tasks {

enum class Split { train, validation, test };

std::string split_name(Split s);
Split parse_split(const std::string& s);

struct IngestResult {
    std::vector<embedding::AbstractRecord> records;
    std::size_t skipped_empty = 0;
    std::size_t lines = 0;
};

// PubMed-RCT line format: "###<id>" opens an abstract, then one
// "LABEL<TAB>sentence" line per sentence, blank lines between abstracts.
// Consecutive sentences of one label form a section. Unknown labels and
// unlabeled lines raise ValidationError naming the line.
IngestResult parse_pubmed_rct(std::istream& in, const std::string& source_name);
IngestResult ingest_pubmed_rct(const std::filesystem::path& path);

// Reads train.txt, dev.txt and test.txt from a directory (missing files are
// skipped).
std::map<Split, IngestResult> ingest_pubmed_rct_dir(const std::filesystem::path& dir);

// One record per line: {record_id, sections:{name:text,...} in order, full_text}.
void write_records_jsonl(const std::filesystem::path& path, const std::vector<embedding::AbstractRecord>& records);
std::vector<embedding::AbstractRecord> read_records_jsonl(const std::filesystem::path& path);

}  // namespace elm::tasks
