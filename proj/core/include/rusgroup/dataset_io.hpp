#pragma once

// On-disk corpus layout:
//
//   <corpus_root>/<dataset_id>.jsonl             one InstructionInstance per line
//   <corpus_root>/<dataset_id>.descriptor.json   DatasetDescriptor sidecar
//
// Field names are documented in data/SCHEMA.md.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rusgroup/types.hpp"

namespace rusgroup {

struct LoadedDataset {
  DatasetDescriptor descriptor;
  std::vector<InstructionInstance> instances;
};

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file then renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<InstructionInstance> read_instances_jsonl(const std::filesystem::path& path);
std::string instances_to_jsonl(std::span<const InstructionInstance> instances);

DatasetDescriptor read_descriptor(const std::filesystem::path& path);

// Every dataset under `root`, ordered by dataset_id.
std::vector<DatasetDescriptor> discover_corpus(const std::filesystem::path& root);

LoadedDataset load_dataset(const std::filesystem::path& root, std::string_view dataset_id);

std::vector<PredictionTriplet> read_triplets_jsonl(const std::filesystem::path& path);
std::string triplets_to_jsonl(std::span<const PredictionTriplet> triplets);

}  // namespace rusgroup
