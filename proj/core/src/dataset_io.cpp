#include "rusgroup/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rusgroup/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rusgroup {
namespace {

constexpr std::string_view kDescriptorSuffix = ".descriptor.json";

template <typename T>
std::vector<T> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<T>());
    } catch (const json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
std::string to_jsonl(std::span<const T> items) {
  std::string out;
  for (const auto& item : items) {
    out += json(item).dump();
    out += '\n';
  }
  return out;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<InstructionInstance> read_instances_jsonl(const fs::path& path) {
  return read_jsonl<InstructionInstance>(path);
}

std::string instances_to_jsonl(std::span<const InstructionInstance> instances) {
  return to_jsonl(instances);
}

DatasetDescriptor read_descriptor(const fs::path& path) {
  try {
    return json::parse(read_file(path)).get<DatasetDescriptor>();
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<DatasetDescriptor> discover_corpus(const fs::path& root) {
  if (!fs::is_directory(root)) throw InputError("corpus root is not a directory: " + root.string());
  std::vector<DatasetDescriptor> out;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.size() <= kDescriptorSuffix.size() ||
        !name.ends_with(kDescriptorSuffix)) {
      continue;
    }
    out.push_back(read_descriptor(entry.path()));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.dataset_id < b.dataset_id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].dataset_id == out[i - 1].dataset_id) {
      throw InputError("duplicate dataset_id in corpus: " + out[i].dataset_id);
    }
  }
  return out;
}

LoadedDataset load_dataset(const fs::path& root, std::string_view dataset_id) {
  const std::string id(dataset_id);
  const fs::path descriptor_path = root / (id + std::string(kDescriptorSuffix));
  const fs::path instances_path = root / (id + ".jsonl");
  if (!fs::exists(descriptor_path) || !fs::exists(instances_path)) {
    throw InputError("dataset not loadable: " + id + " (expected " + instances_path.string() +
                     " and " + descriptor_path.string() + ")");
  }
  LoadedDataset out{read_descriptor(descriptor_path), read_instances_jsonl(instances_path)};
  if (out.descriptor.dataset_id != id) {
    throw InputError("descriptor " + descriptor_path.string() + " names dataset '" +
                     out.descriptor.dataset_id + "'");
  }
  return out;
}

std::vector<PredictionTriplet> read_triplets_jsonl(const fs::path& path) {
  return read_jsonl<PredictionTriplet>(path);
}

std::string triplets_to_jsonl(std::span<const PredictionTriplet> triplets) {
  return to_jsonl(triplets);
}

}  // namespace rusgroup
