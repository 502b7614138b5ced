#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace hardsel {

/// One (instruction, optional input, response) pair.
struct InstructionRecord {
  std::string id;
  std::string source_tag;
  std::string instruction;
  std::string input;
  std::string response;

  bool operator==(const InstructionRecord&) const = default;
};

/// Records loaded from one dataset file. Every record's source_tag == tag.
struct SourcePool {
  std::string tag;
  std::vector<InstructionRecord> records;
  std::size_t dropped = 0;  // lines that failed parsing or validation
};

/// Whitespace-only strings count as empty.
bool is_blank(std::string_view s) noexcept;

/// Parses one JSONL object. Accepts "output" as an alias for "response" and
/// ignores unknown keys. Returns nullopt when a required field is missing or
/// blank. `fallback_id` is used when the object has no "id".
std::optional<InstructionRecord> record_from_json(const nlohmann::json& obj,
                                                  std::string_view source_tag,
                                                  std::string fallback_id);

nlohmann::json record_to_json(const InstructionRecord& r);

/// Loads a JSONL file. Ids default to "<tag>:<line>" (1-based). When `tag`
/// is empty the file stem is used. Throws IoError if unreadable and
/// EmptyPoolError if no line yields a valid record.
SourcePool load_jsonl(const std::filesystem::path& path, std::string tag = {});

/// Uniform sample without replacement of min(n_per_source, |pool|) records
/// from each pool, concatenated in pool order. Within a pool, records keep
/// their file order.
std::vector<InstructionRecord> sample_per_source(const std::vector<SourcePool>& pools,
                                                 std::size_t n_per_source, std::uint64_t seed);

/// Reads a unified JSONL file previously written by write_jsonl, keeping
/// each record's own id and source_tag. Invalid lines are an error here.
std::vector<InstructionRecord> read_records_jsonl(const std::filesystem::path& path);

/// Writes records as JSONL (id, source_tag, instruction, input, response).
void write_jsonl(const std::filesystem::path& path, const std::vector<InstructionRecord>& records);

/// Id-indexed view over a record list.
class Corpus {
 public:
  Corpus() = default;
  /// Throws ConfigError on duplicate ids.
  explicit Corpus(std::vector<InstructionRecord> records);

  const std::vector<InstructionRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool contains(const std::string& id) const { return index_.contains(id); }
  /// Throws ConfigError for unknown ids.
  const InstructionRecord& at(const std::string& id) const;

 private:
  std::vector<InstructionRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace hardsel
