#include "hardsel/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "hardsel/errors.hpp"
#include "hardsel/rng.hpp"

namespace hardsel {

using nlohmann::json;

bool is_blank(std::string_view s) noexcept {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

namespace {

std::optional<std::string> string_field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

std::optional<InstructionRecord> record_from_json(const json& obj, std::string_view source_tag,
                                                  std::string fallback_id) {
  if (!obj.is_object()) return std::nullopt;
  auto instruction = string_field(obj, "instruction");
  auto response = string_field(obj, "response");
  if (!response) response = string_field(obj, "output");
  if (!instruction || !response || is_blank(*instruction) || is_blank(*response)) {
    return std::nullopt;
  }
  InstructionRecord r;
  r.id = string_field(obj, "id").value_or(std::move(fallback_id));
  if (r.id.empty()) return std::nullopt;
  r.source_tag = string_field(obj, "source_tag").value_or(std::string(source_tag));
  if (!source_tag.empty()) r.source_tag = std::string(source_tag);
  r.instruction = std::move(*instruction);
  r.input = string_field(obj, "input").value_or("");
  r.response = std::move(*response);
  return r;
}

json record_to_json(const InstructionRecord& r) {
  return json{{"id", r.id},
              {"source_tag", r.source_tag},
              {"instruction", r.instruction},
              {"input", r.input},
              {"response", r.response}};
}

SourcePool load_jsonl(const std::filesystem::path& path, std::string tag) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  if (tag.empty()) tag = path.stem().string();

  SourcePool pool;
  pool.tag = tag;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    auto rec = record_from_json(obj, tag, tag + ":" + std::to_string(line_no));
    if (!rec || !seen.insert(rec->id).second) {
      ++pool.dropped;
      continue;
    }
    pool.records.push_back(std::move(*rec));
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  if (pool.dropped > 0) {
    spdlog::warn("{}: dropped {} invalid line(s)", path.string(), pool.dropped);
  }
  if (pool.records.empty()) throw EmptyPoolError(path.string() + " has no valid records");
  return pool;
}

std::vector<InstructionRecord> sample_per_source(const std::vector<SourcePool>& pools,
                                                 std::size_t n_per_source, std::uint64_t seed) {
  if (pools.empty()) throw ConfigError("sample_per_source: no pools given");
  if (n_per_source == 0) throw ConfigError("sample_per_source: n_per_source must be >= 1");

  std::vector<InstructionRecord> out;
  for (std::size_t p = 0; p < pools.size(); ++p) {
    const auto& records = pools[p].records;
    Rng rng(derive_seed(seed, p));
    auto picked = rng.sample_indices(records.size(), n_per_source);
    std::sort(picked.begin(), picked.end());
    for (std::size_t i : picked) out.push_back(records[i]);
  }
  return out;
}

std::vector<InstructionRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<InstructionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) throw ParseError(where + ": not valid JSON");
    auto rec = record_from_json(obj, "", "");
    if (!rec) throw ParseError(where + ": missing id, instruction or response");
    out.push_back(std::move(*rec));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<InstructionRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  if (!out) throw IoError("write error on " + path.string());
}

Corpus::Corpus(std::vector<InstructionRecord> records) : records_(std::move(records)) {
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!index_.emplace(records_[i].id, i).second) {
      throw ConfigError("duplicate record id '" + records_[i].id + "'");
    }
  }
}

const InstructionRecord& Corpus::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ConfigError("unknown record id '" + id + "'");
  return records_[it->second];
}

}  // namespace hardsel
