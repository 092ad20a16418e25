// Copyright 2026 The PENME Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "penme/binary_io.hpp"
#include "penme/error.hpp"
#include "penme/rng.hpp"

namespace penme {

// One edit: the prompt x, the new answer y, and the probe prompts that must
// (paraphrases) or must not (neighbours) trigger it.
struct EditRecord {
  std::string id;
  std::string edit_prompt;
  std::string target_output;
  std::vector<std::string> paraphrases;
  std::vector<std::string> neighbours;

  bool operator==(const EditRecord&) const = default;
};

enum class Role { kEdit, kParaphrase, kNeighbour };

inline const char* RoleName(Role role) {
  switch (role) {
    case Role::kEdit: return "edit";
    case Role::kParaphrase: return "paraphrase";
    case Role::kNeighbour: return "neighbour";
  }
  return "?";
}

struct PromptRole {
  Role role = Role::kEdit;
  std::size_t edit = 0;  // position of the owning record
  std::size_t index = 0;  // ordinal within the role; 0 for the edit prompt

  bool operator==(const PromptRole&) const = default;
};

// Row ids used in embedding dumps: "<edit>:x", "<edit>:p<j>", "<edit>:n<j>".
inline std::string EditPromptId(const std::string& edit_id) { return edit_id + ":x"; }
inline std::string ParaphraseId(const std::string& edit_id, std::size_t j) {
  return edit_id + ":p" + std::to_string(j);
}
inline std::string NeighbourId(const std::string& edit_id, std::size_t j) {
  return edit_id + ":n" + std::to_string(j);
}

inline std::string PromptId(const std::vector<EditRecord>& records, const PromptRole& r) {
  const std::string& id = records.at(r.edit).id;
  switch (r.role) {
    case Role::kEdit: return EditPromptId(id);
    case Role::kParaphrase: return ParaphraseId(id, r.index);
    case Role::kNeighbour: return NeighbourId(id, r.index);
  }
  return {};
}

inline const std::string& PromptText(const std::vector<EditRecord>& records,
                                     const PromptRole& r) {
  const EditRecord& rec = records.at(r.edit);
  switch (r.role) {
    case Role::kEdit: return rec.edit_prompt;
    case Role::kParaphrase: return rec.paraphrases.at(r.index);
    case Role::kNeighbour: return rec.neighbours.at(r.index);
  }
  return rec.edit_prompt;
}

// Bidirectional map between prompt ids and their (role, edit, index).
class PromptIndex {
 public:
  explicit PromptIndex(const std::vector<EditRecord>& records) {
    for (std::size_t e = 0; e < records.size(); ++e) {
      Add(records, {Role::kEdit, e, 0});
      for (std::size_t j = 0; j < records[e].paraphrases.size(); ++j) {
        Add(records, {Role::kParaphrase, e, j});
      }
      for (std::size_t j = 0; j < records[e].neighbours.size(); ++j) {
        Add(records, {Role::kNeighbour, e, j});
      }
    }
  }

  const PromptRole* Find(const std::string& prompt_id) const {
    auto it = roles_.find(prompt_id);
    return it == roles_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return roles_.size(); }

 private:
  void Add(const std::vector<EditRecord>& records, PromptRole role) {
    std::string id = PromptId(records, role);
    if (!roles_.emplace(id, role).second) {
      throw Error(ErrorKind::kValidation, "prompt id '" + id + "' is ambiguous");
    }
  }

  std::unordered_map<std::string, PromptRole> roles_;
};

inline void ValidateRecord(const EditRecord& r) {
  if (r.id.empty()) throw Error(ErrorKind::kValidation, "record with empty id");
  if (r.edit_prompt.empty()) {
    throw Error(ErrorKind::kValidation, "edit '" + r.id + "' has an empty edit_prompt");
  }
  if (r.target_output.empty()) {
    throw Error(ErrorKind::kValidation, "edit '" + r.id + "' has an empty target_output");
  }
  for (const auto& p : r.paraphrases) {
    if (p.empty()) throw Error(ErrorKind::kValidation, "edit '" + r.id + "' has an empty paraphrase");
  }
  for (const auto& n : r.neighbours) {
    if (n.empty()) throw Error(ErrorKind::kValidation, "edit '" + r.id + "' has an empty neighbour");
  }
}

inline void ValidateUniqueIds(const std::vector<EditRecord>& records) {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) {
      throw Error(ErrorKind::kValidation, "duplicate edit id '" + r.id + "'");
    }
  }
}

inline nlohmann::json RecordToJson(const EditRecord& r) {
  return nlohmann::json{{"id", r.id},
                        {"edit_prompt", r.edit_prompt},
                        {"target_output", r.target_output},
                        {"paraphrases", r.paraphrases},
                        {"neighbours", r.neighbours}};
}

inline std::vector<EditRecord> ParseDataset(std::istream& in) {
  std::vector<EditRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    EditRecord r;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.is_object()) throw ParseError("expected a JSON object", line_no);
      r.id = j.at("id").get<std::string>();
      r.edit_prompt = j.at("edit_prompt").get<std::string>();
      r.target_output = j.at("target_output").get<std::string>();
      r.paraphrases = j.value("paraphrases", std::vector<std::string>{});
      r.neighbours = j.value("neighbours", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), line_no);
    }
    try {
      ValidateRecord(r);
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
    records.push_back(std::move(r));
  }
  ValidateUniqueIds(records);
  return records;
}

inline std::vector<EditRecord> LoadDataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kArgument, "cannot open dataset " + path.string());
  return ParseDataset(in);
}

inline std::string SerializeDataset(const std::vector<EditRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += RecordToJson(r).dump();
    out += '\n';
  }
  return out;
}

// Neighbour texts that occur under more than one edit. Ingestion keeps them
// verbatim; callers surface the list as a warning.
inline std::vector<std::string> NeighbourCollisions(const std::vector<EditRecord>& records) {
  std::map<std::string, std::set<std::string>> owners;
  for (const auto& r : records) {
    for (const auto& n : r.neighbours) owners[n].insert(r.id);
  }
  std::vector<std::string> out;
  for (const auto& [text, ids] : owners) {
    if (ids.size() > 1) out.push_back(text);
  }
  return out;
}

// Train/test partition of one edit's probes, as indices into its lists.
struct EditSplit {
  std::string edit_id;
  std::vector<std::size_t> train_paraphrases;
  std::vector<std::size_t> test_paraphrases;
  std::vector<std::size_t> train_neighbours;
  std::vector<std::size_t> test_neighbours;

  bool operator==(const EditSplit&) const = default;
};

// Aligned with the record list: edits[i] belongs to records[i].
struct DatasetSplit {
  std::vector<EditSplit> edits;

  bool operator==(const DatasetSplit&) const = default;
};

// One uniformly chosen paraphrase goes to train; floor(n/2) neighbours,
// chosen by a seeded shuffle, go to train. Everything else is test.
inline DatasetSplit SplitDataset(const std::vector<EditRecord>& records, std::uint64_t seed) {
  Rng rng(seed);
  DatasetSplit split;
  split.edits.reserve(records.size());
  for (const auto& r : records) {
    if (r.paraphrases.empty()) {
      throw Error(ErrorKind::kValidation, "edit '" + r.id + "' has no paraphrases to split");
    }
    EditSplit es;
    es.edit_id = r.id;
    const std::size_t chosen = static_cast<std::size_t>(rng.Below(r.paraphrases.size()));
    for (std::size_t j = 0; j < r.paraphrases.size(); ++j) {
      (j == chosen ? es.train_paraphrases : es.test_paraphrases).push_back(j);
    }
    std::vector<std::size_t> order(r.neighbours.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    rng.Shuffle(order);
    const std::size_t n_train = order.size() / 2;
    es.train_neighbours.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    es.test_neighbours.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(es.train_neighbours.begin(), es.train_neighbours.end());
    std::sort(es.test_neighbours.begin(), es.test_neighbours.end());
    split.edits.push_back(std::move(es));
  }
  return split;
}

// Throws unless the split is aligned with records, in range, and disjoint.
inline void ValidateSplit(const std::vector<EditRecord>& records, const DatasetSplit& split) {
  if (split.edits.size() != records.size()) {
    throw Error(ErrorKind::kValidation, "split covers " + std::to_string(split.edits.size()) +
                                            " edits but dataset has " +
                                            std::to_string(records.size()));
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const EditSplit& es = split.edits[i];
    const EditRecord& r = records[i];
    if (es.edit_id != r.id) {
      throw Error(ErrorKind::kValidation, "split entry " + std::to_string(i) + " is for '" +
                                              es.edit_id + "', expected '" + r.id + "'");
    }
    auto check = [&](const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                     std::size_t n, const char* what) {
      std::set<std::size_t> seen;
      for (auto j : train) {
        if (j >= n || !seen.insert(j).second) {
          throw Error(ErrorKind::kValidation, std::string("bad train ") + what + " index for '" + r.id + "'");
        }
      }
      for (auto j : test) {
        if (j >= n || !seen.insert(j).second) {
          throw Error(ErrorKind::kValidation,
                      std::string("test ") + what + " index overlaps or is out of range for '" + r.id + "'");
        }
      }
    };
    check(es.train_paraphrases, es.test_paraphrases, r.paraphrases.size(), "paraphrase");
    check(es.train_neighbours, es.test_neighbours, r.neighbours.size(), "neighbour");
  }
}

inline nlohmann::json SplitToJson(const DatasetSplit& split) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& es : split.edits) {
    arr.push_back({{"edit_id", es.edit_id},
                   {"train_paraphrases", es.train_paraphrases},
                   {"test_paraphrases", es.test_paraphrases},
                   {"train_neighbours", es.train_neighbours},
                   {"test_neighbours", es.test_neighbours}});
  }
  return nlohmann::json{{"edits", arr}};
}

inline DatasetSplit SplitFromJson(const nlohmann::json& j) {
  DatasetSplit split;
  try {
    for (const auto& e : j.at("edits")) {
      EditSplit es;
      es.edit_id = e.at("edit_id").get<std::string>();
      es.train_paraphrases = e.at("train_paraphrases").get<std::vector<std::size_t>>();
      es.test_paraphrases = e.at("test_paraphrases").get<std::vector<std::size_t>>();
      es.train_neighbours = e.at("train_neighbours").get<std::vector<std::size_t>>();
      es.test_neighbours = e.at("test_neighbours").get<std::vector<std::size_t>>();
      split.edits.push_back(std::move(es));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("split: ") + e.what());
  }
  return split;
}

// First n records with their split entries.
inline std::pair<std::vector<EditRecord>, DatasetSplit> Prefix(const std::vector<EditRecord>& records,
                                                               const DatasetSplit& split,
                                                               std::size_t n) {
  if (n > records.size()) {
    throw Error(ErrorKind::kArgument, "prefix of " + std::to_string(n) +
                                          " edits exceeds dataset size " +
                                          std::to_string(records.size()));
  }
  std::vector<EditRecord> sub(records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n));
  DatasetSplit sub_split;
  sub_split.edits.assign(split.edits.begin(), split.edits.begin() + static_cast<std::ptrdiff_t>(n));
  return {std::move(sub), std::move(sub_split)};
}

}  // namespace penme
