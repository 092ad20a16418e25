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

// Small helpers shared by the unit tests.

#ifndef PENME_TESTS_TEST_SUPPORT_HPP_
#define PENME_TESTS_TEST_SUPPORT_HPP_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "penme/penme.hpp"

namespace penme::testing {

// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("penme_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline EditRecord MakeRecord(const std::string& id, std::size_t paraphrases, std::size_t neighbours) {
  EditRecord r;
  r.id = id;
  r.edit_prompt = "prompt of " + id;
  r.target_output = "answer of " + id;
  for (std::size_t j = 0; j < paraphrases; ++j) r.paraphrases.push_back(id + " paraphrase " + std::to_string(j));
  for (std::size_t j = 0; j < neighbours; ++j) r.neighbours.push_back(id + " neighbour " + std::to_string(j));
  return r;
}

// Embedding matrix from (id, row) pairs in the given order.
inline EmbeddingMatrix MatrixOf(const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
  std::vector<std::string> ids;
  std::vector<float> values;
  for (const auto& [id, v] : rows) {
    ids.push_back(id);
    values.insert(values.end(), v.begin(), v.end());
  }
  return EmbeddingMatrix(rows.front().second.size(), std::move(ids), std::move(values));
}

// Random rows for every prompt of every record.
inline EmbeddingMatrix RandomEmbeddings(const std::vector<EditRecord>& records, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> ids;
  std::vector<float> values;
  auto add = [&](const std::string& id) {
    ids.push_back(id);
    for (std::size_t k = 0; k < dim; ++k) values.push_back(static_cast<float>(rng.Normal()));
  };
  for (const auto& r : records) {
    add(EditPromptId(r.id));
    for (std::size_t j = 0; j < r.paraphrases.size(); ++j) add(ParaphraseId(r.id, j));
    for (std::size_t j = 0; j < r.neighbours.size(); ++j) add(NeighbourId(r.id, j));
  }
  return EmbeddingMatrix(dim, std::move(ids), std::move(values));
}

// Split that sends paraphrase 0 and the first half of the neighbours to train.
inline DatasetSplit FixedSplit(const std::vector<EditRecord>& records) {
  DatasetSplit split;
  for (const auto& r : records) {
    EditSplit es;
    es.edit_id = r.id;
    for (std::size_t j = 0; j < r.paraphrases.size(); ++j) (j == 0 ? es.train_paraphrases : es.test_paraphrases).push_back(j);
    for (std::size_t j = 0; j < r.neighbours.size(); ++j) {
      (j < r.neighbours.size() / 2 ? es.train_neighbours : es.test_neighbours).push_back(j);
    }
    split.edits.push_back(es);
  }
  return split;
}

}  // namespace penme::testing

#endif  // PENME_TESTS_TEST_SUPPORT_HPP_
