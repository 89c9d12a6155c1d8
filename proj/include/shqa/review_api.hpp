// Copyright 2026 The smarthome-qa Authors.
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

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shqa/core_model.hpp"
#include "shqa/refine.hpp"

namespace httplib {
class Server;
}

namespace shqa {

struct Decision {
  std::string record_id;
  DecisionAction action = DecisionAction::Accept;
  std::optional<std::string> final_text;
  std::optional<std::string> reviewer_note;
  // Optimistic concurrency token; only PENDING is accepted.
  RecordStatus expected_status = RecordStatus::Pending;
};

Decision decision_from_json(std::string record_id, const nlohmann::json& body);

struct RecordPage {
  std::vector<RefinementRecord> records;
  std::size_t total = 0;
  std::size_t page = 1;
  std::size_t page_size = 50;
};

struct Progress {
  std::size_t pending = 0;
  std::size_t accepted = 0;
  std::size_t edited = 0;
  std::size_t rejected = 0;
  std::size_t failed = 0;
  std::size_t total = 0;

  bool operator==(const Progress&) const = default;
};

nlohmann::ordered_json to_json(const Progress& p);

inline constexpr std::size_t kMaxPageSize = 500;

class ReviewService {
 public:
  explicit ReviewService(RecordStore& store, std::vector<Dataset> datasets = {});

  // Records ordered by created_at then id; pages are 1-based.
  RecordPage list_records(std::optional<Stage> stage,
                          std::optional<RecordStatus> status, std::size_t page,
                          std::size_t page_size) const;

  // Exactly one of several concurrent decisions on a record wins; the rest
  // get ConflictError.
  RefinementRecord submit_decision(const Decision& decision);

  Progress progress(std::optional<Stage> stage) const;

  const QAPair* find_pair(const std::string& id) const;

 private:
  RecordStore& store_;
  std::vector<Dataset> datasets_;
};

// JSON over HTTP:
//   GET  /api/records?stage=&status=&page=&page_size=
//   POST /api/records/{id}/decision
//   GET  /api/progress?stage=
//   GET  /api/pairs/{id}
// Errors are {code, message} with 404, 409 or 422. `static_dir`, when set,
// is served at "/".
class ReviewServer {
 public:
  ReviewServer(ReviewService& service,
               std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~ReviewServer();

  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  ReviewService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace shqa
