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

#include "shqa/review_api.hpp"

#include <algorithm>
#include <charconv>

#include <httplib.h>

#include "shqa/error.hpp"

namespace shqa {

using nlohmann::json;
using nlohmann::ordered_json;

Decision decision_from_json(std::string record_id, const json& body) {
  if (!body.is_object()) throw ValidationError("decision body must be an object");
  Decision d;
  d.record_id = std::move(record_id);
  try {
    d.action = parse_action(body.at("action").get<std::string>());
    if (auto it = body.find("final_text"); it != body.end() && !it->is_null()) {
      d.final_text = it->get<std::string>();
    }
    if (auto it = body.find("reviewer_note"); it != body.end() && !it->is_null()) {
      d.reviewer_note = it->get<std::string>();
    }
    d.expected_status =
        parse_status(body.value("expected_status", std::string("PENDING")));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad decision: ") + e.what());
  } catch (const ParseError& e) {
    throw ValidationError(e.what());
  }
  return d;
}

ordered_json to_json(const Progress& p) {
  ordered_json j;
  j["pending"] = p.pending;
  j["accepted"] = p.accepted;
  j["edited"] = p.edited;
  j["rejected"] = p.rejected;
  j["failed"] = p.failed;
  j["total"] = p.total;
  return j;
}

ReviewService::ReviewService(RecordStore& store, std::vector<Dataset> datasets)
    : store_(store), datasets_(std::move(datasets)) {}

RecordPage ReviewService::list_records(std::optional<Stage> stage,
                                       std::optional<RecordStatus> status,
                                       std::size_t page,
                                       std::size_t page_size) const {
  if (page_size < 1 || page_size > kMaxPageSize) {
    throw ValidationError("page_size must be in [1, 500]");
  }
  if (page < 1) throw ValidationError("page must be >= 1");
  std::vector<RefinementRecord> all = store_.snapshot();
  std::erase_if(all, [&](const RefinementRecord& r) {
    return (stage && r.stage != *stage) || (status && r.status != *status);
  });
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.created_at != b.created_at) return a.created_at < b.created_at;
    return a.id < b.id;
  });
  RecordPage out;
  out.total = all.size();
  out.page = page;
  out.page_size = page_size;
  const std::size_t begin = std::min(all.size(), (page - 1) * page_size);
  const std::size_t end = std::min(all.size(), begin + page_size);
  out.records.assign(std::make_move_iterator(all.begin() + begin),
                     std::make_move_iterator(all.begin() + end));
  return out;
}

RefinementRecord ReviewService::submit_decision(const Decision& d) {
  if (d.expected_status != RecordStatus::Pending) {
    throw ValidationError("expected_status must be PENDING");
  }
  return store_.update(d.record_id, [&](const RefinementRecord& current) {
    return decide(current, d.action, d.final_text, d.reviewer_note);
  });
}

Progress ReviewService::progress(std::optional<Stage> stage) const {
  Progress p;
  for (const auto& r : store_.snapshot()) {
    if (stage && r.stage != *stage) continue;
    switch (r.status) {
      case RecordStatus::Pending: ++p.pending; break;
      case RecordStatus::Accepted: ++p.accepted; break;
      case RecordStatus::Edited: ++p.edited; break;
      case RecordStatus::Rejected: ++p.rejected; break;
      case RecordStatus::Failed: ++p.failed; break;
    }
  }
  p.total = p.pending + p.accepted + p.edited + p.rejected + p.failed;
  return p;
}

const QAPair* ReviewService::find_pair(const std::string& id) const {
  for (const auto& ds : datasets_) {
    if (const QAPair* p = ds.find(id)) return p;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                const std::string& message) {
  send_json(res, status, ordered_json{{"code", code}, {"message", message}});
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFoundError& e) {
    send_error(res, 404, "not_found", e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, "conflict", e.what());
  } catch (const ValidationError& e) {
    send_error(res, 422, "invalid", e.what());
  } catch (const ParseError& e) {
    send_error(res, 422, "invalid", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

std::size_t size_param(const httplib::Request& req, const char* name,
                       std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ValidationError(std::string("bad ") + name + " '" + v + "'");
  }
  return out;
}

std::optional<Stage> stage_param(const httplib::Request& req) {
  if (!req.has_param("stage") || req.get_param_value("stage").empty()) {
    return std::nullopt;
  }
  return parse_stage(req.get_param_value("stage"));
}

}  // namespace

ReviewServer::ReviewServer(ReviewService& service,
                           std::optional<std::filesystem::path> static_dir)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  srv.Get("/api/records", [this](const httplib::Request& req,
                                 httplib::Response& res) {
    guarded(res, [&] {
      std::optional<RecordStatus> status;
      if (req.has_param("status") && !req.get_param_value("status").empty()) {
        status = parse_status(req.get_param_value("status"));
      }
      const RecordPage page = service_.list_records(
          stage_param(req), status, size_param(req, "page", 1),
          size_param(req, "page_size", 50));
      ordered_json rows = ordered_json::array();
      for (const auto& r : page.records) rows.push_back(to_json(r));
      send_json(res, 200,
                ordered_json{{"records", std::move(rows)},
                             {"total", page.total},
                             {"page", page.page},
                             {"page_size", page.page_size}});
    });
  });

  srv.Post(R"(/api/records/([^/]+)/decision)",
           [this](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               json body;
               try {
                 body = json::parse(req.body);
               } catch (const json::exception& e) {
                 throw ValidationError(std::string("body is not JSON: ") +
                                       e.what());
               }
               const Decision d = decision_from_json(req.matches[1], body);
               send_json(res, 200, to_json(service_.submit_decision(d)));
             });
           });

  srv.Get("/api/progress", [this](const httplib::Request& req,
                                  httplib::Response& res) {
    guarded(res, [&] {
      send_json(res, 200, to_json(service_.progress(stage_param(req))));
    });
  });

  srv.Get(R"(/api/pairs/([^/]+))",
          [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              const QAPair* p = service_.find_pair(req.matches[1]);
              if (p == nullptr) {
                throw NotFoundError("no pair '" + std::string(req.matches[1]) +
                                    "'");
              }
              send_json(res, 200, to_json(*p));
            });
          });

  if (static_dir && std::filesystem::is_directory(*static_dir)) {
    srv.set_mount_point("/", static_dir->string());
  }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool ReviewServer::listen_after_bind() { return server_->listen_after_bind(); }

void ReviewServer::stop() {
  if (server_) server_->stop();
}

void ReviewServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace shqa
