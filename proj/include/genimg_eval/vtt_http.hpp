/*
 * Copyright 2026 The genimg-eval Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// HTTP binding for the session store.

// httplib pulls in <resolv.h>, whose _res macro breaks Eigen headers parsed
// after it; Eigen goes first.
#include <Eigen/Core>
#include <httplib.h>
#include <json.hpp>

#include <fstream>
#include <iterator>
#include <string>

#include "genimg_eval/vtt_service.hpp"

namespace genimg_eval::vtt {

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw ServiceError(400, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(400, std::string("malformed JSON body: ") + e.what());
  }
}

inline int parse_index(const std::string& s) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size() || v > 1'000'000) throw std::out_of_range("index");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ServiceError(404, "no item " + s);
  }
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      nlohmann::json body = e.extra();
      body["error"] = e.what();
      send_json(res, e.status(), body);
    } catch (const ValidationError& e) {
      send_json(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}});
    }
  };
}

}  // namespace detail

inline void bind_routes(httplib::Server& server, SessionStore& store) {
  using detail::guarded;
  using detail::send_json;

  server.Post(R"(/studies/([^/]+)/sessions)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
                auto body = detail::parse_body(req);
                if (!body.contains("participant") || !body["participant"].is_string()) {
                  throw ServiceError(400, "participant (string) is required");
                }
                std::optional<std::uint64_t> seed;
                if (body.contains("seed") && !body["seed"].is_null()) {
                  if (!body["seed"].is_number_unsigned()) throw ServiceError(400, "seed must be a non-negative integer");
                  seed = body["seed"].get<std::uint64_t>();
                }
                auto view = store.create_session(req.matches[1], body["participant"].get<std::string>(), seed);
                send_json(res, 201, view.to_json());
              }));

  server.Get(R"(/sessions/([0-9a-f]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, store.view(req.matches[1]).to_json());
             }));

  server.Get(R"(/sessions/([0-9a-f]+)/items/([0-9]+)/image)",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               auto ref = store.image(req.matches[1], detail::parse_index(req.matches[2]));
               std::ifstream in(ref.path, std::ios::binary);
               if (!in) throw ServiceError(500, "image for item " + std::string(req.matches[2]) + " is unreadable");
               std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
               res.status = 200;
               res.set_header("Cache-Control", "no-store");
               res.set_content(std::move(bytes), ref.content_type);
             }));

  server.Post(R"(/sessions/([0-9a-f]+)/items/([0-9]+)/response)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                auto body = detail::parse_body(req);
                if (!body.contains("guess") || !body["guess"].is_string()) {
                  throw ServiceError(400, "guess (string) is required");
                }
                if (!body.contains("likert") || !body["likert"].is_number_integer()) {
                  throw ServiceError(400, "likert (integer 1-3) is required");
                }
                const int index = detail::parse_index(req.matches[2]);
                const auto answered = store.record_response(req.matches[1], index, body["guess"].get<std::string>(),
                                                            body["likert"].get<int>());
                send_json(res, 200, {{"ok", true}, {"index", index}, {"answered_count", answered}});
              }));

  server.Post(R"(/sessions/([0-9a-f]+)/complete)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                auto summary = store.complete_session(req.matches[1]);
                send_json(res, 200, {{"session_id", summary.session_id}, {"state", "complete"}, {"rows", summary.rows}});
              }));

  server.Get(R"(/studies/([^/]+)/export)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
               res.status = 200;
               res.set_content(store.export_study(req.matches[1]), "text/csv");
             }));

  if (store.config().static_dir) {
    if (!server.set_mount_point("/", store.config().static_dir->string())) {
      throw ValidationError("static_dir " + store.config().static_dir->string() + " is not a directory");
    }
  }
}

}  // namespace genimg_eval::vtt
