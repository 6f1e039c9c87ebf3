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

// Administers visual Turing test sessions. Every state change is appended
// to a per-session JSON-lines journal and fsync'ed before it is
// acknowledged; on start-up the store replays all journals. Ground truth
// lives only in the journal and in exported CSVs of completed sessions.

#include <fcntl.h>
#include <unistd.h>

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "genimg_eval/error.hpp"
#include "genimg_eval/rng.hpp"
#include "genimg_eval/vtt_analysis.hpp"

namespace genimg_eval::vtt {

namespace fs = std::filesystem;

// Error carrying the HTTP status it maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& msg, nlohmann::json extra = nlohmann::json::object())
      : std::runtime_error(msg), status_(status), extra_(std::move(extra)) {}
  int status() const { return status_; }
  const nlohmann::json& extra() const { return extra_; }

 private:
  int status_;
  nlohmann::json extra_;
};

struct StudyConfig {
  std::string study_id;
  fs::path real_dir;
  fs::path generated_dir;
  int images_per_class = 10;
};

struct ServiceConfig {
  fs::path data_dir;
  std::optional<fs::path> static_dir;
  std::vector<StudyConfig> studies;
};

// {"data_dir": ..., "static_dir": ..., "studies": [{"study_id", "real_dir",
// "generated_dir", "images_per_class"}]}; relative paths resolve against
// the config file's directory.
inline ServiceConfig parse_service_config(const nlohmann::json& j, const fs::path& base,
                                          const std::string& where = "config") {
  ServiceConfig c;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  try {
    c.data_dir = resolve(j.at("data_dir").get<std::string>());
    if (j.contains("static_dir") && !j["static_dir"].is_null()) c.static_dir = resolve(j["static_dir"].get<std::string>());
    for (const auto& s : j.at("studies")) {
      StudyConfig sc;
      sc.study_id = s.at("study_id").get<std::string>();
      sc.real_dir = resolve(s.at("real_dir").get<std::string>());
      sc.generated_dir = resolve(s.at("generated_dir").get<std::string>());
      sc.images_per_class = s.value("images_per_class", 10);
      if (sc.study_id.empty()) throw ValidationError(where + ": empty study_id");
      if (sc.images_per_class < 1) throw ValidationError(where + ": study " + sc.study_id + ": images_per_class < 1");
      c.studies.push_back(std::move(sc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return c;
}

inline ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return parse_service_config(j, fs::absolute(path).parent_path(), path);
}

inline std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

inline std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

inline std::string content_type_for(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const std::map<std::string, std::string> types{
      {".png", "image/png"},   {".jpg", "image/jpeg"}, {".jpeg", "image/jpeg"}, {".gif", "image/gif"},
      {".bmp", "image/bmp"},   {".webp", "image/webp"}, {".tif", "image/tiff"}, {".tiff", "image/tiff"},
      {".svg", "image/svg+xml"}};
  auto it = types.find(ext);
  return it == types.end() ? "application/octet-stream" : it->second;
}

// Appends one line and fsyncs before returning.
inline void append_durable(const fs::path& path, const std::string& line) {
  const bool is_new = !fs::exists(path);
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw IoError("cannot open journal " + path.string() + ": " + std::strerror(errno));
  const std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw IoError("write to journal " + path.string() + " failed: " + std::strerror(err));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const int err = errno;
    ::close(fd);
    throw IoError("fsync of journal " + path.string() + " failed: " + std::strerror(err));
  }
  ::close(fd);
  if (is_new) {
    const int dfd = ::open(path.parent_path().c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dfd >= 0) {
      ::fsync(dfd);
      ::close(dfd);
    }
  }
}

struct SessionItem {
  int index = 0;
  fs::path image;
  Label truth = Label::kReal;
  std::string image_id;  // "<class>/<filename>", used in exported rows
};

struct Answer {
  Label guess = Label::kReal;
  int likert = 1;
  std::string timestamp;
};

struct Session {
  std::string session_id;
  std::string study_id;
  std::string participant;
  std::uint64_t seed = 0;
  std::vector<SessionItem> items;
  std::map<int, Answer> responses;
  bool complete = false;
  mutable std::mutex mu;  // serializes requests within the session
};

// What a participant's client may see. Carries no truth labels.
struct ClientView {
  std::string session_id;
  std::size_t item_count = 0;
  std::vector<int> answered;
  bool complete = false;

  nlohmann::json to_json() const {
    std::vector<int> indices(item_count);
    for (std::size_t i = 0; i < item_count; ++i) indices[i] = static_cast<int>(i);
    return {{"session_id", session_id},
            {"item_count", item_count},
            {"indices", indices},
            {"answered", answered},
            {"state", complete ? "complete" : "open"}};
  }
};

struct ImageRef {
  fs::path path;
  std::string content_type;
};

class SessionStore {
 public:
  using Clock = std::function<std::string()>;
  using Entropy = std::function<std::uint64_t()>;

  explicit SessionStore(ServiceConfig config, Clock clock = utc_now_iso8601, Entropy entropy = random_seed)
      : config_(std::move(config)), clock_(std::move(clock)), entropy_(std::move(entropy)) {
    for (const auto& s : config_.studies) studies_[s.study_id] = s;
    fs::create_directories(sessions_dir());
    fs::create_directories(config_.data_dir / "studies");
    replay();
  }

  const ServiceConfig& config() const { return config_; }

  ClientView create_session(const std::string& study_id, const std::string& participant,
                            std::optional<std::uint64_t> seed = std::nullopt) {
    if (participant.empty()) throw ServiceError(400, "participant must be non-empty");
    if (participant.find_first_of(",\n\r") != std::string::npos) {
      throw ServiceError(400, "participant may not contain commas or line breaks");
    }
    const StudyConfig& study = find_study(study_id);

    std::unique_lock lock(map_mu_);
    for (const auto& [id, s] : sessions_) {
      std::lock_guard sl(s->mu);
      if (s->study_id == study_id && s->participant == participant && !s->complete) {
        throw ServiceError(409, "participant " + participant + " already has an open session for " + study_id,
                           {{"session_id", id}});
      }
    }

    auto session = std::make_shared<Session>();
    session->study_id = study_id;
    session->participant = participant;
    session->seed = seed ? *seed : entropy_();
    session->items = sample_items(study, participant, session->seed);
    do {
      session->session_id = new_session_id();
    } while (sessions_.contains(session->session_id));

    nlohmann::json items = nlohmann::json::array();
    for (const auto& it : session->items) {
      items.push_back({{"index", it.index}, {"image", it.image.string()}, {"image_id", it.image_id},
                       {"truth", to_string(it.truth)}});
    }
    append_durable(journal_path(session->session_id),
                   nlohmann::json{{"event", "create"},
                                  {"session_id", session->session_id},
                                  {"study_id", study_id},
                                  {"participant", participant},
                                  {"seed", session->seed},
                                  {"items", items},
                                  {"time", clock_()}}
                       .dump());
    sessions_[session->session_id] = session;
    return view_locked(*session);
  }

  ClientView view(const std::string& session_id) const {
    auto s = find_session(session_id);
    std::lock_guard sl(s->mu);
    return view_locked(*s);
  }

  ImageRef image(const std::string& session_id, int index) const {
    auto s = find_session(session_id);
    std::lock_guard sl(s->mu);
    const auto& item = item_at(*s, index);
    return {item.image, content_type_for(item.image)};
  }

  // Returns the number of answered items after recording.
  std::size_t record_response(const std::string& session_id, int index, const std::string& guess, int likert) {
    auto s = find_session(session_id);
    std::lock_guard sl(s->mu);
    if (s->complete) throw ServiceError(409, "session " + session_id + " is already complete");
    item_at(*s, index);
    Label g;
    try {
      g = parse_label(guess);
    } catch (const ValidationError& e) {
      throw ServiceError(400, std::string("guess: ") + e.what());
    }
    if (likert < 1 || likert > 3) throw ServiceError(400, "likert must be 1, 2 or 3");

    const bool revision = s->responses.contains(index);
    const std::string now = clock_();
    append_durable(journal_path(session_id), nlohmann::json{{"event", "response"},
                                                            {"index", index},
                                                            {"guess", to_string(g)},
                                                            {"likert", likert},
                                                            {"revision", revision},
                                                            {"time", now}}
                                                 .dump());
    s->responses[index] = Answer{g, likert, now};
    return s->responses.size();
  }

  struct CompletionSummary {
    std::string session_id;
    std::size_t rows = 0;
  };

  CompletionSummary complete_session(const std::string& session_id) {
    auto s = find_session(session_id);
    std::lock_guard sl(s->mu);
    if (s->complete) throw ServiceError(409, "session " + session_id + " is already complete");
    std::vector<int> missing;
    for (const auto& it : s->items)
      if (!s->responses.contains(it.index)) missing.push_back(it.index);
    if (!missing.empty()) {
      std::string list;
      for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? "," : "") + std::to_string(missing[i]);
      throw ServiceError(409, "session " + session_id + " is incomplete; unanswered indices: " + list,
                         {{"missing", missing}});
    }
    append_durable(journal_path(session_id), nlohmann::json{{"event", "complete"}, {"time", clock_()}}.dump());
    s->complete = true;

    std::ostringstream rows;
    for (const auto& r : rows_locked(*s)) write_response_row(rows, r);
    const fs::path csv = study_dir(s->study_id) / "responses.csv";
    fs::create_directories(csv.parent_path());
    if (!fs::exists(csv)) {
      std::ostringstream header;
      write_responses_csv_header(header);
      append_durable(csv, header.str().substr(0, header.str().size() - 1));
    }
    std::string body = rows.str();
    if (!body.empty()) body.pop_back();
    append_durable(csv, body);
    return {session_id, s->items.size()};
  }

  // All complete sessions of a study as response CSV, ordered by
  // (participant, index).
  std::string export_study(const std::string& study_id) const {
    find_study(study_id);
    std::vector<std::pair<std::string, std::vector<VttResponse>>> by_participant;
    {
      std::shared_lock lock(map_mu_);
      for (const auto& [id, s] : sessions_) {
        std::lock_guard sl(s->mu);
        if (s->study_id == study_id && s->complete) by_participant.emplace_back(s->participant, rows_locked(*s));
      }
    }
    if (by_participant.empty()) throw ServiceError(404, "study " + study_id + " has no complete sessions");
    std::stable_sort(by_participant.begin(), by_participant.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::ostringstream out;
    write_responses_csv_header(out);
    for (const auto& [p, rows] : by_participant)
      for (const auto& r : rows) write_response_row(out, r);
    return out.str();
  }

 private:
  fs::path sessions_dir() const { return config_.data_dir / "sessions"; }
  fs::path journal_path(const std::string& id) const { return sessions_dir() / (id + ".jsonl"); }

  static std::string encode_component(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
      if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
        out.push_back(static_cast<char>(c));
      } else {
        char buf[4];
        std::snprintf(buf, sizeof(buf), "%%%02X", c);
        out += buf;
      }
    }
    return out;
  }

  fs::path study_dir(const std::string& study_id) const {
    return config_.data_dir / "studies" / encode_component(study_id);
  }

  const StudyConfig& find_study(const std::string& study_id) const {
    auto it = studies_.find(study_id);
    if (it == studies_.end()) throw ServiceError(404, "unknown study " + study_id);
    return it->second;
  }

  std::shared_ptr<Session> find_session(const std::string& id) const {
    std::shared_lock lock(map_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
    return it->second;
  }

  static const SessionItem& item_at(const Session& s, int index) {
    if (index < 0 || static_cast<std::size_t>(index) >= s.items.size()) {
      throw ServiceError(404, "session " + s.session_id + " has no item " + std::to_string(index));
    }
    return s.items[static_cast<std::size_t>(index)];
  }

  static ClientView view_locked(const Session& s) {
    ClientView v{s.session_id, s.items.size(), {}, s.complete};
    for (const auto& [i, a] : s.responses) v.answered.push_back(i);
    return v;
  }

  static std::vector<VttResponse> rows_locked(const Session& s) {
    std::vector<VttResponse> rows;
    for (const auto& it : s.items) {
      const auto& a = s.responses.at(it.index);
      rows.push_back({s.participant, it.image_id, it.truth, a.guess, a.likert, a.timestamp});
    }
    return rows;
  }

  std::string new_session_id() {
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(entropy_()),
                  static_cast<unsigned long long>(entropy_()));
    return buf;
  }

  static std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
      if (!e.is_regular_file()) continue;
      if (e.path().filename().string().starts_with(".")) continue;
      files.push_back(e.path());
    }
    if (ec) throw ServiceError(500, "cannot list " + dir.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    return files;
  }

  static std::vector<SessionItem> sample_items(const StudyConfig& study, const std::string& participant,
                                               std::uint64_t seed) {
    Rng rng(mix_seed(seed, study.study_id + '\x1f' + participant));
    const auto k = static_cast<std::size_t>(study.images_per_class);
    std::vector<SessionItem> items;
    for (const auto& [dir, truth] : {std::pair{study.real_dir, Label::kReal}, std::pair{study.generated_dir, Label::kGenerated}}) {
      auto files = list_images(dir);
      if (files.size() < k) {
        throw ServiceError(409, "study " + study.study_id + ": " + dir.string() + " holds " +
                                    std::to_string(files.size()) + " images, need " + std::to_string(k));
      }
      // Partial Fisher-Yates: the first k slots become a uniform sample.
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, files.size() - i));
        std::swap(files[i], files[j]);
      }
      for (std::size_t i = 0; i < k; ++i) {
        items.push_back({0, files[i], truth, to_string(truth) + "/" + files[i].filename().string()});
      }
    }
    shuffle(std::span<SessionItem>(items), rng);
    for (std::size_t i = 0; i < items.size(); ++i) items[i].index = static_cast<int>(i);
    return items;
  }

  void replay() {
    std::vector<fs::path> journals;
    for (const auto& e : fs::directory_iterator(sessions_dir()))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") journals.push_back(e.path());
    std::sort(journals.begin(), journals.end());
    for (const auto& path : journals) {
      std::ifstream in(path);
      auto s = std::make_shared<Session>();
      std::string line;
      bool created = false;
      while (std::getline(in, line)) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
          break;  // torn final write: never acknowledged
        }
        const std::string ev = j.value("event", "");
        if (ev == "create") {
          s->session_id = j.at("session_id").get<std::string>();
          s->study_id = j.at("study_id").get<std::string>();
          s->participant = j.at("participant").get<std::string>();
          s->seed = j.at("seed").get<std::uint64_t>();
          for (const auto& it : j.at("items")) {
            s->items.push_back({it.at("index").get<int>(), fs::path(it.at("image").get<std::string>()),
                                parse_label(it.at("truth").get<std::string>()), it.at("image_id").get<std::string>()});
          }
          created = true;
        } else if (created && ev == "response") {
          s->responses[j.at("index").get<int>()] = Answer{parse_label(j.at("guess").get<std::string>()),
                                                          j.at("likert").get<int>(), j.at("time").get<std::string>()};
        } else if (created && ev == "complete") {
          s->complete = true;
        }
      }
      if (created) sessions_[s->session_id] = s;
    }
  }

  ServiceConfig config_;
  Clock clock_;
  Entropy entropy_;
  std::map<std::string, StudyConfig> studies_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace genimg_eval::vtt
