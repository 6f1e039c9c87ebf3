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

// Visual Turing test analysis. Guesses are encoded 1 = "real",
// 0 = "generated", so per-class sample means estimate
// P(participant guesses real | truth class).

#include <json.hpp>

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "genimg_eval/error.hpp"
#include "genimg_eval/stat_tests.hpp"

namespace genimg_eval {

enum class Label { kReal, kGenerated };

inline std::string to_string(Label l) { return l == Label::kReal ? "real" : "generated"; }

inline Label parse_label(const std::string& s) {
  if (s == "real") return Label::kReal;
  if (s == "generated") return Label::kGenerated;
  throw ValidationError("expected 'real' or 'generated', found '" + s + "'");
}

struct VttResponse {
  std::string participant;
  std::string image;
  Label truth = Label::kReal;
  Label guess = Label::kReal;
  int likert = 1;  // 1 not at all, 2 somewhat, 3 very realistic
  std::string timestamp;

  bool operator==(const VttResponse&) const = default;
};

struct VttStudy {
  std::string study_id;
  std::vector<VttResponse> responses;
};

inline const std::vector<std::string>& response_csv_columns() {
  static const std::vector<std::string> cols{"participant_id", "image_id", "ground_truth",
                                             "guess",          "likert",   "timestamp_utc_iso8601"};
  return cols;
}

inline void write_responses_csv_header(std::ostream& out) {
  const auto& cols = response_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

inline void write_response_row(std::ostream& out, const VttResponse& r) {
  out << r.participant << ',' << r.image << ',' << to_string(r.truth) << ',' << to_string(r.guess) << ',' << r.likert
      << ',' << r.timestamp << '\n';
}

// Checks study-wide invariants: likert range, unique (participant, image),
// and one truth label per image.
inline void validate_study(const VttStudy& study) {
  std::set<std::pair<std::string, std::string>> seen;
  std::map<std::string, Label> truth_of;
  for (std::size_t i = 0; i < study.responses.size(); ++i) {
    const auto& r = study.responses[i];
    const std::string at = study.study_id + ": response " + std::to_string(i);
    if (r.likert < 1 || r.likert > 3) throw ValidationError(at + ": likert must be 1, 2 or 3");
    if (!seen.emplace(r.participant, r.image).second) {
      throw ValidationError(at + ": duplicate response for (" + r.participant + ", " + r.image + ")");
    }
    auto [it, inserted] = truth_of.emplace(r.image, r.truth);
    if (!inserted && it->second != r.truth) {
      throw ValidationError(at + ": image " + r.image + " has conflicting ground truth labels");
    }
  }
}

// Parses the response CSV. Errors carry the 1-based line number.
inline VttStudy parse_responses_csv(std::istream& in, const std::string& study_id, const std::string& where) {
  static const std::regex ts_re(R"(^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]00:00)$)");
  VttStudy study{study_id, {}};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (line.back() == ',') f.emplace_back();
    const std::string at = where + ": row " + std::to_string(line_no);
    if (!header_seen) {
      if (f != response_csv_columns()) {
        throw ValidationError(at + ": expected header participant_id,image_id,ground_truth,guess,likert,"
                                   "timestamp_utc_iso8601");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 6) throw ValidationError(at + ": expected 6 fields, found " + std::to_string(f.size()));
    VttResponse r;
    r.participant = f[0];
    r.image = f[1];
    if (r.participant.empty()) throw ValidationError(at + ": empty participant_id");
    if (r.image.empty()) throw ValidationError(at + ": empty image_id");
    try {
      r.truth = parse_label(f[2]);
    } catch (const ValidationError& e) {
      throw ValidationError(at + ": ground_truth: " + e.what());
    }
    try {
      r.guess = parse_label(f[3]);
    } catch (const ValidationError& e) {
      throw ValidationError(at + ": guess: " + e.what());
    }
    if (f[4] != "1" && f[4] != "2" && f[4] != "3") {
      throw ValidationError(at + ": likert must be 1, 2 or 3, found '" + f[4] + "'");
    }
    r.likert = f[4][0] - '0';
    if (!std::regex_match(f[5], ts_re)) {
      throw ValidationError(at + ": timestamp_utc_iso8601 is not a UTC ISO-8601 time: '" + f[5] + "'");
    }
    r.timestamp = f[5];
    study.responses.push_back(std::move(r));
  }
  if (!header_seen) throw ValidationError(where + ": empty file");
  validate_study(study);
  return study;
}

inline VttStudy load_responses_csv(const std::string& path, const std::string& study_id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_responses_csv(in, study_id, path);
}

struct ParticipantRates {
  std::string participant;
  double fpr = 0.0;  // % of generated images guessed real
  double tpr = 0.0;  // % of real images guessed real
  double mean_likert_real = 0.0;
  double mean_likert_generated = 0.0;
  std::size_t n_real = 0;
  std::size_t n_generated = 0;

  bool operator==(const ParticipantRates&) const = default;
};

struct StudyRates {
  double fpr = 0.0;  // unweighted mean over participants, %
  double fnr = 0.0;  // 100 - mean TPR, %
  std::vector<ParticipantRates> per_participant;  // sorted by participant id
};

namespace detail {

struct Tally {
  std::size_t real = 0, generated = 0;
  std::size_t real_guessed_real = 0, generated_guessed_real = 0;
  double likert_real = 0.0, likert_generated = 0.0;
};

inline std::map<std::string, Tally> tally(const VttStudy& study) {
  std::map<std::string, Tally> t;
  for (const auto& r : study.responses) {
    auto& p = t[r.participant];
    const bool said_real = r.guess == Label::kReal;
    if (r.truth == Label::kReal) {
      ++p.real;
      p.real_guessed_real += said_real;
      p.likert_real += r.likert;
    } else {
      ++p.generated;
      p.generated_guessed_real += said_real;
      p.likert_generated += r.likert;
    }
  }
  return t;
}

}  // namespace detail

inline StudyRates rates(const VttStudy& study) {
  StudyRates out;
  const auto t = detail::tally(study);
  if (t.empty()) throw ValidationError(study.study_id + ": study has no responses");
  double fpr_sum = 0.0, tpr_sum = 0.0;
  for (const auto& [id, p] : t) {
    if (p.real == 0 || p.generated == 0) {
      throw ValidationError(study.study_id + ": participant " + id + " saw no " +
                            (p.real == 0 ? "real" : "generated") + " images");
    }
    ParticipantRates pr;
    pr.participant = id;
    pr.n_real = p.real;
    pr.n_generated = p.generated;
    pr.fpr = 100.0 * static_cast<double>(p.generated_guessed_real) / static_cast<double>(p.generated);
    pr.tpr = 100.0 * static_cast<double>(p.real_guessed_real) / static_cast<double>(p.real);
    pr.mean_likert_real = p.likert_real / static_cast<double>(p.real);
    pr.mean_likert_generated = p.likert_generated / static_cast<double>(p.generated);
    fpr_sum += pr.fpr;
    tpr_sum += pr.tpr;
    out.per_participant.push_back(std::move(pr));
  }
  const double k = static_cast<double>(out.per_participant.size());
  out.fpr = fpr_sum / k;
  out.fnr = 100.0 - tpr_sum / k;
  return out;
}

// Mean over participants of (mean rating of real - mean rating of generated).
inline double likert_difference(const VttStudy& study) {
  const auto r = rates(study);
  double sum = 0.0;
  for (const auto& p : r.per_participant) sum += p.mean_likert_real - p.mean_likert_generated;
  return sum / static_cast<double>(r.per_participant.size());
}

// H0: P(p guesses real | generated) = P(p guesses real | real). First sample
// is the participant's predictions on generated images, second on real.
inline TestResult participant_hypothesis_test(const VttStudy& study, const std::string& participant,
                                              double alpha = 0.10, TTestVariant variant = TTestVariant::kPooled) {
  std::vector<double> on_generated, on_real;
  for (const auto& r : study.responses) {
    if (r.participant != participant) continue;
    const double said_real = r.guess == Label::kReal ? 1.0 : 0.0;
    (r.truth == Label::kGenerated ? on_generated : on_real).push_back(said_real);
  }
  if (on_generated.size() < 2 || on_real.size() < 2) {
    throw ValidationError(study.study_id + ": participant " + participant +
                          " needs at least 2 responses per truth class for a hypothesis test");
  }
  return two_sample_t_test(on_generated, on_real, Alternative::kTwoSided, alpha, variant);
}

// H0: a random participant is equally likely to call generated and real
// images real. First sample is participant FPRs, second participant TPRs.
inline TestResult group_hypothesis_test(const VttStudy& study, double alpha = 0.10,
                                        TTestVariant variant = TTestVariant::kPooled) {
  const auto r = rates(study);
  if (r.per_participant.size() < 2) {
    throw ValidationError(study.study_id + ": group hypothesis test needs at least 2 participants");
  }
  std::vector<double> fprs, tprs;
  for (const auto& p : r.per_participant) {
    fprs.push_back(p.fpr);
    tprs.push_back(p.tpr);
  }
  return two_sample_t_test(fprs, tprs, Alternative::kTwoSided, alpha, variant);
}

// KS test on pooled Likert ratings of real vs generated images.
inline TestResult likert_ks(const VttStudy& study, double alpha = 0.10) {
  std::vector<double> real, generated;
  for (const auto& r : study.responses) (r.truth == Label::kReal ? real : generated).push_back(r.likert);
  if (real.empty() || generated.empty()) {
    throw ValidationError(study.study_id + ": Likert KS test needs ratings in both truth classes");
  }
  return ks_two_sample(real, generated, alpha);
}

struct VttOptions {
  double alpha_t = 0.10;
  double alpha_ks = 0.10;
  TTestVariant variant = TTestVariant::kPooled;
};

struct VttStats {
  std::string study_id;
  double fpr = 0.0;
  double fnr = 0.0;
  std::vector<ParticipantRates> per_participant;
  double likert_diff = 0.0;
  std::optional<TestResult> group_test;  // needs >= 2 participants
  TestResult ks_test;
  // Per-participant tests, for participants with >= 2 responses per class.
  std::map<std::string, TestResult> participant_tests;

  bool operator==(const VttStats&) const = default;
};

inline VttStats analyze_study(const VttStudy& study, const VttOptions& options = {}) {
  validate_study(study);
  VttStats s;
  s.study_id = study.study_id;
  const auto r = rates(study);
  s.fpr = r.fpr;
  s.fnr = r.fnr;
  s.per_participant = r.per_participant;
  s.likert_diff = likert_difference(study);
  if (r.per_participant.size() >= 2) s.group_test = group_hypothesis_test(study, options.alpha_t, options.variant);
  s.ks_test = likert_ks(study, options.alpha_ks);
  for (const auto& p : r.per_participant) {
    if (p.n_real >= 2 && p.n_generated >= 2) {
      s.participant_tests[p.participant] =
          participant_hypothesis_test(study, p.participant, options.alpha_t, options.variant);
    }
  }
  return s;
}

inline void to_json(nlohmann::json& j, const ParticipantRates& p) {
  j = nlohmann::json{{"participant", p.participant},
                     {"fpr", p.fpr},
                     {"tpr", p.tpr},
                     {"mean_likert_real", p.mean_likert_real},
                     {"mean_likert_generated", p.mean_likert_generated},
                     {"n_real", p.n_real},
                     {"n_generated", p.n_generated}};
}

inline void from_json(const nlohmann::json& j, ParticipantRates& p) {
  p.participant = j.at("participant").get<std::string>();
  p.fpr = j.at("fpr").get<double>();
  p.tpr = j.at("tpr").get<double>();
  p.mean_likert_real = j.at("mean_likert_real").get<double>();
  p.mean_likert_generated = j.at("mean_likert_generated").get<double>();
  p.n_real = j.at("n_real").get<std::size_t>();
  p.n_generated = j.at("n_generated").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const VttStats& s) {
  j = nlohmann::json{{"study_id", s.study_id},
                     {"fpr", s.fpr},
                     {"fnr", s.fnr},
                     {"per_participant", s.per_participant},
                     {"likert_diff", s.likert_diff},
                     {"group_test", s.group_test ? nlohmann::json(*s.group_test) : nlohmann::json(nullptr)},
                     {"ks_test", s.ks_test},
                     {"participant_tests", s.participant_tests}};
}

inline void from_json(const nlohmann::json& j, VttStats& s) {
  s.study_id = j.at("study_id").get<std::string>();
  s.fpr = j.at("fpr").get<double>();
  s.fnr = j.at("fnr").get<double>();
  s.per_participant = j.at("per_participant").get<std::vector<ParticipantRates>>();
  s.likert_diff = j.at("likert_diff").get<double>();
  if (!j.at("group_test").is_null()) s.group_test = j.at("group_test").get<TestResult>();
  s.ks_test = j.at("ks_test").get<TestResult>();
  s.participant_tests = j.at("participant_tests").get<std::map<std::string, TestResult>>();
}

}  // namespace genimg_eval
