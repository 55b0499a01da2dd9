#pragma once

#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "kara/core.hpp"
#include "kara/reference_lok.hpp"

namespace kara::testing {

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fixture " + path);
  return json::parse(in);
}

inline std::string fixture_path(const std::string& name) { return std::string(KARA_FIXTURE_DIR) + "/" + name; }

inline Questionnaire case_study_questionnaire() {
  return load_json(fixture_path("case_study.json"))["questionnaires"][0].get<Questionnaire>();
}

inline std::map<Id, Characterization> case_study_rows() {
  std::map<Id, Characterization> out;
  const auto doc = load_json(fixture_path("case_study.json"));
  for (const auto& c : doc["characterizations"])
    out[c["id"].get<Id>()] = c.get<Characterization>();
  return out;
}

// Rows A-E of the published one-hot table, transcribed bit for bit.
inline const std::map<Id, std::vector<int>>& published_vectors() {
  static const std::map<Id, std::vector<int>> rows = {
      {"A", {1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0}},
      {"B", {0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1}},
      {"C", {0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0}},
      {"D", {0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0}},
      {"E", {0, 1, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0}},
  };
  return rows;
}

inline std::vector<int> bits_of(const OneHotVector& v) { return {v.bits.begin(), v.bits.end()}; }

/// 50 random case-study characterizations (each question answered with
/// probability 0.8) whose LOK is the fraction of set bits in the first
/// question block.
inline std::vector<TrainingExample> synthetic_training_set(std::size_t n = 50, unsigned seed = 20240607) {
  const auto q = case_study_questionnaire();
  std::mt19937 rng(seed);
  std::bernoulli_distribution answered(0.8);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Characterization c;
    c.id = "s" + std::to_string(100 + i);
    c.risk_factor_id = q.risk_factor_id;
    for (const auto& question : q.questions) {
      if (!answered(rng)) continue;
      std::uniform_int_distribution<std::size_t> pick(0, question.options.size() - 1);
      c.answers[question.id] = question.options[pick(rng)].id;
    }
    auto v = encode_one_hot(c, q);
    const auto block = q.questions.front().options.size();
    double set = 0;
    for (std::size_t b = 0; b < block; ++b) set += v.bits[b];
    out.push_back({c.id, v, set / static_cast<double>(block)});
  }
  return out;
}

}  // namespace kara::testing
