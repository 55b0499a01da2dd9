#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kara/core.hpp"

namespace kara {

struct OneHotVector {
  std::string layout_id;
  std::vector<std::uint8_t> bits;

  friend bool operator==(const OneHotVector&, const OneHotVector&) = default;
};

/// One block per question in questionnaire order, one bit per option.
/// Unanswered questions leave their block all zero.
OneHotVector encode_one_hot(const Characterization& c, const Questionnaire& q);

std::size_t hamming_distance(const OneHotVector& a, const OneHotVector& b);

/// 1 - hamming / width.
double similarity(const OneHotVector& a, const OneHotVector& b);

struct TrainingExample {
  Id characterization_id;
  OneHotVector vector;
  double lok = 0.0;

  friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

enum class ModelKind { knn, linear };

struct ModelCandidate {
  ModelKind kind = ModelKind::knn;
  int k = 1;                       // knn only
  bool distance_weighted = false;  // knn only
  double ridge = 0.0;              // linear only

  std::string name() const;
  friend bool operator==(const ModelCandidate&, const ModelCandidate&) = default;
};

/// Fixed candidate order; earlier candidates win CV ties.
const std::vector<ModelCandidate>& default_candidates();

class ReferenceModel {
public:
  const ModelCandidate& candidate() const noexcept { return candidate_; }
  ModelKind kind() const noexcept { return candidate_.kind; }
  double cv_loss() const noexcept { return cv_loss_; }
  /// False for the k=1 fallback used when there are too few examples for
  /// ten-fold selection.
  bool selected() const noexcept { return selected_; }
  const std::string& layout_id() const noexcept { return layout_id_; }
  std::size_t training_size() const noexcept { return training_size_; }

  /// Clamped to [0,1]. Throws LayoutMismatch.
  double predict(const OneHotVector& v) const;

  /// {kind, hyperparameters, cv_loss} plus selection flags.
  json metadata() const;

  friend ReferenceModel fit_model(const ModelCandidate& c, std::span<const TrainingExample> examples);
  friend ReferenceModel train_reference_model(std::span<const TrainingExample> examples);

private:
  ModelCandidate candidate_;
  double cv_loss_ = 0.0;
  bool selected_ = true;
  std::string layout_id_;
  std::size_t width_ = 0;
  std::size_t training_size_ = 0;
  std::vector<TrainingExample> memory_;  // knn
  std::vector<double> weights_;          // linear, weights_[0] is the intercept
};

/// Fits one candidate on all examples (no model selection).
ReferenceModel fit_model(const ModelCandidate& c, std::span<const TrainingExample> examples);

/// Fold index per example. Examples are ranked by the stable hash of their
/// characterization id (id, then input position break ties) and dealt
/// round-robin, so every fold is non-empty whenever n >= folds.
std::vector<int> fold_assignment(std::span<const TrainingExample> examples, int folds = 10);

/// Pooled mean absolute error of held-out predictions.
double cross_validation_mae(const ModelCandidate& c, std::span<const TrainingExample> examples,
                            int folds = 10);

/// Ten-fold CV model selection over default_candidates(), refit on all
/// data. Throws InvalidArgument on an empty list; below ten examples
/// returns an unselected k=1 model.
ReferenceModel train_reference_model(std::span<const TrainingExample> examples);

inline double predict_reference_lok(const ReferenceModel& m, const OneHotVector& v) {
  return m.predict(v);
}

void to_json(json& j, const TrainingExample& e);
void from_json(const json& j, TrainingExample& e);

/// JSON lines: {characterization_id, vector: [0,1,...], lok}. The layout id
/// is not part of the line format; `layout_id` is stamped on import.
void write_training_jsonl(std::ostream& out, std::span<const TrainingExample> examples);
std::vector<TrainingExample> read_training_jsonl(std::istream& in, const std::string& layout_id = "");

}  // namespace kara
