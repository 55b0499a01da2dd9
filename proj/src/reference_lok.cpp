#include "kara/reference_lok.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>

namespace kara {

OneHotVector encode_one_hot(const Characterization& c, const Questionnaire& q) {
  if (c.risk_factor_id != q.risk_factor_id)
    throw LayoutMismatch("characterization '" + c.id + "' belongs to risk factor '" +
                             c.risk_factor_id + "', questionnaire is for '" + q.risk_factor_id + "'",
                         {{"characterization_id", c.id}});
  if (auto v = validate_characterization(c, q); !v.empty())
    throw ValidationFailed("characterization '" + c.id + "' does not match its questionnaire",
                           {{"violations", v}});

  OneHotVector out{q.layout_id(), std::vector<std::uint8_t>(q.width(), 0)};
  std::size_t offset = 0;
  for (const auto& question : q.questions) {
    if (auto it = c.answers.find(question.id); it != c.answers.end()) {
      for (std::size_t i = 0; i < question.options.size(); ++i)
        if (question.options[i].id == it->second) out.bits[offset + i] = 1;
    }
    offset += question.options.size();
  }
  return out;
}

namespace {

void require_same_layout(const OneHotVector& a, const OneHotVector& b) {
  if (a.layout_id != b.layout_id || a.bits.size() != b.bits.size())
    throw LayoutMismatch("one-hot vectors use different layouts",
                         {{"left", a.layout_id}, {"right", b.layout_id}});
}

}  // namespace

std::size_t hamming_distance(const OneHotVector& a, const OneHotVector& b) {
  require_same_layout(a, b);
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) d += a.bits[i] != b.bits[i];
  return d;
}

double similarity(const OneHotVector& a, const OneHotVector& b) {
  const auto d = hamming_distance(a, b);
  if (a.bits.empty()) return 1.0;
  return 1.0 - static_cast<double>(d) / static_cast<double>(a.bits.size());
}

std::string ModelCandidate::name() const {
  char buf[64];
  if (kind == ModelKind::knn)
    std::snprintf(buf, sizeof buf, "knn-k%d-%s", k, distance_weighted ? "distance" : "uniform");
  else
    std::snprintf(buf, sizeof buf, "linear-ridge%g", ridge);
  return buf;
}

const std::vector<ModelCandidate>& default_candidates() {
  static const std::vector<ModelCandidate> candidates = {
      {ModelKind::knn, 1, false, 0.0},       {ModelKind::knn, 1, true, 0.0},
      {ModelKind::knn, 3, false, 0.0},       {ModelKind::knn, 3, true, 0.0},
      {ModelKind::knn, 5, false, 0.0},       {ModelKind::knn, 5, true, 0.0},
      {ModelKind::linear, 0, false, 1e-3},   {ModelKind::linear, 0, false, 1e-2},
      {ModelKind::linear, 0, false, 1e-1},
  };
  return candidates;
}

double ReferenceModel::predict(const OneHotVector& v) const {
  if (v.layout_id != layout_id_ || v.bits.size() != width_)
    throw LayoutMismatch("vector layout does not match the model's training layout",
                         {{"model", layout_id_}, {"vector", v.layout_id}});
  double y = 0.0;
  if (candidate_.kind == ModelKind::linear) {
    y = weights_[0];
    for (std::size_t i = 0; i < width_; ++i)
      if (v.bits[i]) y += weights_[i + 1];
  } else {
    std::vector<std::pair<std::size_t, std::size_t>> dist;  // (distance, training index)
    dist.reserve(memory_.size());
    for (std::size_t i = 0; i < memory_.size(); ++i)
      dist.emplace_back(hamming_distance(memory_[i].vector, v), i);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(candidate_.k), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    const bool exact = candidate_.distance_weighted && dist[0].first == 0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double w = 1.0;
      if (candidate_.distance_weighted)
        w = exact ? (dist[i].first == 0 ? 1.0 : 0.0) : 1.0 / static_cast<double>(dist[i].first);
      num += w * memory_[dist[i].second].lok;
      den += w;
    }
    y = num / den;
  }
  return std::clamp(y, 0.0, 1.0);
}

json ReferenceModel::metadata() const {
  json hp = json::object();
  if (candidate_.kind == ModelKind::knn) {
    hp["k"] = candidate_.k;
    hp["weighting"] = candidate_.distance_weighted ? "distance" : "uniform";
  } else {
    hp["ridge"] = candidate_.ridge;
  }
  return json{{"kind", candidate_.kind == ModelKind::knn ? "knn" : "linear"},
              {"hyperparameters", hp},
              {"cv_loss", cv_loss_},
              {"selected", selected_},
              {"training_size", training_size_},
              {"layout_id", layout_id_}};
}

ReferenceModel fit_model(const ModelCandidate& c, std::span<const TrainingExample> examples) {
  if (examples.empty()) throw InvalidArgument("cannot fit a reference model without examples");
  ReferenceModel m;
  m.candidate_ = c;
  m.layout_id_ = examples.front().vector.layout_id;
  m.width_ = examples.front().vector.bits.size();
  m.training_size_ = examples.size();
  for (const auto& e : examples) {
    if (e.vector.layout_id != m.layout_id_ || e.vector.bits.size() != m.width_)
      throw LayoutMismatch("training examples use different layouts",
                           {{"characterization_id", e.characterization_id}});
    if (!in_unit_interval(e.lok))
      throw InvalidArgument("training lok outside [0,1]", {{"characterization_id", e.characterization_id}});
  }

  if (c.kind == ModelKind::knn) {
    if (c.k < 1) throw InvalidArgument("knn needs k >= 1");
    m.memory_.assign(examples.begin(), examples.end());
    return m;
  }

  // Ridge with an unpenalized intercept column.
  const auto n = static_cast<Eigen::Index>(examples.size());
  const auto d = static_cast<Eigen::Index>(m.width_) + 1;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = examples[static_cast<std::size_t>(i)];
    x(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < d; ++k) x(i, k) = e.vector.bits[static_cast<std::size_t>(k - 1)];
    y(i) = e.lok;
  }
  Eigen::MatrixXd h = x.transpose() * x;
  for (Eigen::Index k = 1; k < d; ++k) h(k, k) += c.ridge;
  Eigen::VectorXd w = h.ldlt().solve(x.transpose() * y);
  m.weights_.assign(w.data(), w.data() + w.size());
  return m;
}

std::vector<int> fold_assignment(std::span<const TrainingExample> examples, int folds) {
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint64_t> hash(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i)
    hash[i] = stable_hash(examples[i].characterization_id);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (hash[a] != hash[b]) return hash[a] < hash[b];
    if (examples[a].characterization_id != examples[b].characterization_id)
      return examples[a].characterization_id < examples[b].characterization_id;
    return a < b;
  });
  std::vector<int> fold(examples.size());
  for (std::size_t r = 0; r < order.size(); ++r) fold[order[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
  return fold;
}

double cross_validation_mae(const ModelCandidate& c, std::span<const TrainingExample> examples,
                            int folds) {
  if (examples.size() < 2) return 0.0;
  folds = std::min<int>(folds, static_cast<int>(examples.size()));
  const auto fold = fold_assignment(examples, folds);
  double total = 0.0;
  for (int f = 0; f < folds; ++f) {
    std::vector<TrainingExample> train;
    for (std::size_t i = 0; i < examples.size(); ++i)
      if (fold[i] != f) train.push_back(examples[i]);
    const auto model = fit_model(c, train);
    for (std::size_t i = 0; i < examples.size(); ++i)
      if (fold[i] == f) total += std::abs(model.predict(examples[i].vector) - examples[i].lok);
  }
  return total / static_cast<double>(examples.size());
}

ReferenceModel train_reference_model(std::span<const TrainingExample> examples) {
  if (examples.empty()) throw InvalidArgument("cannot train a reference model without examples");
  constexpr int kFolds = 10;

  if (examples.size() < static_cast<std::size_t>(kFolds)) {
    const ModelCandidate fallback{ModelKind::knn, 1, false, 0.0};
    auto m = fit_model(fallback, examples);
    m.cv_loss_ = cross_validation_mae(fallback, examples, kFolds);
    m.selected_ = false;
    return m;
  }

  const ModelCandidate* best = nullptr;
  double best_loss = 0.0;
  for (const auto& c : default_candidates()) {
    const double loss = cross_validation_mae(c, examples, kFolds);
    if (!best || loss < best_loss) {
      best = &c;
      best_loss = loss;
    }
  }
  auto m = fit_model(*best, examples);
  m.cv_loss_ = best_loss;
  return m;
}

void to_json(json& j, const TrainingExample& e) {
  j = json{{"characterization_id", e.characterization_id}, {"vector", e.vector.bits}, {"lok", e.lok}};
  if (!e.vector.layout_id.empty()) j["layout_id"] = e.vector.layout_id;
}

void from_json(const json& j, TrainingExample& e) {
  j.at("characterization_id").get_to(e.characterization_id);
  e.vector.bits.clear();
  for (const auto& b : j.at("vector")) {
    const int bit = b.get<int>();
    if (bit != 0 && bit != 1) throw InvalidArgument("one-hot bits must be 0 or 1");
    e.vector.bits.push_back(static_cast<std::uint8_t>(bit));
  }
  e.vector.layout_id = j.value("layout_id", std::string{});
  j.at("lok").get_to(e.lok);
}

void write_training_jsonl(std::ostream& out, std::span<const TrainingExample> examples) {
  for (const auto& e : examples) out << json(e).dump() << '\n';
}

std::vector<TrainingExample> read_training_jsonl(std::istream& in, const std::string& layout_id) {
  std::vector<TrainingExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto e = json::parse(line).get<TrainingExample>();
      if (e.vector.layout_id.empty()) e.vector.layout_id = layout_id;
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(std::string("bad training line: ") + ex.what(), {{"line", lineno}});
    }
  }
  return out;
}

}  // namespace kara
