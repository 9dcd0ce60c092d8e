#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "iwes/errors.hpp"

namespace iwes {

// One labeled point: feature vector plus class index in [0, num_classes).
struct LabeledExample {
  std::vector<double> features;
  int label = 0;
};

// An ordered labeled pool. Indices are stable for the lifetime of a run:
// removal flips a mask entry and never reorders or erases.
class Pool {
public:
  Pool() = default;
  Pool(std::vector<LabeledExample> examples, int num_classes)
      : examples_(std::move(examples)), num_classes_(num_classes) {
    if (num_classes_ < 1) throw InvalidInputError("Pool: num_classes must be positive");
    std::size_t dim = examples_.empty() ? 0 : examples_[0].features.size();
    for (const auto& ex : examples_) {
      if (ex.features.size() != dim)
        throw InvalidInputError("Pool: inconsistent feature dimension");
      if (ex.label < 0 || ex.label >= num_classes_)
        throw InvalidInputError("Pool: label out of range");
    }
    removed_.assign(examples_.size(), 0);
  }

  std::size_t size() const { return examples_.size(); }
  int num_classes() const { return num_classes_; }
  std::size_t dim() const { return examples_.empty() ? 0 : examples_[0].features.size(); }

  const LabeledExample& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<LabeledExample>& examples() const { return examples_; }

  bool is_removed(std::size_t i) const { return removed_[i] != 0; }
  void remove(std::size_t i) { removed_[i] = 1; }
  void restore_all() { removed_.assign(examples_.size(), 0); }

  std::size_t active_count() const {
    std::size_t n = 0;
    for (char r : removed_)
      if (!r) ++n;
    return n;
  }

  std::vector<std::size_t> active_indices() const {
    std::vector<std::size_t> idx;
    idx.reserve(examples_.size());
    for (std::size_t i = 0; i < examples_.size(); ++i)
      if (!removed_[i]) idx.push_back(i);
    return idx;
  }

private:
  std::vector<LabeledExample> examples_;
  int num_classes_ = 1;
  std::vector<char> removed_;
};

// A selected example: pool index, importance weight, the sampling probability
// used for the accepting coin flip, and the round it was selected in.
// Seed-set entries carry weight 1 and probability 1 (round 0).
struct WeightedExample {
  std::size_t example_index = 0;
  double weight = 1.0;
  double sampling_probability = 1.0;
  int round = 0;
};

// --- dataset CSV ---
// Header `f0,...,f{d-1},label`; label is an integer in [0, num_classes).

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

// Parses a dataset CSV. If num_classes <= 0 it is inferred as max(label)+1.
// Parse failures report the 1-based line number.
inline Pool load_dataset_csv(const std::string& path, int num_classes = 0) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInputError(path + ":1: empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label")
    throw InvalidInputError(path + ":1: expected header f0,...,label");
  const std::size_t dim = header.size() - 1;

  std::vector<LabeledExample> examples;
  int max_label = -1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != dim + 1)
      throw InvalidInputError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(dim + 1) + " fields, got " +
                              std::to_string(fields.size()));
    LabeledExample ex;
    ex.features.resize(dim);
    try {
      for (std::size_t j = 0; j < dim; ++j) ex.features[j] = std::stod(fields[j]);
      ex.label = std::stoi(fields[dim]);
    } catch (const std::exception&) {
      throw InvalidInputError(path + ":" + std::to_string(lineno) + ": unparseable field");
    }
    if (ex.label < 0)
      throw InvalidInputError(path + ":" + std::to_string(lineno) + ": negative label");
    max_label = std::max(max_label, ex.label);
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw InvalidInputError(path + ": dataset has no rows");
  const int c = num_classes > 0 ? num_classes : max_label + 1;
  if (max_label >= c)
    throw InvalidInputError(path + ": label " + std::to_string(max_label) +
                            " outside declared class count " + std::to_string(c));
  return Pool(std::move(examples), c);
}

inline void save_dataset_csv(const std::string& path, const Pool& pool) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write dataset file: " + path);
  const std::size_t dim = pool.dim();
  for (std::size_t j = 0; j < dim; ++j) out << "f" << j << ",";
  out << "label\n";
  char buf[64];
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& ex = pool[i];
    for (std::size_t j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ex.features[j]);
      out << buf << ",";
    }
    out << ex.label << "\n";
  }
}

}  // namespace iwes
