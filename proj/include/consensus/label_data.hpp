#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace consensus {

/// A probability vector over the K label codes.
using ProbLabel = Eigen::VectorXd;

/// Raised for malformed or inconsistent label/golden input.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bijection between raw label tokens and codes 0..K-1, in first-occurrence order.
class LabelEncoding {
 public:
  LabelEncoding() = default;
  explicit LabelEncoding(std::vector<std::string> tokens);

  int intern(const std::string& token);
  int code(const std::string& token) const;  // -1 if unknown
  const std::string& token(int code) const { return tokens_.at(code); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> codes_;
};

struct Triple {
  int worker;
  int object;
  int label;
};

struct Response {
  int index;  // worker (per-object view) or object (per-worker view)
  int label;
};

/// Sparse worker x object matrix of observed labels, with per-object (W_j)
/// and per-worker (J_w) views. Immutable after construction.
class LabelMatrix {
 public:
  LabelMatrix() = default;

  /// Builds from already-encoded triples. Throws DataError on duplicate
  /// (worker, object) pairs, out-of-range codes, unlabeled objects/workers,
  /// or fewer than two label classes.
  LabelMatrix(std::vector<Triple> triples, std::vector<std::string> worker_ids,
              std::vector<std::string> object_ids, LabelEncoding labels);

  int n_objects() const { return static_cast<int>(object_ids_.size()); }
  int n_workers() const { return static_cast<int>(worker_ids_.size()); }
  int n_classes() const { return labels_.size(); }
  std::size_t n_labels() const { return triples_.size(); }
  double mean_labels_per_object() const {
    return static_cast<double>(n_labels()) / n_objects();
  }

  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<Response>& by_object(int j) const { return per_object_[j]; }
  const std::vector<Response>& by_worker(int w) const { return per_worker_[w]; }

  const std::vector<std::string>& worker_ids() const { return worker_ids_; }
  const std::vector<std::string>& object_ids() const { return object_ids_; }
  const LabelEncoding& labels() const { return labels_; }
  int object_index(const std::string& id) const;  // -1 if unknown

  /// Per-object relative label frequencies (J x K); rows sum to 1.
  Eigen::MatrixXd object_frequencies() const;
  /// Per-worker relative label frequencies (W x K).
  Eigen::MatrixXd worker_frequencies() const;
  /// Frequency of each label value across all labels.
  Eigen::VectorXd label_frequencies() const;

 private:
  std::vector<Triple> triples_;
  std::vector<std::vector<Response>> per_object_;
  std::vector<std::vector<Response>> per_worker_;
  std::vector<std::string> worker_ids_;
  std::vector<std::string> object_ids_;
  std::unordered_map<std::string, int> object_index_;
  LabelEncoding labels_;
};

/// Ground-truth labels for a subset T of objects, keyed by object index.
struct GoldenSet {
  std::map<int, int> entries;
  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

/// Parses `worker \t object \t label` rows; `#` lines and blank lines skipped.
LabelMatrix read_labels(std::istream& in);
LabelMatrix ingest_labels(const std::filesystem::path& path);

struct GoldenRow {
  std::size_t row;  // 1-based line number
  std::string object;
  std::string label;
};

/// Raw `object \t label` rows, comments and blank lines skipped.
std::vector<GoldenRow> read_golden_rows(std::istream& in);

/// Parses `object \t label` rows against an existing matrix.
GoldenSet read_golden(std::istream& in, const LabelMatrix& matrix);
GoldenSet ingest_golden(const std::filesystem::path& path, const LabelMatrix& matrix);

void write_labels(std::ostream& out, const LabelMatrix& matrix);
void write_golden(std::ostream& out, const GoldenSet& golden, const LabelMatrix& matrix);

}  // namespace consensus
