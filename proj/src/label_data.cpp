#include "consensus/label_data.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

namespace consensus {

LabelEncoding::LabelEncoding(std::vector<std::string> tokens) {
  for (auto& t : tokens) {
    if (codes_.count(t)) throw DataError("duplicate label token '" + t + "'");
    intern(t);
  }
}

int LabelEncoding::intern(const std::string& token) {
  auto [it, inserted] = codes_.try_emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int LabelEncoding::code(const std::string& token) const {
  auto it = codes_.find(token);
  return it == codes_.end() ? -1 : it->second;
}

LabelMatrix::LabelMatrix(std::vector<Triple> triples, std::vector<std::string> worker_ids,
                         std::vector<std::string> object_ids, LabelEncoding labels)
    : triples_(std::move(triples)),
      worker_ids_(std::move(worker_ids)),
      object_ids_(std::move(object_ids)),
      labels_(std::move(labels)) {
  if (triples_.empty()) throw DataError("no labels");
  if (labels_.size() < 2) throw DataError("need at least 2 distinct label values");
  const int J = n_objects(), W = n_workers(), K = n_classes();
  per_object_.resize(J);
  per_worker_.resize(W);
  std::set<std::pair<int, int>> seen;
  for (const auto& t : triples_) {
    if (t.worker < 0 || t.worker >= W || t.object < 0 || t.object >= J || t.label < 0 ||
        t.label >= K)
      throw DataError("label triple out of range");
    if (!seen.emplace(t.worker, t.object).second)
      throw DataError("duplicate (worker, object) pair: " + worker_ids_[t.worker] + ", " +
                      object_ids_[t.object]);
    per_object_[t.object].push_back({t.worker, t.label});
    per_worker_[t.worker].push_back({t.object, t.label});
  }
  for (int j = 0; j < J; ++j)
    if (per_object_[j].empty()) throw DataError("object '" + object_ids_[j] + "' has no labels");
  for (int w = 0; w < W; ++w)
    if (per_worker_[w].empty()) throw DataError("worker '" + worker_ids_[w] + "' has no labels");
  for (int j = 0; j < J; ++j) {
    if (!object_index_.emplace(object_ids_[j], j).second)
      throw DataError("duplicate object id '" + object_ids_[j] + "'");
  }
}

int LabelMatrix::object_index(const std::string& id) const {
  auto it = object_index_.find(id);
  return it == object_index_.end() ? -1 : it->second;
}

Eigen::MatrixXd LabelMatrix::object_frequencies() const {
  Eigen::MatrixXd freq = Eigen::MatrixXd::Zero(n_objects(), n_classes());
  for (int j = 0; j < n_objects(); ++j) {
    for (const auto& r : per_object_[j]) freq(j, r.label) += 1.0;
    freq.row(j) /= static_cast<double>(per_object_[j].size());
  }
  return freq;
}

Eigen::MatrixXd LabelMatrix::worker_frequencies() const {
  Eigen::MatrixXd freq = Eigen::MatrixXd::Zero(n_workers(), n_classes());
  for (int w = 0; w < n_workers(); ++w) {
    for (const auto& r : per_worker_[w]) freq(w, r.label) += 1.0;
    freq.row(w) /= static_cast<double>(per_worker_[w].size());
  }
  return freq;
}

Eigen::VectorXd LabelMatrix::label_frequencies() const {
  Eigen::VectorXd freq = Eigen::VectorXd::Zero(n_classes());
  for (const auto& t : triples_) freq(t.label) += 1.0;
  return freq / static_cast<double>(triples_.size());
}

namespace {

// Splits a data line on tabs; returns false for comment/blank lines.
bool split_row(std::string line, std::vector<std::string>& fields) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.empty() || line.front() == '#') return false;
  fields.clear();
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return true;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

LabelMatrix read_labels(std::istream& in) {
  std::unordered_map<std::string, int> workers, objects;
  std::vector<std::string> worker_ids, object_ids;
  LabelEncoding labels;
  std::vector<Triple> triples;
  std::set<std::pair<int, int>> seen;

  std::string line;
  std::vector<std::string> f;
  for (std::size_t row = 1; std::getline(in, line); ++row) {
    if (!split_row(line, f)) continue;
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty()) {
      std::ostringstream msg;
      msg << "row " << row << ": expected worker<TAB>object<TAB>label";
      throw DataError(msg.str());
    }
    auto [wi, wnew] = workers.try_emplace(f[0], static_cast<int>(worker_ids.size()));
    if (wnew) worker_ids.push_back(f[0]);
    auto [oi, onew] = objects.try_emplace(f[1], static_cast<int>(object_ids.size()));
    if (onew) object_ids.push_back(f[1]);
    if (!seen.emplace(wi->second, oi->second).second) {
      std::ostringstream msg;
      msg << "row " << row << ": duplicate (worker, object) pair (" << f[0] << ", " << f[1]
          << ")";
      throw DataError(msg.str());
    }
    triples.push_back({wi->second, oi->second, labels.intern(f[2])});
  }
  if (triples.empty()) throw DataError("label file contains no rows");
  if (labels.size() < 2) throw DataError("label file has fewer than 2 distinct labels");
  return LabelMatrix(std::move(triples), std::move(worker_ids), std::move(object_ids),
                     std::move(labels));
}

LabelMatrix ingest_labels(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_labels(in);
}

std::vector<GoldenRow> read_golden_rows(std::istream& in) {
  std::vector<GoldenRow> rows;
  std::string line;
  std::vector<std::string> f;
  for (std::size_t row = 1; std::getline(in, line); ++row) {
    if (!split_row(line, f)) continue;
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      std::ostringstream msg;
      msg << "golden row " << row << ": expected object<TAB>label";
      throw DataError(msg.str());
    }
    rows.push_back({row, f[0], f[1]});
  }
  return rows;
}

GoldenSet read_golden(std::istream& in, const LabelMatrix& matrix) {
  GoldenSet golden;
  for (const auto& r : read_golden_rows(in)) {
    std::ostringstream msg;
    msg << "golden row " << r.row << ": ";
    int j = matrix.object_index(r.object);
    if (j < 0) throw DataError(msg.str() + "unknown object '" + r.object + "'");
    int code = matrix.labels().code(r.label);
    if (code < 0) throw DataError(msg.str() + "label '" + r.label + "' absent from training labels");
    if (!golden.entries.emplace(j, code).second)
      throw DataError(msg.str() + "duplicate object '" + r.object + "'");
  }
  return golden;
}

GoldenSet ingest_golden(const std::filesystem::path& path, const LabelMatrix& matrix) {
  auto in = open_or_throw(path);
  return read_golden(in, matrix);
}

void write_labels(std::ostream& out, const LabelMatrix& matrix) {
  for (const auto& t : matrix.triples())
    out << matrix.worker_ids()[t.worker] << '\t' << matrix.object_ids()[t.object] << '\t'
        << matrix.labels().token(t.label) << '\n';
}

void write_golden(std::ostream& out, const GoldenSet& golden, const LabelMatrix& matrix) {
  for (const auto& [j, t] : golden.entries)
    out << matrix.object_ids()[j] << '\t' << matrix.labels().token(t) << '\n';
}

}  // namespace consensus
