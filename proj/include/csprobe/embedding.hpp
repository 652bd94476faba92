#pragma once

// Word-embedding table in GloVe text format, plus the vector kernels
// (cosine similarity/distance, means) every metric is built on.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "csprobe/error.hpp"

namespace csprobe {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using WordVector = Vector<double>;

/// ASCII lowercase; bytes outside ASCII pass through untouched.
inline std::string fold_case(std::string_view token) {
  std::string out(token);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

/// Immutable word -> vector map. Rows are stored contiguously in load order.
template <typename Scalar>
class BasicEmbeddingTable {
 public:
  using VectorType = Vector<Scalar>;
  using ConstVectorMap = Eigen::Map<const VectorType>;

  BasicEmbeddingTable() = default;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }

  /// Case-normalized lookup; std::nullopt when the token is out of vocabulary.
  std::optional<ConstVectorMap> lookup(std::string_view word) const {
    const auto it = index_.find(fold_case(word));
    if (it == index_.end()) return std::nullopt;
    return row(it->second);
  }

  bool contains(std::string_view word) const { return index_.contains(fold_case(word)); }

  const std::vector<std::string>& words() const noexcept { return words_; }

  ConstVectorMap row(std::size_t i) const {
    return ConstVectorMap(data_.data() + i * dim_, static_cast<Eigen::Index>(dim_));
  }

  /// Parse GloVe text. When `expected_dim` is empty the dimension is taken from
  /// the first entry; otherwise a first entry of another width is a dimension error.
  static BasicEmbeddingTable load(std::istream& in,
                                  std::optional<std::size_t> expected_dim = std::nullopt);

  /// Inverse of load(): one line per entry in load order, shortest round-trip floats.
  void write(std::ostream& out) const;

  /// Build from in-memory entries (used by tests and fixtures).
  static BasicEmbeddingTable from_entries(
      std::size_t dim, const std::vector<std::pair<std::string, VectorType>>& entries);

 private:
  bool insert(std::string word, std::span<const Scalar> values) {
    std::string key = fold_case(word);
    if (index_.contains(key)) return false;
    index_.emplace(key, words_.size());
    words_.push_back(std::move(key));
    data_.insert(data_.end(), values.begin(), values.end());
    return true;
  }

  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<Scalar> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

using EmbeddingTable = BasicEmbeddingTable<double>;

namespace detail {

inline void split_fields(std::string_view line, std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    fields.push_back(line.substr(i, j - i));
    i = j;
  }
}

}  // namespace detail

template <typename Scalar>
BasicEmbeddingTable<Scalar> BasicEmbeddingTable<Scalar>::load(
    std::istream& in, std::optional<std::size_t> expected_dim) {
  if (expected_dim && *expected_dim == 0) {
    throw Error(ErrorCode::InvalidInput, "expected embedding dimension must be positive");
  }
  BasicEmbeddingTable table;
  std::string line;
  std::vector<std::string_view> fields;
  std::vector<Scalar> values;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    detail::split_fields(line, fields);
    if (fields.empty()) continue;
    const std::size_t width = fields.size() - 1;
    if (first) {
      if (width == 0) throw ParseError(line_no, "entry has no vector components");
      if (expected_dim && width != *expected_dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    "line " + std::to_string(line_no) + ": expected dimension " +
                        std::to_string(*expected_dim) + ", found " + std::to_string(width));
      }
      table.dim_ = width;
      first = false;
    } else if (width != table.dim_) {
      throw ParseError(line_no, "expected " + std::to_string(table.dim_ + 1) +
                                    " fields, found " + std::to_string(fields.size()));
    }
    values.resize(width);
    for (std::size_t k = 0; k < width; ++k) {
      const std::string_view f = fields[k + 1];
      Scalar v{};
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(line_no, "unparsable component '" + std::string(f) + "'");
      }
      values[k] = v;
    }
    table.insert(std::string(fields[0]), values);
  }
  return table;
}

template <typename Scalar>
void BasicEmbeddingTable<Scalar>::write(std::ostream& out) const {
  char buf[64];
  for (std::size_t i = 0; i < words_.size(); ++i) {
    out << words_[i];
    for (std::size_t k = 0; k < dim_; ++k) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, data_[i * dim_ + k]);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

template <typename Scalar>
BasicEmbeddingTable<Scalar> BasicEmbeddingTable<Scalar>::from_entries(
    std::size_t dim, const std::vector<std::pair<std::string, VectorType>>& entries) {
  if (dim == 0) throw Error(ErrorCode::InvalidInput, "embedding dimension must be positive");
  BasicEmbeddingTable table;
  table.dim_ = dim;
  for (const auto& [word, vec] : entries) {
    if (static_cast<std::size_t>(vec.size()) != dim) {
      throw Error(ErrorCode::DimensionMismatch, "entry '" + word + "' has wrong dimension");
    }
    if (!vec.allFinite()) throw Error(ErrorCode::InvalidInput, "entry '" + word + "' not finite");
    table.insert(word, std::span<const Scalar>(vec.data(), dim));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Kernels

namespace detail {

template <typename DA, typename DB>
void require_same_size(const Eigen::MatrixBase<DA>& u, const Eigen::MatrixBase<DB>& v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::DimensionMismatch, "vector dimensions differ: " +
                                                  std::to_string(u.size()) + " vs " +
                                                  std::to_string(v.size()));
  }
}

}  // namespace detail

/// u.v / (|u||v|), clamped to [-1, 1]. Zero-norm input is a hard error.
template <typename DA, typename DB>
typename DA::Scalar cosine_similarity(const Eigen::MatrixBase<DA>& u,
                                      const Eigen::MatrixBase<DB>& v) {
  using Scalar = typename DA::Scalar;
  detail::require_same_size(u, v);
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == Scalar(0) || nv == Scalar(0)) {
    throw Error(ErrorCode::DegenerateVector, "cosine undefined for a zero-norm vector");
  }
  const Scalar s = u.dot(v) / (nu * nv);
  return std::clamp(s, Scalar(-1), Scalar(1));
}

template <typename DA, typename DB>
typename DA::Scalar cosine_distance(const Eigen::MatrixBase<DA>& u,
                                    const Eigen::MatrixBase<DB>& v) {
  return typename DA::Scalar(1) - cosine_similarity(u, v);
}

/// Componentwise arithmetic mean.
template <typename Scalar>
Vector<Scalar> mean_vector(std::span<const Vector<Scalar>> vectors) {
  if (vectors.empty()) throw Error(ErrorCode::EmptyInput, "mean of an empty vector list");
  Vector<Scalar> acc = Vector<Scalar>::Zero(vectors.front().size());
  for (const auto& v : vectors) {
    detail::require_same_size(acc, v);
    acc += v;
  }
  return acc / static_cast<Scalar>(vectors.size());
}

template <typename Scalar>
Vector<Scalar> mean_vector(const std::vector<Vector<Scalar>>& vectors) {
  return mean_vector(std::span<const Vector<Scalar>>(vectors));
}

/// sum_i w_i v_i / sum_i w_i. Weights must be nonnegative with positive sum.
template <typename Scalar>
Vector<Scalar> weighted_mean_vector(std::span<const Vector<Scalar>> vectors,
                                    std::span<const Scalar> weights) {
  if (vectors.empty()) throw Error(ErrorCode::EmptyInput, "mean of an empty vector list");
  if (vectors.size() != weights.size()) {
    throw Error(ErrorCode::InvalidInput, "weight count does not match vector count");
  }
  Vector<Scalar> acc = Vector<Scalar>::Zero(vectors.front().size());
  Scalar total(0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    detail::require_same_size(acc, vectors[i]);
    acc += weights[i] * vectors[i];
    total += weights[i];
  }
  if (!(total > Scalar(0))) throw Error(ErrorCode::ZeroMass, "weights sum to zero");
  return acc / total;
}

}  // namespace csprobe
