// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace pvl::objectives {

/// The text a class name is prompted with before embedding.
std::string class_prompt(std::string_view class_name);

/// Deterministic stand-in for a language-model embedding of the prompted
/// class name: FNV-1a of the prompt seeds a Gaussian draw, which is
/// L2-normalized and scaled to norm sqrt(dim).
std::vector<double> pseudo_embedding(std::string_view class_name,
                                     std::size_t dim);

/// class id -> (name, D-vector).
class ClassEmbeddingTable {
public:
  struct Entry {
    std::string name;
    std::vector<double> vector;
  };

  ClassEmbeddingTable() = default;
  explicit ClassEmbeddingTable(std::size_t dim) : dim_(dim) {}

  /// Pseudo-embeddings for `names`, where class id = index.
  static ClassEmbeddingTable pseudo(const std::vector<std::string> &names,
                                    std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(std::uint32_t class_id) const {
    return entries_.count(class_id) > 0;
  }
  void set(std::uint32_t class_id, std::string name, std::vector<double> vec);
  /// Throws ContractError naming the class when absent.
  const Entry &at(std::uint32_t class_id) const;
  const std::map<std::uint32_t, Entry> &entries() const { return entries_; }

  /// One `class_id,name,v_1,...,v_D` record per line, shortest round-trip
  /// decimal form.
  std::string to_text() const;
  static ClassEmbeddingTable from_text(std::string_view text,
                                       std::size_t expected_dim);

  void save(const std::filesystem::path &path) const;
  static ClassEmbeddingTable load(const std::filesystem::path &path,
                                  std::size_t expected_dim);

private:
  std::size_t dim_ = 0;
  std::map<std::uint32_t, Entry> entries_;
};

} // namespace pvl::objectives
