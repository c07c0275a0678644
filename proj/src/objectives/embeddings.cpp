// SPDX-License-Identifier: Apache-2.0
#include "pvl/objectives/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/rng.hpp"

namespace pvl::objectives {

std::string class_prompt(std::string_view class_name) {
  return "a photo of " + std::string(class_name);
}

std::vector<double> pseudo_embedding(std::string_view class_name,
                                     std::size_t dim) {
  Rng rng(fnv1a64(class_prompt(class_name)));
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(dim);
  double s = 0.0;
  for (auto &x : v) {
    x = dist(rng);
    s += x * x;
  }
  const double factor = std::sqrt(static_cast<double>(dim)) / std::sqrt(s);
  for (auto &x : v)
    x *= factor;
  return v;
}

ClassEmbeddingTable
ClassEmbeddingTable::pseudo(const std::vector<std::string> &names,
                            std::size_t dim) {
  ClassEmbeddingTable table(dim);
  for (std::size_t i = 0; i < names.size(); ++i)
    table.set(static_cast<std::uint32_t>(i), names[i],
              pseudo_embedding(names[i], dim));
  return table;
}

void ClassEmbeddingTable::set(std::uint32_t class_id, std::string name,
                              std::vector<double> vec) {
  if (vec.size() != dim_)
    throw DimensionError("embedding for class " + std::to_string(class_id) +
                         " has " + std::to_string(vec.size()) +
                         " values, expected " + std::to_string(dim_));
  for (double x : vec)
    if (!std::isfinite(x))
      throw NumericError("embedding for class " + std::to_string(class_id) +
                         " is not finite");
  if (name.find_first_of(",\n") != std::string::npos)
    throw ConfigError("class name '" + name + "' contains a separator");
  entries_[class_id] = {std::move(name), std::move(vec)};
}

const ClassEmbeddingTable::Entry &
ClassEmbeddingTable::at(std::uint32_t class_id) const {
  auto it = entries_.find(class_id);
  if (it == entries_.end())
    throw ContractError("missing embedding for class " +
                        std::to_string(class_id));
  return it->second;
}

std::string ClassEmbeddingTable::to_text() const {
  std::string out;
  char buf[64];
  for (const auto &[id, e] : entries_) {
    out += std::to_string(id);
    out += ',';
    out += e.name;
    for (double x : e.vector) {
      auto res = std::to_chars(buf, buf + sizeof buf, x);
      out += ',';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

ClassEmbeddingTable ClassEmbeddingTable::from_text(std::string_view text,
                                                   std::size_t expected_dim) {
  ClassEmbeddingTable table(expected_dim);
  std::size_t line_no = 0, offset = 0;
  while (offset < text.size()) {
    std::size_t end = text.find('\n', offset);
    if (end == std::string_view::npos)
      end = text.size();
    std::string_view line = text.substr(offset, end - offset);
    const std::size_t line_at = offset;
    offset = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (line.empty())
      continue;

    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    for (;;) {
      auto comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma - pos));
      if (comma == std::string_view::npos)
        break;
      pos = comma + 1;
    }
    auto fail = [&](const std::string &msg) {
      throw ParseError("embedding line " + std::to_string(line_no) + ": " + msg,
                       line_at);
    };
    if (fields.size() != expected_dim + 2)
      fail("expected " + std::to_string(expected_dim) + " values, found " +
           std::to_string(fields.size() < 2 ? 0 : fields.size() - 2));
    std::uint32_t id = 0;
    auto [p, ec] = std::from_chars(fields[0].data(),
                                   fields[0].data() + fields[0].size(), id);
    if (ec != std::errc() || p != fields[0].data() + fields[0].size())
      fail("bad class id");
    std::vector<double> vec(expected_dim);
    for (std::size_t i = 0; i < expected_dim; ++i) {
      auto f = fields[i + 2];
      auto [q, ec2] = std::from_chars(f.data(), f.data() + f.size(), vec[i]);
      if (ec2 != std::errc() || q != f.data() + f.size())
        fail("bad value '" + std::string(f) + "'");
    }
    if (table.contains(id))
      fail("duplicate class id " + std::to_string(id));
    table.set(id, std::string(fields[1]), std::move(vec));
  }
  return table;
}

void ClassEmbeddingTable::save(const std::filesystem::path &path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << to_text();
}

ClassEmbeddingTable ClassEmbeddingTable::load(const std::filesystem::path &path,
                                              std::size_t expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), expected_dim);
}

} // namespace pvl::objectives
