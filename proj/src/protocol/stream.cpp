// SPDX-License-Identifier: Apache-2.0
#include "pvl/protocol/stream.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "pvl/numerics/errors.hpp"
#include "pvl/numerics/rng.hpp"

namespace pvl::protocol {

namespace {
constexpr std::uint64_t kClassOrderTag = 0x5354524d01ULL;
constexpr std::uint64_t kSampleOrderTag = 0x5354524d02ULL;
constexpr std::uint64_t kDataTag = 0x44415441ULL;
constexpr std::uint64_t kStreamTag = 0x5354524dULL;
} // namespace

std::vector<std::uint32_t> FSCILStream::seen_classes(std::size_t t) const {
  std::vector<std::uint32_t> out;
  for (std::size_t s = 0; s <= t && s < sessions.size(); ++s)
    out.insert(out.end(), sessions[s].classes.begin(), sessions[s].classes.end());
  return out;
}

FSCILStream make_stream(const DatasetBundle &bundle, const StreamParams &p) {
  if (p.base_classes == 0)
    throw ConfigError("stream needs at least one base class");
  if (p.num_incremental > 0 && (p.way == 0 || p.shot == 0))
    throw ConfigError("incremental sessions need positive way and shot");
  if (p.total_classes() > bundle.num_classes())
    throw ConfigError("stream needs " + std::to_string(p.total_classes()) +
                      " classes (" + std::to_string(p.base_classes) + " base + " +
                      std::to_string(p.way) + "x" +
                      std::to_string(p.num_incremental) + " incremental + " +
                      std::to_string(p.pretext_classes) + " pretext), dataset has " +
                      std::to_string(bundle.num_classes()));

  std::vector<std::vector<std::size_t>> by_class(bundle.num_classes());
  for (std::size_t i = 0; i < bundle.size(); ++i)
    by_class[bundle.labels[i]].push_back(i);

  std::vector<std::uint32_t> order(bundle.num_classes());
  for (std::uint32_t c = 0; c < order.size(); ++c)
    order[c] = c;
  Rng rng(derive_seed(p.seed, kClassOrderTag));
  std::shuffle(order.begin(), order.end(), rng);

  FSCILStream s;
  s.params = p;
  std::size_t next = 0;
  auto take = [&](std::size_t n) {
    std::vector<std::uint32_t> cs(order.begin() + next, order.begin() + next + n);
    std::sort(cs.begin(), cs.end());
    next += n;
    return cs;
  };

  auto shuffled = [&](std::uint32_t cls) {
    auto idx = by_class[cls];
    Rng r(derive_seed(derive_seed(p.seed, kSampleOrderTag), cls));
    std::shuffle(idx.begin(), idx.end(), r);
    return idx;
  };

  auto require = [&](std::uint32_t cls, std::size_t need) {
    if (by_class[cls].size() < need)
      throw ConfigError("class " + std::to_string(cls) + " has " +
                        std::to_string(by_class[cls].size()) +
                        " samples, stream needs " + std::to_string(need));
  };

  std::vector<std::size_t> eval_pool;
  const std::size_t sessions = 1 + p.num_incremental;
  for (std::size_t t = 0; t < sessions; ++t) {
    SessionSplit split;
    split.index = t;
    split.classes = take(t == 0 ? p.base_classes : p.way);
    split.way = split.classes.size();
    split.shot = t == 0 ? 0 : p.shot;
    for (auto cls : split.classes) {
      auto idx = shuffled(cls);
      require(cls, p.eval_per_class + (t == 0 ? 1 : p.shot));
      eval_pool.insert(eval_pool.end(), idx.begin(),
                       idx.begin() + static_cast<std::ptrdiff_t>(p.eval_per_class));
      auto train_begin = idx.begin() + static_cast<std::ptrdiff_t>(p.eval_per_class);
      auto train_end = t == 0 ? idx.end()
                              : train_begin + static_cast<std::ptrdiff_t>(p.shot);
      split.samples.insert(split.samples.end(), train_begin, train_end);
    }
    s.sessions.push_back(std::move(split));
    auto sorted = eval_pool;
    std::sort(sorted.begin(), sorted.end());
    s.eval.push_back(std::move(sorted));
  }

  s.pretext.index = sessions;
  s.pretext.classes = take(p.pretext_classes);
  s.pretext.way = s.pretext.classes.size();
  for (auto cls : s.pretext.classes)
    s.pretext.samples.insert(s.pretext.samples.end(), by_class[cls].begin(),
                             by_class[cls].end());
  return s;
}

const char *violation_name(ViolationKind kind) {
  switch (kind) {
  case ViolationKind::ClassOverlap: return "class-overlap";
  case ViolationKind::Cardinality: return "cardinality";
  case ViolationKind::SampleOutsideSession: return "sample-outside-session";
  case ViolationKind::EvalCoverage: return "eval-coverage";
  case ViolationKind::EvalTrainOverlap: return "eval-train-overlap";
  case ViolationKind::PretextOverlap: return "pretext-overlap";
  case ViolationKind::BadIndex: return "bad-index";
  }
  return "unknown";
}

std::vector<Violation> validate_stream(const FSCILStream &s,
                                       const DatasetBundle &bundle) {
  std::vector<Violation> out;
  auto add = [&](ViolationKind k, std::string msg) {
    out.push_back({k, std::move(msg)});
  };
  auto label_of = [&](std::size_t idx, const std::string &where) -> long {
    if (idx >= bundle.size()) {
      add(ViolationKind::BadIndex, where + ": sample index " +
                                       std::to_string(idx) + " out of range");
      return -1;
    }
    return bundle.labels[idx];
  };

  std::map<std::uint32_t, std::size_t> owner;
  for (const auto &split : s.sessions)
    for (auto cls : split.classes) {
      auto [it, inserted] = owner.emplace(cls, split.index);
      if (!inserted)
        add(ViolationKind::ClassOverlap,
            "class " + std::to_string(cls) + " appears in session " +
                std::to_string(it->second) + " and session " +
                std::to_string(split.index));
    }

  std::set<std::size_t> train_samples;
  for (const auto &split : s.sessions) {
    const std::string where = "session " + std::to_string(split.index);
    std::set<std::uint32_t> cset(split.classes.begin(), split.classes.end());
    std::map<std::uint32_t, std::size_t> counts;
    for (auto idx : split.samples) {
      train_samples.insert(idx);
      long lbl = label_of(idx, where);
      if (lbl < 0)
        continue;
      auto cls = static_cast<std::uint32_t>(lbl);
      if (!cset.count(cls))
        add(ViolationKind::SampleOutsideSession,
            where + ": sample " + std::to_string(idx) + " has class " +
                std::to_string(cls) + " not in the session");
      ++counts[cls];
    }
    if (split.index > 0) {
      const std::size_t expected = split.shot * split.classes.size();
      if (split.samples.size() != expected)
        add(ViolationKind::Cardinality,
            where + ": " + std::to_string(split.samples.size()) +
                " samples, expected " + std::to_string(split.shot) + "x" +
                std::to_string(split.classes.size()) + " = " +
                std::to_string(expected));
      for (auto cls : split.classes)
        if (counts[cls] != split.shot)
          add(ViolationKind::Cardinality,
              where + ": class " + std::to_string(cls) + " has " +
                  std::to_string(counts[cls]) + " shots, expected " +
                  std::to_string(split.shot));
    } else {
      for (auto cls : split.classes)
        if (counts[cls] == 0)
          add(ViolationKind::Cardinality,
              where + ": class " + std::to_string(cls) + " has no samples");
    }
  }

  if (s.eval.size() != s.sessions.size())
    add(ViolationKind::EvalCoverage,
        std::to_string(s.eval.size()) + " evaluation sets for " +
            std::to_string(s.sessions.size()) + " sessions");
  for (std::size_t t = 0; t < s.eval.size() && t < s.sessions.size(); ++t) {
    const std::string where = "eval set " + std::to_string(t);
    auto seen = s.seen_classes(t);
    std::set<std::uint32_t> seen_set(seen.begin(), seen.end());
    std::map<std::uint32_t, std::size_t> present;
    for (auto idx : s.eval[t]) {
      long lbl = label_of(idx, where);
      if (lbl < 0)
        continue;
      auto cls = static_cast<std::uint32_t>(lbl);
      ++present[cls];
      if (!seen_set.count(cls))
        add(ViolationKind::EvalCoverage,
            where + ": class " + std::to_string(cls) + " not seen by session " +
                std::to_string(t));
      if (train_samples.count(idx))
        add(ViolationKind::EvalTrainOverlap,
            where + ": sample " + std::to_string(idx) + " is also a training sample");
    }
    for (auto cls : seen_set) {
      const std::size_t n = present.count(cls) ? present[cls] : 0;
      if (n != s.params.eval_per_class)
        add(ViolationKind::EvalCoverage,
            where + ": seen class " + std::to_string(cls) + " has " +
                std::to_string(n) + " eval samples, expected " +
                std::to_string(s.params.eval_per_class));
    }
  }

  for (auto cls : s.pretext.classes)
    if (auto it = owner.find(cls); it != owner.end())
      add(ViolationKind::PretextOverlap,
          "pretext class " + std::to_string(cls) + " also in session " +
              std::to_string(it->second));
  for (auto idx : s.pretext.samples) {
    long lbl = label_of(idx, "pretext");
    if (lbl >= 0 && owner.count(static_cast<std::uint32_t>(lbl)))
      add(ViolationKind::PretextOverlap,
          "pretext sample " + std::to_string(idx) + " has session class " +
              std::to_string(lbl));
  }
  return out;
}

std::vector<std::string> preset_names() { return {"cifar-mini", "cub-mini"}; }

Preset make_preset(const std::string &name, std::uint64_t seed) {
  Preset p;
  p.name = name;
  if (name == "cifar-mini") {
    p.stream.base_classes = 20;
    p.stream.way = 5;
    p.stream.shot = 5;
    p.stream.num_incremental = 4;
  } else if (name == "cub-mini") {
    p.stream.base_classes = 20;
    p.stream.way = 4;
    p.stream.shot = 3;
    p.stream.num_incremental = 5;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  p.stream.eval_per_class = 20;
  p.stream.pretext_classes = 16;
  p.stream.seed = derive_seed(seed, kStreamTag);
  p.generator.num_classes = p.stream.total_classes();
  p.generator.samples_per_class = 50;
  p.generator.image_size = 16;
  p.generator.channels = 1;
  p.generator.patch_size = 4;
  p.generator.noise_sigma = 0.15;
  p.generator.seed = derive_seed(seed, kDataTag);
  return p;
}

} // namespace pvl::protocol
