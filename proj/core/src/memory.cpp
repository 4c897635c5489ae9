#include "pki/memory.hpp"

#include <string>

#include "pki/errors.hpp"

namespace pki {

std::vector<ClassMean> class_means(const FeatureDataset& dataset) {
  if (dataset.empty()) throw InvalidArgument("class_means: dataset is empty");
  std::map<ClassId, std::pair<Vector, std::size_t>> sums;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto& [sum, count] = sums[dataset.labels[i]];
    if (sum.empty()) sum.assign(dataset.dim, 0.0);
    const Vector& f = dataset.features[i];
    for (std::size_t j = 0; j < f.size(); ++j) sum[j] += f[j];
    ++count;
  }
  std::vector<ClassMean> out;
  out.reserve(sums.size());
  for (auto& [label, acc] : sums) {
    auto& [sum, count] = acc;
    for (double& x : sum) x /= static_cast<double>(count);
    out.push_back({label, std::move(sum)});
  }
  return out;
}

ClassMeanMemory ClassMeanMemory::updated(const std::vector<ClassMean>& means,
                                         std::size_t session) const {
  ClassMeanMemory next = *this;
  for (const auto& m : means) next.insert(m.label, {m.mean, session});
  return next;
}

const ClassMeanMemory::Entry& ClassMeanMemory::at(ClassId c) const {
  auto it = entries_.find(c);
  if (it == entries_.end()) throw InvalidArgument("memory has no entry for class " + std::to_string(c));
  return it->second;
}

std::uint64_t ClassMeanMemory::entry_hash(ClassId c) const { return hash_doubles(at(c).mean); }

void ClassMeanMemory::insert(ClassId c, Entry entry) {
  if (!entries_.empty() && !entry.mean.empty() &&
      entries_.begin()->second.mean.size() != entry.mean.size()) {
    throw InvalidArgument("memory: class " + std::to_string(c) + " mean has a different dimension");
  }
  if (!entries_.emplace(c, std::move(entry)).second) {
    throw InvalidState("memory: class " + std::to_string(c) +
                       " is already stored; label spaces of sessions must be disjoint");
  }
}

}  // namespace pki
