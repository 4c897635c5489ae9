#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "pki/data.hpp"

namespace pki {

struct ClassMean {
  ClassId label = 0;
  Vector mean;
};

// Arithmetic mean of the intermediate features of each class, ordered by
// class id. Throws InvalidArgument on an empty dataset.
std::vector<ClassMean> class_means(const FeatureDataset& dataset);

// Replay memory of one mean intermediate feature per seen class. Entries
// are write-once: old classes keep their bytes for the rest of the run.
class ClassMeanMemory {
 public:
  struct Entry {
    Vector mean;
    std::size_t origin_session = 0;
    bool operator==(const Entry&) const = default;
  };

  ClassMeanMemory() = default;

  // New memory containing this one plus `means`, tagged with `session`.
  // Throws InvalidState if any class is already stored.
  ClassMeanMemory updated(const std::vector<ClassMean>& means, std::size_t session) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(ClassId c) const { return entries_.contains(c); }
  const Entry& at(ClassId c) const;
  const std::map<ClassId, Entry>& entries() const { return entries_; }

  std::uint64_t entry_hash(ClassId c) const;

  // Used by checkpoint loading; same collision rules as updated().
  void insert(ClassId c, Entry entry);

  bool operator==(const ClassMeanMemory&) const = default;

 private:
  std::map<ClassId, Entry> entries_;
};

inline ClassMeanMemory memory_update(const ClassMeanMemory& memory,
                                     const std::vector<ClassMean>& new_means, std::size_t session) {
  return memory.updated(new_means, session);
}

}  // namespace pki
