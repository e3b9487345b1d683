#include "p2p/harness/splits.hpp"

#include "p2p/error.hpp"

namespace p2p::harness {

std::vector<SplitSpec> make_loso_splits(const Manifest& manifest) {
  if (manifest.subjects.size() < 2) {
    throw DataError("leave-one-subject-out needs at least two subjects, manifest has " +
                    std::to_string(manifest.subjects.size()));
  }
  for (const auto& s : manifest.subjects) {
    if (s.takes.size() < 2) {
      throw DataError("subject '" + s.id + "' has " + std::to_string(s.takes.size()) +
                      " take(s); at least two are needed to hold one out for validation");
    }
  }
  std::vector<SplitSpec> splits;
  for (std::size_t t = 0; t < manifest.subjects.size(); ++t) {
    SplitSpec split;
    split.test_subject = manifest.subjects[t].id;
    for (std::size_t s = 0; s < manifest.subjects.size(); ++s) {
      const std::size_t n = manifest.subjects[s].takes.size();
      for (std::size_t k = 0; k < n; ++k) {
        if (s == t) {
          split.test.push_back({s, k});
        } else if (k + 1 == n) {
          split.validation.push_back({s, k});
        } else {
          split.train.push_back({s, k});
        }
      }
    }
    splits.push_back(std::move(split));
  }
  return splits;
}

SplitSpec loso_split(const Manifest& manifest, const std::string& subject) {
  const std::size_t index = manifest.subject_index(subject);
  return make_loso_splits(manifest)[index];
}

std::string split_id(const SplitSpec& split) { return "loso:" + split.test_subject; }

}  // namespace p2p::harness
