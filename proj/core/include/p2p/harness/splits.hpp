#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "p2p/harness/manifest.hpp"

namespace p2p::harness {

struct TakeRef {
  std::size_t subject = 0;
  std::size_t take = 0;
  friend bool operator==(const TakeRef&, const TakeRef&) = default;
};

/// Leave-one-subject-out split. The final take of every training subject is
/// held out for validation; the test subject contributes all of its takes.
struct SplitSpec {
  std::string test_subject;
  std::vector<TakeRef> train;
  std::vector<TakeRef> validation;
  std::vector<TakeRef> test;
};

/// One split per subject, in manifest order. Throws DataError for fewer than
/// two subjects or a subject with a single take.
std::vector<SplitSpec> make_loso_splits(const Manifest& manifest);

/// The split whose test subject is `subject`.
SplitSpec loso_split(const Manifest& manifest, const std::string& subject);

/// Id stored with statistics fit on a split, "loso:<subject>".
std::string split_id(const SplitSpec& split);

}  // namespace p2p::harness
