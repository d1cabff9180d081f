#pragma once

#include <cstdint>
#include <vector>

#include "qapg/corpus.hpp"

namespace qapg::synthetic {

struct SentinelOptions {
  std::size_t min_length = 6;
  std::size_t max_length = 16;
  std::size_t max_span = 4;
  std::size_t filler_words = 40;
};

// Random filler sentences with one answer span. The NER column is the
// marker channel: "SPAN" on the answer tokens, "O" elsewhere.
std::vector<corpus::Example> sentinel_span_task(std::size_t count, std::uint64_t seed, SentinelOptions options = {});

struct EntityOptions {
  std::size_t min_length = 8;
  std::size_t max_length = 18;
  std::size_t min_entities = 2;
  std::size_t max_entities = 4;
  std::size_t filler_words = 40;
  std::size_t names_per_type = 20;
};

// Sentences with 2-4 entity runs of PERSON/ORGANIZATION/LOCATION/DATE, at
// least one PERSON; the answer is the first PERSON run.
std::vector<corpus::Example> first_person_task(std::size_t count, std::uint64_t seed, EntityOptions options = {});

}  // namespace qapg::synthetic
