#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oweval/types.hpp"

namespace oweval {

struct ImageInfo {
  std::int64_t id = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::string file_name;
};

// Parsed ground-truth dataset. Object image_ids always reference an entry of
// `images`; annotation ids are unique.
struct DatasetGT {
  std::vector<ImageInfo> images;
  std::vector<GroundTruthObject> objects;
  std::map<std::int64_t, std::string> categories;  // id -> normalized name
  std::vector<std::string> warnings;
};

// Parsed detection file, records in file order with index 0..n-1.
struct DetectionFile {
  std::vector<Detection> records;
  std::vector<std::string> warnings;
};

}  // namespace oweval
